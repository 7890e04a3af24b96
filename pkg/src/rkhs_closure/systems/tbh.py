"""Truncated Burgers-Hopf model on complex Fourier modes ``u^1..u^Lambda``.

    du^k/dt = -(i k / 2) sum_{k+p+q=0, 1<=|p|,|q|<=Lambda} (u^p)^* (u^q)^*

with ``u^{-k} = (u^k)^*``. Only the positive modes are stored; the negative
ones are their conjugates, so the reality condition holds by construction.
The triad sum is the direct discrete convolution of the two-sided mode
array, which is exactly the constrained sum above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import TimeSeriesDataset

__all__ = [
    "TBHParams",
    "TBHConsistencyError",
    "X_NAMES",
    "Y_NAMES",
    "two_sided",
    "tbh_rhs",
    "tbh_forcing_F",
    "tbh_resolved_term",
    "tbh_rk4_step",
    "tbh_energy",
    "tbh_initial_condition",
    "simulate_tbh",
    "TBH_COMPONENTS",
    "tbh_known_drift",
    "tbh_closure",
]

X_NAMES = ("u1_re", "u1_im")
Y_NAMES = ("u2_re", "u2_im", "F_re", "F_im")


class TBHConsistencyError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TBHParams:
    Lambda: int = 50
    beta: float = 10.0
    dt: float = 1e-3

    def __post_init__(self):
        if self.Lambda < 2:
            raise ValueError("Lambda must be at least 2")
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def mean_energy(self):
        return self.Lambda / self.beta


def two_sided(u):
    """Modes ``-Lambda..Lambda`` (zero mode 0) from the positive ones."""
    u = np.asarray(u, dtype=complex)
    zero = np.zeros(u.shape[:-1] + (1,), dtype=complex)
    return np.concatenate([np.conj(u[..., ::-1]), zero, u], axis=-1)


def _positive(u, Lambda):
    u = np.asarray(u, dtype=complex)
    if u.shape[-1] == Lambda:
        return u
    if u.shape[-1] == 2 * Lambda + 1:
        ext = u
        pos, neg = ext[..., Lambda + 1:], ext[..., :Lambda][..., ::-1]
        if np.max(np.abs(neg - np.conj(pos)), initial=0.0) > 1e-10:
            raise TBHConsistencyError("modes violate u^{-k} = conj(u^k)")
        if abs(ext[..., Lambda]).max() > 1e-10:
            raise TBHConsistencyError("zero mode must vanish")
        return pos
    raise ValueError(f"expected {Lambda} or {2 * Lambda + 1} modes, got {u.shape[-1]}")


def _triad_sums(ext, Lambda):
    """``sum_{p+q=k} ext_p ext_q`` for ``k = 1..Lambda``."""
    full = np.convolve(ext, ext)
    return full[2 * Lambda + 1:3 * Lambda + 1]


def tbh_rhs(u):
    """Tendency of the positive modes ``u^1..u^Lambda`` (1-d array)."""
    u = np.asarray(u, dtype=complex)
    Lam = u.shape[-1]
    k = np.arange(1, Lam + 1)
    return -0.5j * k * _triad_sums(two_sided(u), Lam)


def tbh_forcing_F(u):
    """Interactions of mode 1 that involve only modes with ``|p|, |q| >= 2``."""
    u = np.asarray(u, dtype=complex)
    Lam = u.shape[-1]
    ext = two_sided(u)
    ext[Lam - 1] = ext[Lam + 1] = 0.0
    return -0.5j * _triad_sums(ext, Lam)[0]


def tbh_resolved_term(u1, u2):
    """``-i (u^1)^* u^2``, the part of the mode-1 tendency kept in the reduced model."""
    return -1j * np.conj(u1) * u2


def tbh_rk4_step(u, dt):
    k1 = tbh_rhs(u)
    k2 = tbh_rhs(u + 0.5 * dt * k1)
    k3 = tbh_rhs(u + 0.5 * dt * k2)
    k4 = tbh_rhs(u + dt * k3)
    return u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def tbh_energy(u):
    """``sum_{k=1}^Lambda |u^k|^2``."""
    return np.sum(np.abs(np.asarray(u)) ** 2, axis=-1)


def tbh_initial_condition(p, rng=None):
    """IID complex Gaussian modes rescaled to mean energy ``Lambda / beta`` per mode."""
    rng = np.random.default_rng(rng)
    u = (rng.standard_normal(p.Lambda) + 1j * rng.standard_normal(p.Lambda)) / np.sqrt(2)
    return u * np.sqrt(p.mean_energy * p.Lambda / tbh_energy(u))


def simulate_tbh(p, u0, T, tau=0.01, burn_in=100.0, check_tol=1e-12, return_modes=False):
    """Integrate with RK4 at ``p.dt`` and store mode 1, mode 2 and ``F`` every ``tau``.

    ``burn_in`` time units are integrated first and discarded.

    The stored data are ``x = (Re u^1, Im u^1)`` and
    ``y = (Re u^2, Im u^2, Re F, Im F)``. At every stored step the mode-1
    tendency is checked against ``-i (u^1)^* u^2 + F``.
    """
    u = _positive(u0, p.Lambda).copy()
    every = int(round(tau / p.dt))
    if every < 1 or abs(every * p.dt - tau) > 1e-9 * tau:
        raise ValueError("tau must be an integer multiple of dt")
    for _ in range(int(round(burn_in / p.dt))):
        u = tbh_rk4_step(u, p.dt)
    n_obs = int(round(T / tau))
    modes = np.empty((n_obs + 1, p.Lambda), dtype=complex)
    F = np.empty(n_obs + 1, dtype=complex)
    for r in range(n_obs + 1):
        if r:
            for _ in range(every):
                u = tbh_rk4_step(u, p.dt)
        if not np.all(np.isfinite(u)):
            raise TBHConsistencyError(f"non-finite modes at stored step {r}")
        modes[r] = u
        F[r] = tbh_forcing_F(u)
        rhs1 = tbh_rhs(u)[0]
        split = tbh_resolved_term(u[0], u[1]) + F[r]
        if abs(rhs1 - split) > check_tol * max(1.0, abs(rhs1)):
            raise TBHConsistencyError(f"mode-1 decomposition fails at stored step {r}")
    x = np.column_stack([modes[:, 0].real, modes[:, 0].imag])
    y = np.column_stack([modes[:, 1].real, modes[:, 1].imag, F.real, F.imag])
    ds = TimeSeriesDataset(tau, x, y, x_names=X_NAMES, y_names=Y_NAMES)
    return (ds, modes) if return_modes else ds


# estimator layout of the reduced mode-1 model: each unresolved column is
# predicted from the matching resolved column and its own history
TBH_COMPONENTS = (
    ((0,), (0,), (0,)),   # Re u2 | Re u1, Re u2
    ((1,), (1,), (1,)),   # Im u2 | Im u1, Im u2
    ((0,), (2,), (2,)),   # Re F  | Re u1, Re F
    ((1,), (3,), (3,)),   # Im F  | Im u1, Im F
)


def tbh_known_drift(x, yhat):
    """Real form of ``-i (u1)^* u2 + F`` on batched ``(B, 2)``/``(B, 4)`` arrays."""
    a, b = x[:, 0], x[:, 1]
    c, d, f_re, f_im = yhat[:, 0], yhat[:, 1], yhat[:, 2], yhat[:, 3]
    return np.column_stack([a * d - b * c + f_re, -(a * c + b * d) + f_im])


def tbh_closure(estimator, tau, substeps=10, residual_noise="F", bound=None):
    """Reduced mode-1 closure.

    ``residual_noise`` selects which predicted columns receive Gaussian noise
    with the fitted residual covariance: ``"F"`` (the forcing only),
    ``"all"`` or ``"none"``.
    """
    from ..closure import ClosureModel

    if residual_noise not in ("F", "all", "none"):
        raise ValueError(f"unknown residual_noise mode {residual_noise!r}")
    R = None
    if residual_noise != "none":
        R = np.array(estimator.residual_cov)
        if residual_noise == "F":
            R[:2, :] = 0.0
            R[:, :2] = 0.0
    return ClosureModel(tbh_known_drift, estimator, tau, substeps, residual_noise=R,
                        bound=bound)
