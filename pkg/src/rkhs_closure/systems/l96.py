"""Two-layer Lorenz-96 model and the Wilks polynomial baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import TimeSeriesDataset

__all__ = [
    "L96Params",
    "DivergenceError",
    "l96_tendencies",
    "l96_slow_tendency",
    "l96_rk4_step",
    "l96_integrate",
    "simulate_l96",
    "coupling_term",
    "wilks_fit",
    "wilks_evaluate",
    "per_k_components",
    "l96_closure",
]


class DivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True)
class L96Params:
    K: int = 18
    J: int = 20
    F: float = 10.0
    h_x: float = -1.0
    h_y: float = 1.0
    eps: float = 0.5

    def __post_init__(self):
        if self.K < 4:
            raise ValueError("K must be at least 4")
        if self.J < 1:
            raise ValueError("J must be at least 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")


def coupling_term(p, Y):
    """``B^k = (h_x / J) sum_j Y^{j,k}``; ``Y`` has shape ``(..., K, J)``."""
    return p.h_x / p.J * Y.sum(axis=-1)


def l96_slow_tendency(X, B, F):
    """``X^{k-1}(X^{k+1} - X^{k-2}) - X^k + F + B^k`` with cyclic k."""
    return (np.roll(X, 1, -1) * (np.roll(X, -1, -1) - np.roll(X, 2, -1))
            - X + F + B)


def l96_tendencies(p, X, Y):
    """Time derivatives of ``X`` (..., K) and ``Y`` (..., K, J).

    The fast variables are cyclic over the flattened ``(k, j)`` index, so
    ``Y^{j+J,k} = Y^{j,k+1}``.
    """
    shape = Y.shape
    y = Y.reshape(shape[:-2] + (-1,))
    dy = (np.roll(y, -1, -1) * (np.roll(y, 1, -1) - np.roll(y, -2, -1)) - y
          + p.h_y * np.repeat(X, p.J, axis=-1)) / p.eps
    dX = l96_slow_tendency(X, coupling_term(p, Y), p.F)
    return dX, dy.reshape(shape)


def l96_rk4_step(p, X, Y, dt):
    k1x, k1y = l96_tendencies(p, X, Y)
    k2x, k2y = l96_tendencies(p, X + 0.5 * dt * k1x, Y + 0.5 * dt * k1y)
    k3x, k3y = l96_tendencies(p, X + 0.5 * dt * k2x, Y + 0.5 * dt * k2y)
    k4x, k4y = l96_tendencies(p, X + dt * k3x, Y + dt * k3y)
    return (X + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x),
            Y + dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y))


def l96_integrate(p, X0, Y0, n_steps, dt, record_every=1, bound=1e6):
    """RK4 integration returning states every ``record_every`` steps.

    Returns ``(Xs, Ys)`` of shapes ``(n_rec, K)`` and ``(n_rec, K, J)``
    including the initial state.
    """
    X = np.array(X0, dtype=float)
    Y = np.array(Y0, dtype=float)
    n_rec = n_steps // record_every + 1
    Xs = np.empty((n_rec,) + X.shape)
    Ys = np.empty((n_rec,) + Y.shape)
    Xs[0], Ys[0] = X, Y
    r = 1
    for k in range(n_steps):
        X, Y = l96_rk4_step(p, X, Y, dt)
        if (k + 1) % record_every == 0:
            if not (np.all(np.isfinite(X)) and np.abs(X).max() < bound):
                raise DivergenceError(f"L96 integration diverged at step {k + 1}")
            Xs[r], Ys[r] = X, Y
            r += 1
    return Xs, Ys


def simulate_l96(p, T, dt=1e-3, tau=0.01, rng=None, X0=None, Y0=None, burn_in=10.0,
                 return_fast=False):
    """Observe ``(X^k, B^k)`` every ``tau`` after discarding ``burn_in``.

    Unless given, ``X0 ~ N(0, 1)`` and ``Y0 ~ N(0, 0.01)`` iid.
    With ``return_fast`` the stored fast states ``(N, K, J)`` are returned
    as a second value.
    """
    rng = np.random.default_rng(rng)
    X = rng.standard_normal(p.K) if X0 is None else np.asarray(X0, float)
    Y = 0.1 * rng.standard_normal((p.K, p.J)) if Y0 is None else np.asarray(Y0, float)
    every = int(round(tau / dt))
    if every < 1 or abs(every * dt - tau) > 1e-9 * tau:
        raise ValueError("tau must be an integer multiple of dt")
    n_burn = int(round(burn_in / dt))
    if n_burn:
        Xs, Ys = l96_integrate(p, X, Y, n_burn, dt, record_every=n_burn)
        X, Y = Xs[-1], Ys[-1]
    n_obs = int(round(T / tau))
    Xs, Ys = l96_integrate(p, X, Y, n_obs * every, dt, record_every=every)
    B = coupling_term(p, Ys)
    ds = TimeSeriesDataset(tau, Xs, B,
                           x_names=tuple(f"x{k + 1}" for k in range(p.K)),
                           y_names=tuple(f"y{k + 1}" for k in range(p.K)))
    return (ds, Ys) if return_fast else ds


def _vander(X):
    return np.vander(np.asarray(X, dtype=float).ravel(), 6, increasing=True)


def wilks_fit(X_samples, B_samples):
    """Least-squares quintic ``B = b0 + b1 X + ... + b5 X^5``."""
    X = np.asarray(X_samples, dtype=float).ravel()
    B = np.asarray(B_samples, dtype=float).ravel()
    if np.unique(X).size < 6:
        raise np.linalg.LinAlgError("quintic fit needs at least 6 distinct X values")
    # scale X for conditioning, then map the coefficients back
    s = max(np.abs(X).max(), 1e-300)
    coef, _, rank, _ = np.linalg.lstsq(_vander(X / s), B, rcond=None)
    if rank < 6:
        raise np.linalg.LinAlgError("rank-deficient quintic fit")
    return coef / s ** np.arange(6)


def wilks_evaluate(coeffs, x):
    return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), coeffs)


def per_k_components(K, neighbors=0):
    """One estimator per ``k`` predicting ``B^k`` from ``X^{k-r..k+r}`` and ``B^k``."""
    comps = []
    for k in range(K):
        xs = tuple(sorted({(k + r) % K for r in range(-neighbors, neighbors + 1)}))
        comps.append((xs, (k,), (k,)))
    return comps


def l96_closure(p, estimator, tau, substeps=1, bound=None):
    """Deterministic closure ``dX/dt = slow tendency(X, Bhat)`` integrated with RK4."""
    from ..closure import ClosureModel

    return ClosureModel(lambda x, b: l96_slow_tendency(x, b, p.F), estimator, tau,
                        substeps, bound=bound)
