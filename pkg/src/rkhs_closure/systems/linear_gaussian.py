"""Two-scale linear Gaussian system and its analytic statistics.

    dx = (a11 x + a12 y) dt + sigma_x dW_x
    dy = (a21 x + a22 y) / eps dt + sigma_y / sqrt(eps) dW_y
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, signal

from ..data import TimeSeriesDataset

__all__ = [
    "LinearGaussianParams",
    "PAPER_PARAMS",
    "drift_matrix",
    "noise_covariance",
    "lyapunov_equilibrium_cov",
    "conditional_law",
    "averaged_coefficient",
    "rkhs_markov_coefficient",
    "fast_invariant_density",
    "analytic_acv_linear",
    "analytic_cross_cov",
    "simulate_linear_gaussian",
    "euler_maruyama_paths",
    "default_dt",
    "averaged_model",
    "memory_closure",
]


@dataclass(frozen=True)
class LinearGaussianParams:
    a11: float
    a12: float
    a21: float
    a22: float
    eps: float
    sigma_x: float
    sigma_y: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.sigma_x == 0 or self.sigma_y == 0:
            raise ValueError("sigma_x and sigma_y must be nonzero")
        if not self.a22 < 0:
            raise ValueError("a22 must be negative")
        if not self.a11 - self.a12 * self.a21 / self.a22 < 0:
            raise ValueError("averaged coefficient a11 - a12 a21 / a22 must be negative")
        if np.max(np.linalg.eigvals(drift_matrix(self)).real) >= 0:
            raise ValueError("drift matrix is not Hurwitz")

    def with_eps(self, eps):
        return LinearGaussianParams(self.a11, self.a12, self.a21, self.a22, eps,
                                    self.sigma_x, self.sigma_y)


def PAPER_PARAMS(eps):
    """a11 = a21 = a22 = -1, a12 = 1, sigma_x = sigma_y = sqrt(2)."""
    return LinearGaussianParams(-1.0, 1.0, -1.0, -1.0, eps, np.sqrt(2.0), np.sqrt(2.0))


def drift_matrix(p):
    return np.array([[p.a11, p.a12], [p.a21 / p.eps, p.a22 / p.eps]])


def noise_covariance(p):
    return np.diag([p.sigma_x**2, p.sigma_y**2 / p.eps])


def lyapunov_equilibrium_cov(p):
    """Stationary covariance ``S`` solving ``A S + S A^T + Q = 0``."""
    A = drift_matrix(p)
    S = linalg.solve_continuous_lyapunov(A, -noise_covariance(p))
    return 0.5 * (S + S.T)


def conditional_law(p):
    """Slope and variance of the Gaussian ``p(y | x)`` at equilibrium."""
    S = lyapunov_equilibrium_cov(p)
    slope = S[1, 0] / S[0, 0]
    return slope, S[1, 1] - slope * S[0, 1]


def averaged_coefficient(p):
    """Drift of the averaging limit, ``a11 - a12 a21 / a22``."""
    if p.a22 == 0:
        raise ValueError("a22 = 0: averaged coefficient undefined")
    return p.a11 - p.a12 * p.a21 / p.a22


def rkhs_markov_coefficient(p):
    """Drift obtained by averaging the slow equation over the exact ``p(y|x)``."""
    slope, _ = conditional_law(p)
    return p.a11 + p.a12 * slope


def fast_invariant_density(p, x):
    """Mean and variance of the frozen-x fast invariant density."""
    return -p.a21 / p.a22 * np.asarray(x), -0.5 * p.sigma_y**2 / p.a22


def analytic_acv_linear(p, lags):
    """``Cov(x_{t+l}, x_t) = [expm(A l) S]_{11}`` for each lag ``l`` (time units)."""
    A = drift_matrix(p)
    S = lyapunov_equilibrium_cov(p)
    lags = np.atleast_1d(np.asarray(lags, dtype=float))
    return np.array([(linalg.expm(A * abs(l)) @ S)[0, 0] for l in lags])


def analytic_cross_cov(p, lags):
    """``Cov(y_t, x_{t-l}) = [expm(A l) S]_{21}`` for lags ``l >= 0``."""
    A = drift_matrix(p)
    S = lyapunov_equilibrium_cov(p)
    lags = np.atleast_1d(np.asarray(lags, dtype=float))
    return np.array([(linalg.expm(A * l) @ S)[1, 0] for l in lags])


def default_dt(eps):
    return min(1e-3, eps / 20.0)


def euler_maruyama_paths(p, x0, y0, dt, xi_x, xi_y, record_every=1):
    """Euler-Maruyama for a batch of paths driven by given standard normals.

    Parameters
    ----------
    x0, y0 : (B,) arrays
    xi_x, xi_y : (n_steps, B) arrays of standard normal draws;
        ``n_steps`` must be a multiple of ``record_every``.

    Returns
    -------
    xs, ys : (n_steps // record_every + 1, B) arrays including the start.

    The scheme is the linear recurrence ``v_{k+1} = (I + A dt) v_k + D xi_k``;
    when ``I + A dt`` is well diagonalizable it is evaluated per eigen-mode
    with :func:`scipy.signal.lfilter`, which is the same recursion in a
    different basis.
    """
    xi_x = np.asarray(xi_x, dtype=float)
    xi_y = np.asarray(xi_y, dtype=float)
    n_steps = xi_x.shape[0]
    if n_steps % record_every:
        raise ValueError("n_steps must be a multiple of record_every")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if xi_x.ndim == 1:
        xi_x, xi_y = xi_x[:, None], xi_y[:, None]
    Mk = np.eye(2) + dt * drift_matrix(p)
    D = np.sqrt(dt) * np.array([p.sigma_x, p.sigma_y / np.sqrt(p.eps)])
    lam, P = np.linalg.eig(Mk)
    if abs(lam[0] - lam[1]) > 1e-10 and np.linalg.cond(P) < 1e6:
        Pinv = np.linalg.inv(P)
        w0 = Pinv @ np.vstack([x0, y0])
        rec = slice(record_every - 1, None, record_every)
        out = np.zeros((2, n_steps // record_every + 1, x0.shape[0]))
        out[0, 0], out[1, 0] = x0, y0
        for j in range(2):
            u = Pinv[j, 0] * D[0] * xi_x + Pinv[j, 1] * D[1] * xi_y
            w, _ = signal.lfilter([1.0], [1.0, -lam[j]], u.astype(complex), axis=0,
                                  zi=(lam[j] * w0[j])[None, :])
            w = w[rec]
            out[0, 1:] += (P[0, j] * w).real
            out[1, 1:] += (P[1, j] * w).real
        return out[0], out[1]
    x, y = x0.copy(), y0.copy()
    n_rec = n_steps // record_every + 1
    xs = np.empty((n_rec,) + x.shape)
    ys = np.empty((n_rec,) + y.shape)
    xs[0], ys[0] = x, y
    r = 1
    for k in range(n_steps):
        x, y = (Mk[0, 0] * x + Mk[0, 1] * y + D[0] * xi_x[k],
                Mk[1, 0] * x + Mk[1, 1] * y + D[1] * xi_y[k])
        if (k + 1) % record_every == 0:
            xs[r], ys[r] = x, y
            r += 1
    return xs, ys


def simulate_linear_gaussian(p, T, dt=None, rng=None, tau=0.01, x0=None, y0=None,
                             burn_in=10.0, max_ratio=0.1):
    """Sample one path and return it observed every ``tau``.

    The initial state is drawn from the stationary law unless given, and
    ``burn_in`` time units are discarded. ``dt`` defaults to
    ``min(1e-3, eps/20)`` and must satisfy ``dt <= max_ratio * eps``.
    """
    rng = np.random.default_rng(rng)
    dt = default_dt(p.eps) if dt is None else float(dt)
    if dt > max_ratio * p.eps + 1e-15:
        raise ValueError(f"dt={dt} too large for eps={p.eps} (limit {max_ratio} * eps)")
    every = int(round(tau / dt))
    if every < 1 or abs(every * dt - tau) > 1e-9 * tau:
        raise ValueError("tau must be an integer multiple of dt")
    if x0 is None or y0 is None:
        S = lyapunov_equilibrium_cov(p)
        v = rng.multivariate_normal(np.zeros(2), S)
        x0 = v[0] if x0 is None else x0
        y0 = v[1] if y0 is None else y0
    n_burn = int(round(burn_in / dt))
    n_obs = int(round(T / tau))
    x, y = np.array([x0], float), np.array([y0], float)
    if n_burn:
        xs, ys = euler_maruyama_paths(p, x, y, dt, rng.standard_normal((n_burn, 1)),
                                      rng.standard_normal((n_burn, 1)), record_every=n_burn)
        x, y = xs[-1], ys[-1]
    xs = [x[0]]
    ys = [y[0]]
    chunk = max(1, 200_000 // every) * every
    total = n_obs * every
    done = 0
    while done < total:
        n = min(chunk, total - done)
        cx, cy = euler_maruyama_paths(p, x, y, dt, rng.standard_normal((n, 1)),
                                      rng.standard_normal((n, 1)), record_every=every)
        xs.extend(cx[1:, 0])
        ys.extend(cy[1:, 0])
        x, y = cx[-1], cy[-1]
        done += n
    return TimeSeriesDataset(tau, np.array(xs), np.array(ys))


def averaged_model(p, tau=0.01, substeps=10):
    """Averaging-limit closure ``dx = a~ x dt + sigma_x dW``.

    Expressed as ``a11 x + a12 yhat`` with ``yhat`` the mean of the frozen-x
    fast invariant density, so it runs through the same integrator as the
    data-driven closures.
    """
    from ..closure import ClosureModel, linear_estimator
    from ..data import DelayConfig

    est = linear_estimator([[-p.a21 / p.a22]], DelayConfig(0, 0))
    return ClosureModel(lambda x, y: p.a11 * x + p.a12 * y, est, tau, substeps,
                        diffusion=[[p.sigma_x]])


def memory_closure(p, m, tau=0.01, substeps=1):
    """Closure with the exact linear memory weights over ``x_{t-m:t}``."""
    from ..closure import ClosureModel, linear_estimator
    from ..data import DelayConfig
    from ..spectral import analytic_memory_weights

    w = analytic_memory_weights(p, m, tau)
    est = linear_estimator(w.as_delay_coef()[:, None], DelayConfig(m, 0))
    return ClosureModel(lambda x, y: p.a11 * x + p.a12 * y, est, tau, substeps,
                        diffusion=[[p.sigma_x]])
