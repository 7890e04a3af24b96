"""Memory weights of the linear Gaussian closure and their spectra.

For a stationary pair ``(x, y)`` the best linear predictor of ``y_t`` from
``x_{t-m:t}`` is ``sum_n S[n] x_{t-n}``, where ``S`` solves the Toeplitz
system ``sum_k S[k] gamma_xx[n-k] = gamma_xy[n]`` for ``n = 0..m`` with
``gamma_xy[n] = Cov(y_t, x_{t-n})``. In frequency space the predictor is the
DFT ``S_m(w) = sum_n S[n] exp(-i w n tau)``.

Fourier conventions: ``f(w) = int f(t) exp(-i w t) dt`` and
``f(t) = (1/2pi) int f(w) exp(i w t) dw``, so the stationary covariance is
``(1/pi) int_0^inf |x(w)|^2 cos(w l) dw``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

from .systems.linear_gaussian import (analytic_acv_linear, analytic_cross_cov,
                                      drift_matrix)

__all__ = [
    "MemoryWeights",
    "memory_weights_from_covariances",
    "analytic_memory_weights",
    "verify_convolution_identity",
    "weights_dft",
    "default_omega_grid",
    "analytic_spectrum_full",
    "closure_spectrum_limit",
    "acv_from_spectrum",
    "closure_acv_exact",
    "write_spectrum_csv",
]


@dataclass(frozen=True)
class MemoryWeights:
    """Regression weights ``S = Sigma_12 Sigma_22^{-1}``; ``S[n]`` multiplies ``x_{t-n}``."""

    S: np.ndarray
    tau: float
    m: int

    def __post_init__(self):
        if self.S.shape != (self.m + 1,):
            raise ValueError(f"expected {self.m + 1} weights, got {self.S.shape}")
        if not np.all(np.isfinite(self.S)):
            raise ValueError("memory weights must be finite")

    def as_delay_coef(self):
        """Weights in delay-state column order (oldest lag first)."""
        return self.S[::-1].copy()


def _toeplitz(gamma_xx):
    return linalg.toeplitz(np.asarray(gamma_xx, dtype=float))


def memory_weights_from_covariances(gamma_xx, gamma_xy, tau=1.0):
    """Solve ``S Sigma_22 = Sigma_12`` with ``Sigma_22[k, n] = gamma_xx[|n - k|]``.

    Parameters
    ----------
    gamma_xx : (m+1,) array
        ``Cov(x_{t+n}, x_t)`` for ``n = 0..m``.
    gamma_xy : (m+1,) array
        ``Cov(y_t, x_{t-n})`` for ``n = 0..m``.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the Toeplitz matrix is not positive definite.
    """
    gxx = np.asarray(gamma_xx, dtype=float).ravel()
    gxy = np.asarray(gamma_xy, dtype=float).ravel()
    if gxx.shape != gxy.shape or gxx.size == 0:
        raise ValueError("gamma_xx and gamma_xy must have the same nonzero length")
    T = _toeplitz(gxx)
    try:
        c = linalg.cho_factor(T, lower=True)
    except linalg.LinAlgError as err:
        raise np.linalg.LinAlgError("autocovariance Toeplitz matrix is not positive definite") from err
    # Sigma_22 is symmetric, so S Sigma_22 = Sigma_12 is Sigma_22 S^T = Sigma_12^T
    S = linalg.cho_solve(c, gxy)
    return MemoryWeights(S, float(tau), gxx.size - 1)


def analytic_memory_weights(p, m, tau):
    """Weights from the exact covariances of the linear Gaussian system."""
    lags = tau * np.arange(m + 1)
    return memory_weights_from_covariances(analytic_acv_linear(p, lags),
                                           analytic_cross_cov(p, lags), tau)


def verify_convolution_identity(weights, gamma_xx, gamma_xy):
    """``max_n |sum_k S[k] gamma_xx[n-k] - gamma_xy[n]|`` over ``n = 0..m``."""
    S = weights.S if isinstance(weights, MemoryWeights) else np.asarray(weights, float)
    return float(np.max(np.abs(_toeplitz(gamma_xx) @ S - np.asarray(gamma_xy, float))))


def weights_dft(weights, omega_grid, tau=None):
    """``S_m(w) = sum_n S[n] exp(-i w n tau)`` on the given frequencies."""
    if isinstance(weights, MemoryWeights):
        S, tau = weights.S, weights.tau if tau is None else tau
    else:
        S = np.asarray(weights, dtype=float)
        tau = 1.0 if tau is None else tau
    w = np.asarray(omega_grid, dtype=float)
    n = np.arange(S.size)
    return np.exp(-1j * np.multiply.outer(w, n) * tau) @ S


def default_omega_grid(tau, n=1024):
    """``n`` points on ``[0, pi / tau]``."""
    return np.linspace(0.0, np.pi / tau, n)


def analytic_spectrum_full(p, omega_grid):
    """Spectrum of the slow variable of the full model (unit noise spectra)."""
    w = np.asarray(omega_grid, dtype=float)
    c0 = p.a22 / p.eps
    d0 = p.a12 / np.sqrt(p.eps)
    w0sq = (p.a11 * p.a22 - p.a12 * p.a21) / p.eps
    g0 = p.a11 + p.a22 / p.eps
    num = (w**2 + c0**2) * p.sigma_x**2 + d0**2 * p.sigma_y**2
    return num / ((w0sq - w**2) ** 2 + g0**2 * w**2)


def _full_transforms(p, w, xi_x, xi_y):
    iw = 1j * w
    den = (iw - p.a11) * (iw - p.a22 / p.eps) - p.a12 * p.a21 / p.eps
    sy = p.sigma_y / np.sqrt(p.eps)
    xh = ((iw - p.a22 / p.eps) * p.sigma_x * xi_x + p.a12 * sy * xi_y) / den
    yh = ((iw - p.a11) * sy * xi_y + p.a21 / p.eps * p.sigma_x * xi_x) / den
    return xh, yh


def closure_spectrum_limit(p, omega_grid):
    """Spectrum of the infinite-memory closure.

    The closure transform solves
    ``i w X = a11 X + a12 (y/x) X + sigma_x xi_x`` with the ratio ``y/x`` of
    the full-model transforms. ``X`` is linear in the two independent unit
    noises, so its spectrum is the sum of the squared moduli of the two
    channel responses.
    """
    w = np.asarray(omega_grid, dtype=float)

    def X(xi_x, xi_y):
        xh, yh = _full_transforms(p, w, xi_x, xi_y)
        return p.sigma_x * xi_x / (1j * w - p.a11 - p.a12 * yh / xh)

    h_x = X(1.0, 0.0)
    h_y = X(1.0, 1.0) - h_x
    return np.abs(h_x) ** 2 + np.abs(h_y) ** 2


def acv_from_spectrum(spectrum, lags, **quad_kw):
    """``(1/pi) int_0^inf spectrum(w) cos(w l) dw`` by adaptive quadrature.

    ``spectrum`` is a callable of ``w``. The Fourier-weighted rule handles the
    slowly decaying ``1/w^2`` tail that defeats a truncated FFT.
    """
    out = []
    for l in np.atleast_1d(lags):
        l = abs(float(l))
        if l == 0.0:
            val, _ = integrate.quad(spectrum, 0.0, np.inf, limit=400, **quad_kw)
        else:
            val, _ = integrate.quad(spectrum, 0.0, np.inf, weight="cos", wvar=l,
                                    limlst=200, **quad_kw)
        out.append(val / np.pi)
    return np.array(out)


def closure_acv_exact(coef_newest_first, tau, a11, a12, sigma_x, max_lag, substeps=1,
                      offset=0.0):
    """Stationary autocovariance of the discrete linear closure.

    The closure ``x_{t+1} = Euler^substeps(x_t; yhat_t) + noise`` with
    ``yhat_t = offset + sum_n c[n] x_{t-n}`` is a linear autoregression in the
    companion state ``(x_t, ..., x_{t-m})``. Its covariance solves a discrete
    Lyapunov equation, and lag-``k`` covariances follow by powers of the
    companion matrix.

    Returns the autocovariance at lags ``0..max_lag`` (in macro steps).
    """
    c = np.asarray(coef_newest_first, dtype=float)
    m = c.size - 1
    h = tau / substeps
    g = 1.0 + a11 * h
    alpha = g**substeps
    # sum_{j<s} g^j, the accumulated effect of the frozen yhat
    acc = substeps if a11 == 0 else (alpha - 1.0) / (g - 1.0)
    beta = a12 * h * acc
    q = sigma_x**2 * h * np.sum(g ** (2 * np.arange(substeps)))
    F = np.zeros((m + 1, m + 1))
    F[0] = beta * c
    F[0, 0] += alpha
    if m:
        F[1:, :-1] = np.eye(m)
    if np.max(np.abs(np.linalg.eigvals(F))) >= 1.0:
        raise np.linalg.LinAlgError("closure autoregression is not stable")
    Q = np.zeros_like(F)
    Q[0, 0] = q
    P = linalg.solve_discrete_lyapunov(F, Q, method="bilinear" if m > 10 else "direct")
    P = 0.5 * (P + P.T)
    out = np.empty(max_lag + 1)
    v = P[:, 0].copy()
    for k in range(max_lag + 1):
        out[k] = v[0]
        v = F @ v
    return out


def write_spectrum_csv(path, omega, values, name="value"):
    np.savetxt(path, np.column_stack([omega, np.real(values)]), delimiter=",",
               header=f"omega,{name}", comments="", fmt="%.17g")
