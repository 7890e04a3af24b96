"""Orthonormal feature maps on the delay-state space.

Two families are provided:

* :class:`HermiteBasis` -- tensor products of normalized probabilists'
  Hermite polynomials in coordinates whitened by the empirical mean and
  covariance of the training states, i.e. orthonormal under the Gaussian
  weight fitted to the data.
* :class:`PODBasis` -- proper orthogonal decomposition modes of the centered
  training matrix, extended to new points by the Nystrom formula
  ``(z - zbar) V diag(1/sigma)``.

Both expose ``features(Z) -> (M, L)`` which is all the estimators need.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BasisError",
    "HermiteBasis",
    "PODBasis",
    "fit_hermite",
    "hermite_evaluate",
    "hermite_table",
    "total_degree_indices",
    "fit_pod",
    "pod_evaluate",
]


class BasisError(ValueError):
    """Raised on rank or conditioning failures and dimension mismatches."""


def _as_rows(z, n_z):
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z2 = z[None, :] if single else z
    if z2.ndim != 2 or z2.shape[1] != n_z:
        raise BasisError(f"expected points of dimension {n_z}, got shape {z.shape}")
    return z2, single


# --------------------------------------------------------------------------
# Hermite

def hermite_table(u, max_degree):
    """Normalized probabilists' Hermite polynomials ``He_k(u)/sqrt(k!)``.

    Returns an array of shape ``u.shape + (max_degree + 1,)`` built with the
    three-term recurrence ``h_{k+1} = (u h_k - sqrt(k) h_{k-1}) / sqrt(k+1)``.
    """
    u = np.asarray(u, dtype=float)
    out = np.empty(u.shape + (max_degree + 1,))
    out[..., 0] = 1.0
    if max_degree >= 1:
        out[..., 1] = u
    for k in range(1, max_degree):
        out[..., k + 1] = (u * out[..., k] - np.sqrt(k) * out[..., k - 1]) / np.sqrt(k + 1)
    return out


def total_degree_indices(n_z, degree, per_dim_cap=None):
    """All multi-indices with total degree <= ``degree`` and entries <= cap.

    Ordered by total degree, then reverse-lexicographically, so the constant
    index comes first and the linear indices follow in coordinate order.
    """
    cap = degree if per_dim_cap is None else min(per_dim_cap, degree)
    out = []
    for total in range(degree + 1):
        level = [a for a in itertools.product(range(min(cap, total) + 1), repeat=n_z)
                 if sum(a) == total]
        level.sort(reverse=True)
        out.extend(level)
    return np.array(out, dtype=int).reshape(-1, n_z)


@dataclass(frozen=True)
class HermiteBasis:
    """Hermite features under the empirical Gaussian weight.

    Attributes
    ----------
    mu : (n_z,) array
        Empirical mean of the training states.
    W : (n_z, n_z) array
        Symmetric whitening matrix, the inverse square root of the
        empirical covariance.
    multi_indices : (L, n_z) int array
        Polynomial degree per coordinate of each feature; row 0 is zero.
    """

    mu: np.ndarray
    W: np.ndarray
    multi_indices: np.ndarray

    @property
    def n_z(self):
        return self.mu.shape[0]

    @property
    def L(self):
        return self.multi_indices.shape[0]

    n_features = L

    def whiten(self, z):
        z2, _ = _as_rows(z, self.n_z)
        return (z2 - self.mu) @ self.W.T

    def features(self, z):
        return hermite_evaluate(self, z)


def fit_hermite(Z, degree, per_dim_cap=None, floor=1e-10):
    """Fit the Gaussian weight to ``Z`` and enumerate the feature set.

    Parameters
    ----------
    Z : (M, n_z) array
        Training delay states.
    degree : int
        Maximum total polynomial degree.
    per_dim_cap : int, optional
        Maximum degree in any single coordinate.
    floor : float
        Relative eigenvalue floor applied to the covariance before the
        inverse square root.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.shape[0] < 2:
        raise BasisError("need at least two training states")
    if not np.all(np.isfinite(Z)):
        raise BasisError("non-finite training states")
    if degree < 0:
        raise BasisError("degree must be non-negative")
    mu = Z.mean(axis=0)
    C = np.atleast_2d(np.cov(Z, rowvar=False))
    evals, evecs = np.linalg.eigh(C)
    lmax = evals[-1]
    if not np.isfinite(lmax) or lmax <= 0:
        raise BasisError("empirical covariance is singular; cannot whiten")
    evals = np.maximum(evals, floor * lmax)
    W = (evecs / np.sqrt(evals)) @ evecs.T
    W = 0.5 * (W + W.T)
    return HermiteBasis(mu, W, total_degree_indices(Z.shape[1], degree, per_dim_cap))


def hermite_evaluate(b, z):
    """Feature vector(s) of ``b`` at ``z``; shape ``(L,)`` or ``(M, L)``."""
    z2, single = _as_rows(z, b.n_z)
    if not np.all(np.isfinite(z2)):
        raise BasisError("non-finite input to Hermite features")
    u = (z2 - b.mu) @ b.W.T
    alpha = b.multi_indices
    out = np.ones((u.shape[0], alpha.shape[0]))
    for j in range(b.n_z):
        dj = int(alpha[:, j].max())
        if dj == 0:
            continue
        table = hermite_table(u[:, j], dj)
        out *= table[:, alpha[:, j]]
    return out[0] if single else out


# --------------------------------------------------------------------------
# POD

@dataclass(frozen=True)
class PODBasis:
    """POD modes of the centered training states.

    The Nystrom features at ``z`` are ``(z - z_bar) V / sigma``; on the
    training rows these are the columns of the orthonormal left singular
    matrix ``U``.  With ``include_constant`` the estimator features are
    prefixed by the constant ``1/sqrt(N_train)``, which is orthogonal to
    every mode on the training rows.
    """

    z_bar: np.ndarray
    V: np.ndarray
    sigma: np.ndarray
    N_train: int
    include_constant: bool = True

    @property
    def n_z(self):
        return self.z_bar.shape[0]

    @property
    def L(self):
        return self.sigma.shape[0]

    @property
    def n_features(self):
        return self.L + int(self.include_constant)

    def features(self, z):
        modes = pod_evaluate(self, z)
        if not self.include_constant:
            return modes
        c = 1.0 / np.sqrt(self.N_train)
        if modes.ndim == 1:
            return np.concatenate([[c], modes])
        return np.hstack([np.full((modes.shape[0], 1), c), modes])

    def projection(self):
        """``V / sigma`` so that the modes are ``(z - z_bar) @ projection()``."""
        return self.V / self.sigma


def fit_pod(Z, L=None, energy=None, include_constant=True, rank_tol=1e-12):
    """SVD of the centered training matrix.

    Parameters
    ----------
    Z : (M, n_z) array
    L : int, optional
        Number of retained modes. Mutually exclusive with ``energy``.
    energy : float in (0, 1], optional
        Keep the fewest modes whose squared singular values capture this
        fraction of the total.
    include_constant : bool
        Prefix the constant feature in :meth:`PODBasis.features`.

    Without ``L`` or ``energy`` all modes above ``rank_tol * sigma_1`` are
    kept. Columns of ``V`` are signed so that their largest-magnitude entry
    is positive.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    M = Z.shape[0]
    if M < 2:
        raise BasisError("need at least two training states")
    if L is not None and energy is not None:
        raise BasisError("give either L or energy, not both")
    z_bar = Z.mean(axis=0)
    _, s, Vt = np.linalg.svd(Z - z_bar, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        raise BasisError("centered training matrix is zero")
    rank = int(np.sum(s > rank_tol * s[0]))
    if L is None and energy is None:
        L = rank
    elif energy is not None:
        if not 0 < energy <= 1:
            raise BasisError("energy fraction must lie in (0, 1]")
        frac = np.cumsum(s**2) / np.sum(s**2)
        L = min(int(np.searchsorted(frac, energy - 1e-15) + 1), rank)
    L = int(L)
    if L < 1:
        raise BasisError("need at least one mode")
    if L > rank:
        raise BasisError(f"requested {L} modes but the centered data has numerical rank {rank}")
    V = Vt[:L].T.copy()
    pivot = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[pivot, np.arange(L)])
    V *= signs
    return PODBasis(z_bar, V, s[:L].copy(), M, include_constant)


def pod_evaluate(b, z_new):
    """Nystrom extension ``(z_new - z_bar) V diag(1/sigma)``."""
    z2, single = _as_rows(z_new, b.n_z)
    out = (z2 - b.z_bar) @ b.projection()
    return out[0] if single else out
