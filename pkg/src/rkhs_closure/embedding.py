"""Kernel-embedding estimators of conditional statistics.

With an orthonormal feature map ``phi`` on the delay-state space, the
conditional expectation of any target ``g(Y)`` given ``z`` is

    E[g(Y) | z] = sum_l A_l phi_l(z),
    A = (1/M) G^T Phi (C_ZZ + lam I)^{-1},   C_ZZ = Phi^T Phi / M,

where ``Phi`` holds the features of the ``M`` training states and ``G`` the
training targets. Because the coefficients only involve the training
targets linearly, the contraction weights ``Phi (C_ZZ + lam I)^{-1} / M``
can be stored once and reused for state-dependent drifts ``a(x, y_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import HermiteBasis, PODBasis, fit_hermite

__all__ = [
    "EmbeddingError",
    "ConditionalExpectationModel",
    "ConditionalDensityModel",
    "fit_conditional_expectation",
    "predict",
    "predict_general_drift",
    "conditional_second_moment",
    "fit_conditional_density",
    "density_evaluate",
    "default_lambda",
    "psd_sqrt",
]

_MAX_STORED_WEIGHTS = 10_000_000
_COND_LIMIT = 1e13


class EmbeddingError(ValueError):
    """Raised for ill-conditioned fits and invalid estimator inputs."""


def default_lambda(basis):
    """Regularization used when none is given: 1e-8 for Hermite, 0 for POD."""
    return 0.0 if isinstance(basis, PODBasis) else 1e-8


def _regularized_inverse_apply(C, lam, rhs):
    """Solve ``(C + lam I) X = rhs`` after a conditioning check."""
    K = C + lam * np.eye(C.shape[0])
    cond = np.linalg.cond(K)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise EmbeddingError(
            f"C_ZZ + lambda*I is numerically singular (cond={cond:.3g}); "
            f"increase lambda (currently {lam:g}) or reduce the basis size")
    return np.linalg.solve(K, rhs)


@dataclass(frozen=True)
class ConditionalExpectationModel:
    """Fitted estimator of ``E[g(Y) | z]``.

    Attributes
    ----------
    basis : HermiteBasis or PODBasis
    A : (n_g, L) array
        Expansion coefficients of each target component.
    lam : float
    C_ZZ : (L, L) array
        Empirical second moments of the training features.
    residual_cov : (n_g, n_g) array
        Covariance of the training residuals ``G - Phi A^T``.
    weights : (M, L) array or None
        ``Phi (C_ZZ + lam I)^{-1} / M``; contracting it with per-sample
        values ``a(x, y_i)`` gives the coefficients of that drift.
    """

    basis: object
    A: np.ndarray
    lam: float
    C_ZZ: np.ndarray
    residual_cov: np.ndarray
    weights: np.ndarray | None = None
    _linear: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if isinstance(self.basis, PODBasis) and self._linear is None:
            # collapse features and coefficients into one affine map
            P = self.basis.projection()
            if self.basis.include_constant:
                offset = self.A[:, 0] / np.sqrt(self.basis.N_train)
                lin = P @ self.A[:, 1:].T
            else:
                offset = np.zeros(self.A.shape[0])
                lin = P @ self.A.T
            object.__setattr__(self, "_linear", (offset, self.basis.z_bar, lin))

    @property
    def n_z(self):
        return self.basis.n_z

    @property
    def n_g(self):
        return self.A.shape[0]

    def predict(self, z):
        return predict(self, z)


def fit_conditional_expectation(dm, basis, lam=None, store_weights=None):
    """Estimate the expansion coefficients of ``E[G | Z]``.

    Parameters
    ----------
    dm : DesignMatrices
        Training delay states and targets.
    basis : HermiteBasis or PODBasis
        Fitted on the same ``Z`` rows.
    lam : float, optional
        Ridge parameter added to ``C_ZZ``; defaults per :func:`default_lambda`.
    store_weights : bool, optional
        Keep the ``M x L`` contraction weights needed by
        :func:`predict_general_drift`. Defaults to storing them unless they
        exceed ten million entries.
    """
    if lam is None:
        lam = default_lambda(basis)
    if lam < 0:
        raise EmbeddingError("lambda must be non-negative")
    Z = np.asarray(dm.Z, dtype=float)
    G = np.asarray(dm.G, dtype=float)
    if Z.shape[1] != basis.n_z:
        raise EmbeddingError(f"basis expects n_z={basis.n_z}, design has {Z.shape[1]} columns")
    M = Z.shape[0]
    Phi = basis.features(Z)
    C = Phi.T @ Phi / M
    C = 0.5 * (C + C.T)
    # (C + lam I)^{-1} Phi^T / M, transposed, gives the per-sample weights
    Winv = _regularized_inverse_apply(C, lam, Phi.T).T / M
    A = G.T @ Winv
    resid = G - Phi @ A.T
    if M > 1:
        rc = np.atleast_2d(np.cov(resid, rowvar=False))
    else:
        rc = np.zeros((G.shape[1], G.shape[1]))
    if store_weights is None:
        store_weights = Winv.size <= _MAX_STORED_WEIGHTS
    return ConditionalExpectationModel(basis, A, float(lam), C, 0.5 * (rc + rc.T),
                                       Winv if store_weights else None)


def predict(model, z_new):
    """``A phi(z_new)``; ``z_new`` of shape ``(n_z,)`` or ``(B, n_z)``."""
    if model._linear is not None:
        offset, z_bar, lin = model._linear
        z = np.asarray(z_new, dtype=float)
        if z.shape[-1] != z_bar.shape[0]:
            raise EmbeddingError(f"expected dimension {z_bar.shape[0]}, got {z.shape}")
        out = offset + (z - z_bar) @ lin
    else:
        out = model.basis.features(z_new) @ model.A.T
    if not np.all(np.isfinite(out)):
        raise EmbeddingError("non-finite prediction")
    return out


def _require_weights(model):
    if model.weights is None:
        raise EmbeddingError("model was fitted without stored weights (store_weights=False)")
    return model.weights


def predict_general_drift(model, drift_sampler, x_hat, z_new, training_y_rows):
    """Conditional expectation of a state-dependent drift ``a(x_hat, Y)``.

    ``drift_sampler(x_hat, Y)`` receives all training targets ``Y`` (shape
    ``(M, n_y)``) and returns per-sample values of shape ``(M,)`` or
    ``(M, k)``. The coefficients ``A_l(x_hat)`` are the contraction of those
    values with the stored weights.
    """
    W = _require_weights(model)
    vals = np.asarray(drift_sampler(x_hat, training_y_rows), dtype=float)
    if vals.shape[0] != W.shape[0]:
        raise EmbeddingError(f"sampler returned {vals.shape[0]} rows, expected {W.shape[0]}")
    if not np.all(np.isfinite(vals)):
        raise EmbeddingError("drift sampler returned non-finite values")
    scalar = vals.ndim == 1
    vals2 = vals[:, None] if scalar else vals.reshape(vals.shape[0], -1)
    coeffs = vals2.T @ W
    out = model.basis.features(z_new) @ coeffs.T
    if scalar:
        out = out[..., 0]
    return out


def psd_sqrt(B):
    """Symmetric square root of ``B`` after clipping negative eigenvalues."""
    B = 0.5 * (B + np.swapaxes(B, -1, -2))
    w, V = np.linalg.eigh(B)
    w = np.clip(w, 0.0, None)
    R = (V * np.sqrt(w)[..., None, :]) @ np.swapaxes(V, -1, -2)
    return 0.5 * (R + np.swapaxes(R, -1, -2))


def conditional_second_moment(model, z_new, b_sampler, x_hat, training_y_rows):
    """Estimate ``E[b b^T | z]`` from per-sample diffusion matrices.

    ``b_sampler(x_hat, Y)`` returns ``(M, n_x, n_w)`` diffusion matrices.
    The regression output is symmetrized and its negative eigenvalues are
    clipped at zero.
    """
    W = _require_weights(model)
    b = np.asarray(b_sampler(x_hat, training_y_rows), dtype=float)
    if b.ndim == 2:
        b = b[:, :, None]
    if not np.all(np.isfinite(b)):
        raise EmbeddingError("diffusion sampler returned non-finite values")
    M, n_x, _ = b.shape
    bbT = np.einsum("mij,mkj->mik", b, b).reshape(M, n_x * n_x)
    coeffs = bbT.T @ W
    phi = model.basis.features(z_new)
    raw = (phi @ coeffs.T).reshape(phi.shape[:-1] + (n_x, n_x))
    raw = 0.5 * (raw + np.swapaxes(raw, -1, -2))
    w, V = np.linalg.eigh(raw)
    if np.all(w >= 0):
        return raw
    w = np.clip(w, 0.0, None)
    out = (V * w[..., None, :]) @ np.swapaxes(V, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


# --------------------------------------------------------------------------
# conditional density (diagnostic)

@dataclass(frozen=True)
class ConditionalDensityModel:
    """Truncated series ``p(y|z) = q(y) psi(y)^T coeff phi(z)``.

    ``q`` is the Gaussian fitted to the training targets and ``psi`` the
    Hermite features orthonormal under it.
    """

    y_basis: HermiteBasis
    z_basis: object
    coeff: np.ndarray
    lam: float

    def weight(self, y):
        """Gaussian density ``q`` at ``y``."""
        v = self.y_basis.whiten(y)
        n = v.shape[1]
        det = abs(np.linalg.det(self.y_basis.W))
        return det * np.exp(-0.5 * np.sum(v**2, axis=1)) / (2 * np.pi) ** (n / 2)

    def coefficients(self, z):
        """Coefficients ``E[psi_k(Y) | z]`` of the series at ``z``."""
        return self.z_basis.features(z) @ self.coeff.T


def fit_conditional_density(dm, y_degree, z_basis, lam=None):
    """Fit ``C_YZ (C_ZZ + lam I)^{-1}`` with Hermite features on the targets."""
    if lam is None:
        lam = default_lambda(z_basis)
    G = np.asarray(dm.G, dtype=float)
    Z = np.asarray(dm.Z, dtype=float)
    M = G.shape[0]
    y_basis = fit_hermite(G, y_degree)
    if y_basis.L > M:
        raise EmbeddingError(f"{y_basis.L} target features exceed the {M} training samples")
    Psi = y_basis.features(G)
    Phi = z_basis.features(Z)
    C_YZ = Psi.T @ Phi / M
    C_ZZ = Phi.T @ Phi / M
    C_ZZ = 0.5 * (C_ZZ + C_ZZ.T)
    coeff = _regularized_inverse_apply(C_ZZ, lam, C_YZ.T).T
    return ConditionalDensityModel(y_basis, z_basis, coeff, float(lam))


def density_evaluate(model, y, z):
    """Evaluate the truncated conditional density at ``y`` given one ``z``.

    The truncated series may dip below zero; values are returned unclipped.
    ``y`` may be a single point or an array of points.
    """
    y = np.asarray(y, dtype=float)
    n_y = model.y_basis.n_z
    ys = y.reshape(-1, n_y)
    c = model.coefficients(np.asarray(z, dtype=float))
    if c.ndim != 1:
        raise EmbeddingError("density_evaluate takes a single conditioning state")
    vals = model.weight(ys) * (model.y_basis.features(ys) @ c)
    if y.ndim == 0 or (y.ndim == 1 and n_y > 1 and y.shape[0] == n_y):
        return float(vals[0])
    return vals
