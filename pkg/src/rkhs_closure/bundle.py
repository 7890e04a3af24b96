"""Directory bundles for fitted delay estimators.

A bundle is a directory with ``bundle.json`` (metadata, format version and
file references) and one CSV per matrix, written with 17 significant digits
so a reloaded model predicts bit-identically. Contraction weights are not
stored; reloaded models support :func:`~rkhs_closure.embedding.predict`
but not the general-drift paths.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .basis import HermiteBasis, PODBasis
from .closure import DelayComponent, DelayEstimator
from .data import DelayConfig
from .embedding import ConditionalExpectationModel

__all__ = ["BUNDLE_FORMAT", "BUNDLE_VERSION", "BundleError", "save_bundle", "load_bundle"]

BUNDLE_FORMAT = "rkhs-closure-bundle"
BUNDLE_VERSION = 1


class BundleError(IOError):
    pass


def _save(root, name, arr):
    arr = np.atleast_1d(np.asarray(arr))
    fmt = "%d" if np.issubdtype(arr.dtype, np.integer) else "%.17g"
    np.savetxt(root / name, arr.reshape(arr.shape[0], -1), delimiter=",", fmt=fmt)
    return {"file": name, "shape": list(arr.shape)}


def _load(root, ref, dtype=float):
    path = root / ref["file"]
    try:
        arr = np.loadtxt(path, delimiter=",", dtype=dtype, ndmin=2)
    except OSError as err:
        raise BundleError(f"cannot read bundle matrix {path}: {err}") from err
    shape = tuple(ref["shape"])
    if arr.size != int(np.prod(shape)):
        raise BundleError(f"{path}: expected shape {shape}, found {arr.size} entries")
    return arr.reshape(shape)


def _basis_meta(root, prefix, b):
    if isinstance(b, HermiteBasis):
        return {"kind": "hermite",
                "mu": _save(root, f"{prefix}_mu.csv", b.mu),
                "W": _save(root, f"{prefix}_W.csv", b.W),
                "multi_indices": _save(root, f"{prefix}_multi_indices.csv", b.multi_indices)}
    if isinstance(b, PODBasis):
        return {"kind": "pod", "N_train": int(b.N_train),
                "include_constant": bool(b.include_constant),
                "z_bar": _save(root, f"{prefix}_z_bar.csv", b.z_bar),
                "V": _save(root, f"{prefix}_V.csv", b.V),
                "sigma": _save(root, f"{prefix}_sigma.csv", b.sigma)}
    raise BundleError(f"cannot serialize basis of type {type(b).__name__}")


def _basis_from_meta(root, meta):
    if meta["kind"] == "hermite":
        return HermiteBasis(_load(root, meta["mu"]), _load(root, meta["W"]),
                            _load(root, meta["multi_indices"], dtype=int))
    if meta["kind"] == "pod":
        return PODBasis(_load(root, meta["z_bar"]), _load(root, meta["V"]),
                        _load(root, meta["sigma"]), int(meta["N_train"]),
                        bool(meta["include_constant"]))
    raise BundleError(f"unknown basis kind {meta['kind']!r}")


def save_bundle(estimator, path, extra=None):
    """Write ``estimator`` to directory ``path`` (created if needed).

    ``extra`` is a JSON-serializable dict stored verbatim (e.g. the system
    parameters and closure settings used by the CLI).
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    comps = []
    for i, comp in enumerate(estimator.components):
        model = comp.model
        if not isinstance(model, ConditionalExpectationModel):
            raise BundleError("only fitted conditional-expectation components can be saved")
        p = f"c{i}"
        comps.append({
            "x_cols": list(comp.x_cols), "y_cols": list(comp.y_cols),
            "target_cols": list(comp.target_cols),
            "lambda": model.lam,
            "basis": _basis_meta(root, p, model.basis),
            "A": _save(root, f"{p}_A.csv", model.A),
            "C_ZZ": _save(root, f"{p}_C_ZZ.csv", model.C_ZZ),
            "C_ZZ_diag": [float(v) for v in np.diag(model.C_ZZ)[:20]],
            "residual_cov": _save(root, f"{p}_residual_cov.csv", model.residual_cov),
        })
    meta = {"format": BUNDLE_FORMAT, "version": BUNDLE_VERSION,
            "delay": {"m": estimator.delay.m, "n": estimator.delay.n},
            "n_x": estimator.n_x, "n_y": estimator.n_y,
            "components": comps, "extra": extra or {}}
    (root / "bundle.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return root


def load_bundle(path):
    """Read a bundle; returns ``(estimator, extra)``."""
    root = Path(path)
    try:
        meta = json.loads((root / "bundle.json").read_text())
    except OSError as err:
        raise BundleError(f"cannot read {root / 'bundle.json'}: {err}") from err
    except json.JSONDecodeError as err:
        raise BundleError(f"malformed bundle.json: {err}") from err
    if meta.get("format") != BUNDLE_FORMAT:
        raise BundleError(f"{root} is not a model bundle")
    if meta.get("version") != BUNDLE_VERSION:
        raise BundleError(f"unsupported bundle version {meta.get('version')}")
    comps = []
    for c in meta["components"]:
        basis = _basis_from_meta(root, c["basis"])
        A = _load(root, c["A"])
        model = ConditionalExpectationModel(basis, A, float(c["lambda"]),
                                            _load(root, c["C_ZZ"]),
                                            _load(root, c["residual_cov"]))
        comps.append(DelayComponent(model, tuple(c["x_cols"]), tuple(c["y_cols"]),
                                    tuple(c["target_cols"])))
    delay = DelayConfig(meta["delay"]["m"], meta["delay"]["n"])
    return DelayEstimator(delay, meta["n_x"], meta["n_y"], tuple(comps)), meta["extra"]
