import json

import numpy as np
import pytest

from rkhs_closure.bundle import BUNDLE_FORMAT, BundleError, load_bundle, save_bundle
from rkhs_closure.closure import BasisSpec, fit_delay_estimator, linear_estimator
from rkhs_closure.data import DelayConfig, TimeSeriesDataset


@pytest.fixture
def ds(rng):
    x = rng.standard_normal((300, 2))
    y = np.column_stack([np.sin(x[:, 0]), x[:, 1] ** 2]) + 0.1 * rng.standard_normal((300, 2))
    return TimeSeriesDataset(0.1, x, y)


@pytest.mark.parametrize("basis", [BasisSpec("hermite", 3), BasisSpec("pod")])
def test_round_trip_predicts_identically(tmp_path, ds, basis):
    comps = [((0,), (0,), (0,)), ((0, 1), (1,), (1,))]
    est = fit_delay_estimator(ds, DelayConfig(2, 1), basis, None, comps)
    save_bundle(est, tmp_path / "b", {"note": "x"})
    back, extra = load_bundle(tmp_path / "b")
    assert extra == {"note": "x"}
    rng = np.random.default_rng(0)
    xh = rng.standard_normal((5, 3, 2))
    yh = rng.standard_normal((5, 1, 2))
    np.testing.assert_array_equal(back.predict_buffers(xh, yh), est.predict_buffers(xh, yh))
    np.testing.assert_array_equal(back.residual_cov, est.residual_cov)
    meta = json.loads((tmp_path / "b" / "bundle.json").read_text())
    assert meta["format"] == BUNDLE_FORMAT and meta["version"] == 1
    assert len(meta["components"][0]["C_ZZ_diag"]) <= 20


def test_bad_bundles(tmp_path, ds):
    with pytest.raises(BundleError):
        load_bundle(tmp_path / "missing")
    (tmp_path / "j").mkdir()
    (tmp_path / "j" / "bundle.json").write_text("{not json")
    with pytest.raises(BundleError):
        load_bundle(tmp_path / "j")
    est = fit_delay_estimator(ds, DelayConfig(0, 0))
    save_bundle(est, tmp_path / "v")
    meta = json.loads((tmp_path / "v" / "bundle.json").read_text())
    meta["version"] = 99
    (tmp_path / "v" / "bundle.json").write_text(json.dumps(meta))
    with pytest.raises(BundleError):
        load_bundle(tmp_path / "v")
    with pytest.raises(BundleError):
        save_bundle(linear_estimator([[1.0]], DelayConfig(0, 0)), tmp_path / "lin")
