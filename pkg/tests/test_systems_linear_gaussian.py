import numpy as np
import pytest
from scipy import linalg

from rkhs_closure.systems import linear_gaussian as lg


def test_paper_params_accepted_and_validation():
    p = lg.PAPER_PARAMS(0.1)
    assert (p.a11, p.a12, p.a21, p.a22) == (-1, 1, -1, -1)
    assert p.sigma_x == pytest.approx(np.sqrt(2)) and p.sigma_y == pytest.approx(np.sqrt(2))
    with pytest.raises(ValueError):
        lg.LinearGaussianParams(-1, 1, -1, 1, 1, 1, 1)     # a22 > 0
    with pytest.raises(ValueError):
        lg.LinearGaussianParams(1, 1, -1, -1, 1, 1, 1)     # a~ = 0
    with pytest.raises(ValueError):
        lg.LinearGaussianParams(-1, 1, -1, -1, 0, 1, 1)


def test_lyapunov_identity_at_eps1():
    # A = [[-1, 1], [-1, -1]], Q = 2I: s11 = s22 = 1, s12 = 0 by hand
    np.testing.assert_allclose(lg.lyapunov_equilibrium_cov(lg.PAPER_PARAMS(1.0)), np.eye(2), atol=1e-14)


@pytest.mark.parametrize("eps", [0.005, 0.1, 1.0, 1.3, 7.0])
def test_lyapunov_residual(eps):
    p = lg.PAPER_PARAMS(eps)
    S = lg.lyapunov_equilibrium_cov(p)
    A = lg.drift_matrix(p)
    R = A @ S + S @ A.T + lg.noise_covariance(p)
    assert np.abs(R).max() <= 1e-12 * max(1, np.abs(lg.noise_covariance(p)).max())
    np.testing.assert_array_equal(S, S.T)
    assert np.linalg.eigvalsh(S).min() > 0


def test_lyapunov_vanishing_noise():
    p = lg.LinearGaussianParams(-1, 1, -1, -1, 0.5, 1e-8, 1e-8)
    assert np.abs(lg.lyapunov_equilibrium_cov(p)).max() < 1e-15


def test_conditional_slope_small_eps():
    slope, _ = lg.conditional_law(lg.PAPER_PARAMS(0.01))
    # -a21/a22 = -1 up to O(eps)
    assert abs(slope + 1) < 5 * 0.01


def test_averaged_coefficient_and_fast_density():
    p = lg.PAPER_PARAMS(0.5)
    assert lg.averaged_coefficient(p) == -2.0
    q = lg.LinearGaussianParams(-0.7, 0.0, -1, -1, 0.5, 1, 1)
    assert lg.averaged_coefficient(q) == -0.7
    mean, var = lg.fast_invariant_density(p, np.array([0.3, -2.0]))
    np.testing.assert_allclose(mean, [-0.3, 2.0])
    assert var == pytest.approx(1.0)


def test_markov_coefficient_converges_at_order_eps():
    eps = np.array([0.1, 0.05, 0.025])
    gap = [abs(lg.rkhs_markov_coefficient(lg.PAPER_PARAMS(e)) - lg.averaged_coefficient(lg.PAPER_PARAMS(e)))
           for e in eps]
    # for PAPER_PARAMS the gap is exactly 4 eps / (1 + 3 eps)
    np.testing.assert_allclose(gap, 4 * eps / (1 + 3 * eps), rtol=1e-12)
    slope = np.polyfit(np.log(eps), np.log(gap), 1)[0]
    assert 0.8 < slope < 1.2


def test_acv_properties():
    p = lg.PAPER_PARAMS(1.0)
    lags = np.linspace(0, 5, 51)
    acv = lg.analytic_acv_linear(p, lags)
    assert acv[0] == pytest.approx(lg.lyapunov_equilibrium_cov(p)[0, 0])
    assert np.all(np.abs(acv) <= acv[0] + 1e-15)
    # independent oracle: expm via eigen-decomposition of A
    A = lg.drift_matrix(p)
    w, V = np.linalg.eig(A)
    E = (V * np.exp(w * 0.7)) @ np.linalg.inv(V)
    assert lg.analytic_acv_linear(p, [0.7])[0] == pytest.approx((E.real @ np.eye(2))[0, 0], abs=1e-13)


def test_deterministic_decay_matches_expm():
    p = lg.LinearGaussianParams(-1, 1, -1, -1, 0.5, 1.0, 1.0)
    dt, n = 1e-3, 1000
    z = np.zeros((n, 1))
    xs, ys = lg.euler_maruyama_paths(p, [1.0], [0.5], dt, z, z)
    exact = linalg.expm(lg.drift_matrix(p) * n * dt) @ np.array([1.0, 0.5])
    err = abs(xs[-1, 0] - exact[0])
    assert err < 5 * dt


def test_lfilter_path_matches_loop(rng):
    p = lg.PAPER_PARAMS(0.05)
    xi = rng.standard_normal((2, 400, 3))
    xs, ys = lg.euler_maruyama_paths(p, [0.1, 0.2, 0.3], [0.0, 1.0, -1.0], 1e-3, xi[0], xi[1], record_every=4)
    Mk = np.eye(2) + 1e-3 * lg.drift_matrix(p)
    D = np.sqrt(1e-3) * np.array([p.sigma_x, p.sigma_y / np.sqrt(p.eps)])
    v = np.array([[0.1, 0.2, 0.3], [0.0, 1.0, -1.0]])
    for k in range(400):
        v = Mk @ v + D[:, None] * xi[:, k]
    np.testing.assert_allclose(xs[-1], v[0], atol=1e-12)
    np.testing.assert_allclose(ys[-1], v[1], atol=1e-12)
    assert xs.shape == (101, 3)


def test_dt_guard():
    with pytest.raises(ValueError):
        lg.simulate_linear_gaussian(lg.PAPER_PARAMS(0.005), 1, dt=1e-3)


@pytest.mark.slow
def test_long_run_covariance_and_lag1():
    p = lg.PAPER_PARAMS(1.0)
    ds = lg.simulate_linear_gaussian(p, 10_000, rng=42)
    C = np.cov(np.column_stack([ds.x[:, 0], ds.y[:, 0]]), rowvar=False)
    S = lg.lyapunov_equilibrium_cov(p)
    assert np.abs(C - S).max() < 0.05 * np.abs(S).max()
    # lag-1 ACV with a batch-means standard error
    x = ds.x[:, 0] - ds.x[:, 0].mean()
    lag = 100
    prods = x[lag:] * x[:-lag]
    batches = prods[: len(prods) // 100 * 100].reshape(100, -1).mean(axis=1)
    se = batches.std(ddof=1) / np.sqrt(100)
    assert abs(prods.mean() - lg.analytic_acv_linear(p, [1.0])[0]) < 3 * se


def test_averaged_model_drift():
    p = lg.PAPER_PARAMS(0.5)
    cm = lg.averaged_model(p)
    x = np.array([[0.7]])
    yhat = cm.estimator.predict_buffers(x[:, None, :], np.zeros((1, 0, 1)))
    assert cm.known_drift(x, yhat)[0, 0] == pytest.approx(-2.0 * 0.7)
