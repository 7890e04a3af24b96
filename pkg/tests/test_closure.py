import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rkhs_closure.closure import (BasisSpec, ClosureModel, ClosureState, DelayComponent,
                                  DelayEstimator, DivergenceError, ensemble_simulate,
                                  fit_delay_estimator, linear_estimator, seed_state,
                                  simulate, step)
from rkhs_closure.data import DelayConfig, TimeSeriesDataset
from rkhs_closure.systems import linear_gaussian as lg


class CountingModel:
    """Linear predictor that logs every delay state it is asked about."""

    def __init__(self, n_z, coef=0.5):
        self.n_z = n_z
        self.coef = coef
        self.calls = []
        self.residual_cov = np.zeros((1, 1))

    def predict(self, z):
        self.calls.append(np.array(z))
        return self.coef * z.sum(axis=1, keepdims=True) + len(self.calls)


def counting_estimator(m, n):
    cfg = DelayConfig(m, n)
    model = CountingModel(cfg.n_z(1, 1))
    return DelayEstimator(cfg, 1, 1, (DelayComponent(model, (0,), (0,), (0,)),)), model


def state_1d(x_hist, y_hist):
    return ClosureState(np.asarray(x_hist, float).reshape(1, -1, 1),
                        np.asarray(y_hist, float).reshape(1, -1, 1))


def test_seed_state_examples(tiny_ds):
    s = seed_state(tiny_ds, 0, DelayConfig(0, 0))
    assert s.x_hist.shape == (1, 1, 1) and s.x == 1.0
    assert s.y_hist.shape == (1, 0, 1)
    s = seed_state(tiny_ds, 2, DelayConfig(1, 1))
    np.testing.assert_array_equal(s.x_hist[0, :, 0], [2, 3])
    np.testing.assert_array_equal(s.y_hist[0, :, 0], [20])
    with pytest.raises(IndexError):
        seed_state(tiny_ds, 0, DelayConfig(1, 1))
    with pytest.raises(IndexError):
        seed_state(tiny_ds, 5, DelayConfig(0, 0))
    s = seed_state(tiny_ds, [2, 3], DelayConfig(1, 1))
    assert s.batched and s.x_hist.shape == (2, 2, 1)


@pytest.mark.parametrize("scheme", ["euler", "rk4"])
def test_identity_dynamics(scheme):
    est, _ = counting_estimator(2, 2)
    model = ClosureModel(lambda x, y: np.zeros_like(x), est, 0.1, 3, scheme=scheme)
    s0 = state_1d([1, 2, 3], [7, 8])
    traj = simulate(model, s0, 5, rng=0)
    np.testing.assert_array_equal(traj.x, 3.0)
    np.testing.assert_array_equal(traj.final_state.x_hist[0, :, 0], [3, 3, 3])


@given(substeps=st.integers(1, 6), n_steps=st.integers(1, 8))
def test_frozen_yhat_and_buffer_discipline(substeps, n_steps):
    m, n = 2, 3
    est, model = counting_estimator(m, n)
    seen = []

    def drift(x, y):
        seen.append(float(y[0, 0]))
        return -x + 0.1 * y

    cm = ClosureModel(drift, est, 0.05, substeps, scheme="euler")
    state = state_1d([0.1, 0.2, 0.3], [1.0, 2.0, 3.0])
    emitted, xs = [], [0.3]
    for t in range(n_steps):
        state, x1, yhat = step(cm, state, rng=0)
        emitted.append(float(yhat[0]))
        xs.append(float(x1[0]))
        assert len(model.calls) == t + 1
        # the drift saw the same yhat at every substep of this macro step
        assert seen[-substeps:] == [emitted[-1]] * substeps
        ylog = [1.0, 2.0, 3.0] + emitted
        np.testing.assert_array_equal(state.y_hist[0, :, 0], ylog[-n:])
        np.testing.assert_array_equal(state.x_hist[0, :, 0], ([0.1, 0.2] + xs)[-(m + 1):])
        # the queried delay state was the pre-step buffers
        z = model.calls[-1][0]
        np.testing.assert_array_equal(z, list(([0.1, 0.2] + xs)[-(m + 2):-1]) + ylog[-n - 1:-1])


def test_substep_refinement_is_first_order():
    est = linear_estimator([[0.3]], DelayConfig(0, 0))
    x0 = state_1d([1.0], [])
    outs = []
    for s in (10, 20, 40, 80):
        cm = ClosureModel(lambda x, y: -2.0 * x + y, est, 0.5, s, scheme="euler")
        outs.append(step(cm, x0)[1][0])
    diffs = np.abs(np.diff(outs))
    np.testing.assert_allclose(diffs[1:] / diffs[:-1], 0.5, rtol=0.05)


@pytest.mark.parametrize("sub", [1, 4])
def test_m0_plugin_matches_euler_maruyama(sub):
    p = lg.PAPER_PARAMS(0.3)
    slope, _ = lg.conditional_law(p)
    est = linear_estimator([[slope]], DelayConfig(0, 0))
    tau = 0.01
    cm = ClosureModel(lambda x, y: p.a11 * x + p.a12 * y, est, tau, sub, diffusion=[[p.sigma_x]])
    xi = np.random.default_rng(3).standard_normal((sub, 1, 1))
    x0 = 0.8
    _, x1, _ = step(cm, state_1d([x0], []), xi=xi)
    h = tau / sub
    if sub == 1:
        # one Euler-Maruyama step of dx = (a11 + a12 s21/s11) x dt + sigma_x dW
        x = x0 + tau * (p.a11 + p.a12 * slope) * x0 + p.sigma_x * np.sqrt(tau) * xi[0, 0, 0]
    else:
        # substeps hold yhat at its macro-step value
        x, y = x0, slope * x0
        for j in range(sub):
            x = x + h * (p.a11 * x + p.a12 * y) + p.sigma_x * np.sqrt(h) * xi[j, 0, 0]
    assert x1[0] == pytest.approx(x, abs=1e-12)


def test_noise_scaling_total_variance():
    # increments over one time unit: (tau, substeps) = (0.1, 5) vs (0.2, 10)
    est = linear_estimator([[0.0]], DelayConfig(0, 0))
    B = 20000
    totals = []
    for tau, sub in ((0.1, 5), (0.2, 10)):
        cm = ClosureModel(lambda x, y: np.zeros_like(x), est, tau, sub, diffusion=[[1.0]])
        s0 = ClosureState(np.zeros((B, 1, 1)), np.zeros((B, 0, 1)), batched=True)
        traj = simulate(cm, s0, int(round(1.0 / tau)), rng=11)
        totals.append(traj.x[-1, :, 0])
    v1, v2 = (np.var(t) for t in totals)
    se = np.sqrt(2 / B)
    assert abs(v1 - 1.0) < 4 * se and abs(v2 - 1.0) < 4 * se
    # the variance F-test statistic stays inside the 99.9% band
    assert abs(np.log(v1 / v2)) < 3.3 * np.sqrt(4 / B)


def test_residual_noise_added_once_per_macro_step():
    est = linear_estimator([[0.0]], DelayConfig(0, 0), residual_cov=[[4.0]])
    cm = ClosureModel(lambda x, y: np.zeros_like(x), est, 0.1, 7, residual_noise=[[4.0]])
    eta = np.array([[0.25]])
    _, _, yhat = step(cm, state_1d([0.0], []), eta=eta)
    assert yhat[0] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        ClosureModel(lambda x, y: x, est, 0.1, residual_noise=[[-1.0]])
    with pytest.raises(ValueError):
        ClosureModel(lambda x, y: x, est, 0.1, substeps=0)
    with pytest.raises(ValueError):
        ClosureModel(lambda x, y: x, est, 0.1, diffusion=[[1.0]], scheme="rk4")


def test_scheme_selection():
    est = linear_estimator([[0.0]], DelayConfig(0, 0))
    assert ClosureModel(lambda x, y: x, est, 0.1).integrator == "rk4"
    assert ClosureModel(lambda x, y: x, est, 0.1, diffusion=[[1.0]]).integrator == "euler"


def test_rk4_inner_scheme_exactish():
    est = linear_estimator([[0.0]], DelayConfig(0, 0))
    cm = ClosureModel(lambda x, y: -x, est, 0.1, 10)
    traj = simulate(cm, state_1d([1.0], []), 10)
    assert traj.x[-1] == pytest.approx(np.exp(-1.0), abs=1e-9)


def test_determinism_and_seed_sensitivity():
    p = lg.PAPER_PARAMS(1.0)
    cm = lg.averaged_model(p, substeps=2)
    s0 = state_1d([0.5], [])
    a = simulate(cm, s0, 50, rng=5).x
    b = simulate(cm, s0, 50, rng=5).x
    c = simulate(cm, s0, 50, rng=6).x
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_divergence_carries_state():
    est = linear_estimator([[0.0]], DelayConfig(0, 0))
    cm = ClosureModel(lambda x, y: 50.0 * x, est, 0.1, bound=1e3)
    with pytest.raises(DivergenceError) as err:
        simulate(cm, state_1d([1.0], []), 100)
    assert err.value.step is not None and err.value.step > 0
    assert np.all(np.isfinite(err.value.last_state.x_hist))


def test_ensemble_contract():
    p = lg.PAPER_PARAMS(1.0)
    ds = lg.simulate_linear_gaussian(p, 5, rng=0)
    est = linear_estimator([[0.0]], DelayConfig(0, 0))
    det = ClosureModel(lambda x, y: -x, est, ds.tau)
    x = ensemble_simulate(det, ds, 10, 5, 20, perturbation_sd=0.0, base_seed=1)
    assert x.shape == (5, 21, 1)
    np.testing.assert_array_equal(x, np.broadcast_to(x[:1], x.shape))
    x = ensemble_simulate(det, ds, [10, 30], 4, 20, perturbation_sd=0.1, base_seed=1)
    assert x.shape == (2, 4, 21, 1)
    assert np.unique(x[:, :, 0, 0]).size == 8
    again = ensemble_simulate(det, ds, [10, 30], 4, 20, perturbation_sd=0.1, base_seed=1)
    np.testing.assert_array_equal(x, again)
    # member streams do not depend on the other cases in the batch
    solo = ensemble_simulate(det, ds, [10], 4, 20, perturbation_sd=0.1, base_seed=1)
    np.testing.assert_array_equal(solo[0], x[0])
    with pytest.raises(ValueError):
        ensemble_simulate(det, ds, 10, 2, 5, perturbation_sd=-1.0)


def test_fit_delay_estimator_components_and_pooling(rng):
    ds = TimeSeriesDataset(0.1, rng.standard_normal((200, 2)), rng.standard_normal((200, 2)))
    comps = [((0,), (0,), (0,)), ((1,), (1,), (1,))]
    est = fit_delay_estimator([ds, ds], DelayConfig(1, 1), BasisSpec("pod"), 0.0, comps, threads=2)
    assert len(est.components) == 2
    assert est.components[0].model.basis.N_train == 2 * 199
    with pytest.raises(ValueError):
        fit_delay_estimator(ds, DelayConfig(1, 1), components=[((0,), (0,), (0,))])
    state = seed_state(ds, [3, 4], est.delay)
    y = est.predict_buffers(state.x_hist, state.y_hist)
    assert y.shape == (2, 2)


def test_m500_stationary_variance():
    p = lg.PAPER_PARAMS(1.3)
    cm = lg.memory_closure(p, 500)
    s11 = lg.lyapunov_equilibrium_cov(p)[0, 0]
    B, steps = 10, 10_000            # 10^5 member-steps after burn-in
    s0 = ClosureState(np.zeros((B, 501, 1)), np.zeros((B, 0, 1)), batched=True)
    burn = simulate(cm, s0, 1000, rng=1).final_state
    x = simulate(cm, burn, steps, rng=2).x[1:, :, 0]
    assert abs(x.var() / s11 - 1) < 0.05
