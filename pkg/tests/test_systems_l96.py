import numpy as np
import pytest

from rkhs_closure.systems import l96


def test_params():
    with pytest.raises(ValueError):
        l96.L96Params(K=3)
    with pytest.raises(ValueError):
        l96.L96Params(J=0)
    p = l96.L96Params()
    assert (p.K, p.J, p.F, p.h_x, p.h_y) == (18, 20, 10.0, -1.0, 1.0)


def test_homogeneous_fixed_point():
    p = l96.L96Params(K=8, J=4, h_x=0.0)
    X, Y = np.full(8, p.F), np.zeros((8, 4))
    Xs, _ = l96.l96_integrate(p, X, Y, 200, 1e-3)
    np.testing.assert_allclose(Xs[-1], p.F, atol=1e-12)


def test_cyclic_advection_stencil(rng):
    K = 6
    X = rng.standard_normal(K)
    got = l96.l96_slow_tendency(X, np.zeros(K), 0.0)
    k = K - 1      # last index uses X^0, X^{K-2}, X^{K-3}
    want = X[k - 1] * (X[0] - X[k - 2]) - X[k]
    assert got[k] == pytest.approx(want, abs=1e-14)
    want0 = X[K - 1] * (X[1] - X[K - 2]) - X[0]
    assert got[0] == pytest.approx(want0, abs=1e-14)


def test_fast_index_wraps_into_next_sector(rng):
    p = l96.L96Params(K=4, J=3, eps=1.0)
    X = np.zeros(4)
    Y = rng.standard_normal((4, 3))
    _, dY = l96.l96_tendencies(p, X, Y)
    y = Y.ravel()
    n = y.size
    j = 2          # Y^{3,0}: neighbours Y^{4,0} = Y^{0,1} and Y^{1,0}
    want = y[(j + 1) % n] * (y[j - 1] - y[(j + 2) % n]) - y[j]
    assert dY.ravel()[j] == pytest.approx(want, abs=1e-14)


def test_stored_coupling_recomputes(rng):
    p = l96.L96Params(K=5, J=4, eps=0.5)
    ds, Ys = l96.simulate_l96(p, 0.2, rng=rng, burn_in=0.1, return_fast=True)
    B = p.h_x / p.J * Ys.sum(axis=-1)
    np.testing.assert_allclose(ds.y, B, atol=1e-14)
    assert ds.N == 21 and ds.n_x == 5


def test_rk4_fourth_order(rng):
    p = l96.L96Params(K=6, J=3, eps=1.0)
    X0 = p.F + rng.standard_normal(6)
    Y0 = 0.1 * rng.standard_normal((6, 3))
    T = 0.2
    ref = l96.l96_integrate(p, X0, Y0, 3200, T / 3200, record_every=3200)[0][-1]
    errs = []
    for n in (20, 40, 80):
        errs.append(np.abs(l96.l96_integrate(p, X0, Y0, n, T / n, record_every=n)[0][-1] - ref).max())
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 12) & (ratios < 20))


def test_divergence_guard():
    p = l96.L96Params(K=4, J=1, eps=1.0)
    X0 = np.array([30.0, -20.0, 10.0, 0.0])
    with pytest.raises(l96.DivergenceError):
        l96.l96_integrate(p, X0, np.zeros((4, 1)), 500, 0.5, bound=1e6)


def test_wilks_recovers_quintic(rng):
    c = np.array([0.3, -1.2, 0.05, 0.01, -0.002, 1e-4])
    X = rng.uniform(-8, 15, 500)
    got = l96.wilks_fit(X, np.polynomial.polynomial.polyval(X, c))
    np.testing.assert_allclose(got, c, rtol=1e-8, atol=1e-12)


def test_wilks_constant_and_nesting(rng):
    X = rng.standard_normal(100)
    np.testing.assert_allclose(l96.wilks_fit(X, np.full(100, 2.5)), [2.5, 0, 0, 0, 0, 0], atol=1e-10)
    B = np.sin(X) + 0.1 * rng.standard_normal(100)
    r5 = np.mean((B - l96.wilks_evaluate(l96.wilks_fit(X, B), X)) ** 2)
    lin = np.polyfit(X, B, 1)
    r1 = np.mean((B - np.polyval(lin, X)) ** 2)
    assert r5 <= r1
    with pytest.raises(np.linalg.LinAlgError):
        l96.wilks_fit(np.arange(5.0), np.arange(5.0))


def test_per_k_components():
    comps = l96.per_k_components(5, neighbors=1)
    assert comps[0] == ((0, 1, 4), (0,), (0,))
    assert len(comps) == 5
