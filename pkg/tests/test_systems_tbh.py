import numpy as np
import pytest

from rkhs_closure.systems import tbh


def brute_rhs(u):
    """Exhaustive triad enumeration for every positive k."""
    Lam = len(u)
    mode = lambda j: u[j - 1] if j > 0 else np.conj(u[-j - 1])
    out = np.zeros(Lam, complex)
    for k in range(1, Lam + 1):
        s = 0
        for p in range(-Lam, Lam + 1):
            q = -k - p
            if p and q and abs(q) <= Lam:
                s += np.conj(mode(p)) * np.conj(mode(q))
        out[k - 1] = -0.5j * k * s
    return out


def brute_F(u):
    Lam = len(u)
    mode = lambda j: u[j - 1] if j > 0 else np.conj(u[-j - 1])
    s = 0
    for p in range(-Lam, Lam + 1):
        q = -1 - p
        if 2 <= abs(p) <= Lam and 2 <= abs(q) <= Lam:
            s += np.conj(mode(p)) * np.conj(mode(q))
    return -0.5j * s


def random_modes(rng, Lam):
    return rng.standard_normal(Lam) + 1j * rng.standard_normal(Lam)


@pytest.mark.parametrize("Lam", [2, 3, 5, 9])
def test_rhs_and_F_match_enumeration(rng, Lam):
    u = random_modes(rng, Lam)
    np.testing.assert_allclose(tbh.tbh_rhs(u), brute_rhs(u), atol=1e-12)
    assert tbh.tbh_forcing_F(u) == pytest.approx(brute_F(u), abs=1e-12)


def test_F_small_cutoffs(rng):
    assert tbh.tbh_forcing_F(random_modes(rng, 2)) == 0
    u = random_modes(rng, 3)
    assert tbh.tbh_forcing_F(u) == pytest.approx(-1j * np.conj(u[1]) * u[2], abs=1e-14)


def test_decomposition_identity(rng):
    u = random_modes(rng, 16)
    split = tbh.tbh_resolved_term(u[0], u[1]) + tbh.tbh_forcing_F(u)
    assert abs(tbh.tbh_rhs(u)[0] - split) < 1e-12 * abs(tbh.tbh_rhs(u)[0])


def test_energy_is_invariant_of_the_rhs(rng):
    u = random_modes(rng, 12)
    # dE/dt = 2 Re sum conj(u_k) du_k/dt
    assert abs(2 * np.real(np.vdot(u, tbh.tbh_rhs(u)))) < 1e-11


def test_initial_condition_energy():
    p = tbh.TBHParams(50, 10.0)
    assert p.mean_energy == 5.0
    u = tbh.tbh_initial_condition(p, 1)
    v = tbh.tbh_initial_condition(p, 2)
    assert tbh.tbh_energy(u) / 50 == pytest.approx(5.0, rel=1e-13)
    assert tbh.tbh_energy(u) == pytest.approx(tbh.tbh_energy(v), rel=1e-13)
    assert not np.allclose(np.angle(u), np.angle(v))
    phase = np.exp(1j * np.random.default_rng(0).uniform(0, 2 * np.pi, 50))
    assert tbh.tbh_energy(u * phase) == pytest.approx(tbh.tbh_energy(u), rel=1e-13)


def test_reality_by_construction_and_checked(rng):
    u = random_modes(rng, 4)
    ext = tbh.two_sided(u)
    np.testing.assert_array_equal(ext[:4][::-1], np.conj(u))
    assert ext[4] == 0
    bad = ext.copy()
    bad[0] += 1e-3
    with pytest.raises(tbh.TBHConsistencyError):
        tbh.simulate_tbh(tbh.TBHParams(4, 1.0), bad, 0.01, burn_in=0)


def test_short_run_energy_and_output(rng):
    p = tbh.TBHParams(8, 4.0, dt=1e-3)
    u0 = tbh.tbh_initial_condition(p, rng)
    ds, modes = tbh.simulate_tbh(p, u0, 1.0, burn_in=0.0, return_modes=True)
    assert ds.x_names == ("u1_re", "u1_im")
    assert ds.y_names == ("u2_re", "u2_im", "F_re", "F_im")
    E = tbh.tbh_energy(modes)
    assert np.abs(E / E[0] - 1).max() < 1e-6
    np.testing.assert_allclose(ds.x[:, 0] + 1j * ds.x[:, 1], modes[:, 0])


def test_params_validation():
    with pytest.raises(ValueError):
        tbh.TBHParams(1)
    with pytest.raises(ValueError):
        tbh.TBHParams(4, 0.0)


def test_known_drift_matches_complex_form(rng):
    u1, u2, F = (rng.standard_normal(3) + 1j * rng.standard_normal(3) for _ in range(3))
    x = np.column_stack([u1.real, u1.imag])
    y = np.column_stack([u2.real, u2.imag, F.real, F.imag])
    d = tbh.tbh_known_drift(x, y)
    np.testing.assert_allclose(d[:, 0] + 1j * d[:, 1], tbh.tbh_resolved_term(u1, u2) + F, atol=1e-14)
