import math

import numpy as np
import pytest
from conftest import gaussian_pair
from hypothesis import given, settings
from hypothesis import strategies as st

from nls2 import functionals as fn
from nls2.functionals import Classification, GroundStateConstants, InvariantReport
from nls2.grid import SystemState, make_grid


def test_zero_state_functionals(grid32):
    z = SystemState(grid32.zeros(), grid32.zeros(), grid32)
    r = fn.invariant_report(z)
    assert (r.mass, r.energy, r.kinetic, r.quartic, r.s_value, r.j_value, r.k_value) == (0,) * 7
    assert r.momentum == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        fn.gn_ratio(z)


def test_constant_field_closed_form():
    g = make_grid(16, 4.0)
    c = 0.7
    s = SystemState(np.full(g.shape, c), g.zeros(), g, beta=2.0)
    V = 4.0**3
    assert fn.kinetic(s) == pytest.approx(0.0, abs=1e-14)
    assert fn.quartic(s) == pytest.approx(c**4 * V, rel=1e-13)
    assert fn.energy(s) == pytest.approx(-(c**4) * V / 4, rel=1e-13)


def test_plane_wave_momentum_and_kinetic():
    # u = a exp(i k.x) on a lattice wavenumber: F = k M, A = |k|^2 M exactly
    g = make_grid(16, 2 * math.pi)
    X, Y, Z = g.offsets()
    u = 0.5 * np.exp(1j * (2 * X + 0 * Y - 3 * Z))
    s = SystemState(u, 0.2 * u, g)
    m = fn.mass(s)
    np.testing.assert_allclose(fn.momentum(s), (2 * m, 0.0, -3 * m), rtol=1e-12, atol=1e-12)
    assert fn.kinetic(s) == pytest.approx(13 * m, rel=1e-12)


def test_gaussian_kinetic_closed_form():
    # u = exp(-r^2/2): ∫|∇u|^2 = (3/2) pi^{3/2}; ∫|u|^4 = (pi/2)^{3/2}
    g = make_grid(64, 16.0)
    s = gaussian_pair(g, 1.0, 1.0, beta=0.0, v_scale=0.0)
    assert fn.kinetic(s) == pytest.approx(1.5 * math.pi**1.5, rel=1e-10)
    assert fn.quartic(s) == pytest.approx((math.pi / 2) ** 1.5, rel=1e-10)


@given(seed=st.integers(0, 2**32 - 1), beta=st.floats(0.0, 10.0))
@settings(max_examples=15, deadline=None)
def test_report_algebra(seed, beta):
    g = make_grid(8, 4.0)
    rng = np.random.default_rng(seed)
    s = SystemState(rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape),
                    rng.standard_normal(g.shape), g, 0.0, beta)
    r = fn.invariant_report(s)
    assert r.energy == pytest.approx(r.kinetic / 2 - r.quartic / 4, rel=1e-14, abs=1e-12)
    assert r.s_value == pytest.approx(8 * r.kinetic - 6 * r.quartic, rel=1e-14, abs=1e-12)
    assert r.j_value == pytest.approx(r.energy + r.mass / 2, rel=1e-14, abs=1e-12)
    assert r.k_value == pytest.approx(2 * r.kinetic - 1.5 * r.quartic, rel=1e-14, abs=1e-12)
    assert r.energy == pytest.approx(fn.energy(s), rel=1e-13, abs=1e-12)
    assert r.s_value == pytest.approx(fn.s_functional(s), rel=1e-13, abs=1e-11)
    assert r.j_value == pytest.approx(fn.j_functional(s), rel=1e-13, abs=1e-12)
    assert r.k_value == pytest.approx(fn.k_functional(s), rel=1e-13, abs=1e-11)


def test_report_csv_and_dict_round_trip():
    r = InvariantReport(1.0, (0.1, -0.2, 0.3), 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 0.5)
    assert InvariantReport.from_csv_row([str(x) for x in r.csv_row()]) == r
    assert InvariantReport.from_dict(r.to_dict()) == r
    assert InvariantReport.CSV_HEADER == ("time", "mass", "Fx", "Fy", "Fz", "energy", "kinetic",
                                          "quartic", "S", "J", "K")


@given(c=st.floats(0.1, 5.0))
@settings(max_examples=20, deadline=None)
def test_gn_ratio_is_amplitude_invariant(c, grid32):
    # Φ ~ c^4 and M^{1/2} A^{3/2} ~ c^4: the ratio has degree zero
    s = gaussian_pair(grid32, 1.0, 1.3, v_scale=0.4)
    assert fn.gn_ratio(s.scaled(c)) == pytest.approx(fn.gn_ratio(s), rel=1e-10)


def _consts_on(state):
    r = fn.invariant_report(state)
    return GroundStateConstants.from_values(r.mass, r.kinetic, r.quartic)


@pytest.fixture(scope="module")
def gs_grid(gs1, grid64):
    state = gs1.embed(grid64)
    return state, _consts_on(state)


@pytest.mark.parametrize("c,expected_k,expected_class", [
    (0.9, True, Classification.GLOBAL_AND_SCATTERS),
    (1.1, False, Classification.BLOWS_UP_IF_RADIAL),
    (2.0, False, Classification.BLOWS_UP_IF_RADIAL),
])
def test_classification_of_scaled_ground_state(gs_grid, c, expected_k, expected_class):
    state, consts = gs_grid
    s = state.scaled(c)
    assert fn.in_set_K(s, consts) is expected_k
    assert fn.classify(s, consts) is expected_class


def test_threshold_products_closed_form(gs_grid):
    # with A = 3M, Φ = 4M at the ground state: M·E(c) = c^4 (1.5 c^2 - c^4) M^2 ... per component
    state, consts = gs_grid
    m = consts.mass_gs
    for c in (0.9, 1.1, 2.0):
        r = fn.invariant_report(state.scaled(c))
        a_fac = consts.kinetic_gs / m
        q_fac = consts.quartic_gs / m
        me = c**2 * (0.5 * a_fac * c**2 - 0.25 * q_fac * c**4) * m**2
        assert r.mass * r.energy == pytest.approx(me, rel=1e-12)
    # the Pohozaev-rounded values quoted for c = 0.9 and 1.1 (discretisation ~1e-3 at n=64)
    r09 = fn.invariant_report(state.scaled(0.9))
    assert r09.mass * r09.energy / m**2 == pytest.approx(0.4527, rel=2e-3)
    r11 = fn.invariant_report(state.scaled(1.1))
    assert r11.mass * r11.energy / m**2 == pytest.approx(1.21 * 0.3509, rel=3e-3)


def test_above_threshold_and_zero_state(gs_grid, grid64):
    state, consts = gs_grid
    z = SystemState(grid64.zeros(), grid64.zeros(), grid64)
    assert fn.in_set_K(z, consts) and fn.in_set_Kplus(z, consts)
    # fast oscillation: kinetic dominates, so M·E lands far above the threshold
    fast = gaussian_pair(grid64, 1.0, 2.0, xi=(6.0, 0.0, 0.0), v_scale=0.0)
    r = fn.invariant_report(fast)
    assert r.mass * r.energy > consts.me_threshold
    assert fn.classify(fast, consts) is Classification.ABOVE_THRESHOLD


def test_ground_state_sits_on_both_thresholds(gs_grid):
    state, consts = gs_grid
    assert not fn.in_set_K(state, consts)
    assert not fn.in_set_Kplus(state, consts)  # J = J0 is not strictly below
    assert fn.borderline(state, consts)
    assert not fn.borderline(state.scaled(0.9), consts)


def test_classify_requires_positive_beta(gs_grid):
    state, consts = gs_grid
    s = SystemState(state.u, state.v, state.grid, 0.0, 0.0)
    with pytest.raises(ValueError):
        fn.classify(s, consts)


def test_constants_closed_forms():
    c = GroundStateConstants.from_values(mass=2.0, kinetic=6.0, quartic=8.0)
    assert c.energy_gs == pytest.approx(1.0)
    assert c.j0 == pytest.approx(2.0)
    assert c.kgn == pytest.approx(4 / (3 * math.sqrt(12.0)))
    assert c.nehari_level == pytest.approx(4 / (3 * math.sqrt(3) * c.kgn))
    assert c.me_threshold == 2.0 and c.ma_threshold == 12.0
