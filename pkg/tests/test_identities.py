import numpy as np
import pytest

from nls2 import functionals as fn
from nls2 import identities as ids


@pytest.fixture(scope="module")
def ensemble(grid64):
    return ids.random_ensemble(grid64, 6, seed=7)


@pytest.fixture(scope="module")
def consts(gs1):
    return gs1.constants


def test_ensemble_is_seeded_and_normalised(grid64, ensemble):
    again = ids.random_ensemble(grid64, 6, seed=7)
    for a, b in zip(ensemble, again):
        np.testing.assert_array_equal(a.u, b.u)
    assert not np.array_equal(ensemble[0].u, ids.random_ensemble(grid64, 1, seed=8)[0].u)
    for s in ensemble:
        assert fn.mass(s) == pytest.approx(1.0, rel=1e-12)
        assert s.v.any()


def test_normalize_below_kinetic_threshold(ensemble, consts):
    for frac in (0.1, 0.5, 0.99):
        t = ids.normalize_below_kinetic_threshold(ensemble[0], consts, frac)
        r = fn.invariant_report(t)
        assert r.mass * r.kinetic == pytest.approx(frac * consts.ma_threshold, rel=1e-10)


def test_gn_sweep_and_tampered_constant(ensemble, gs1, ref_grid, consts):
    ref = gs1.embed(ref_grid)
    ok = ids.gn_sweep(ensemble, ref, consts)
    assert ok["passed"] and ok["max_ratio_over_kgn"] < 1.0
    assert ok["rel_err_mass_kinetic_form"] < 1e-4
    assert not ids.gn_sweep(ensemble, ref, consts, kgn_scale=0.5)["passed"]


def test_lemma32_and_kplus_subset(ensemble, consts):
    lem = ids.lemma32_suite(ensemble, consts, seed=1)
    assert lem["passed"] and lem["min_slack_i_over_A"] >= -1e-9
    sub = ids.kplus_subset_suite(ensemble, consts, seed=1)
    assert sub["passed"] and sub["violations"] == 0


def test_kplus_strict_witness(gs1, grid64):
    w = ids.kplus_strict_witness(gs1.embed(grid64), gs1.constants_on(grid64))
    assert w["passed"]
    lam = w["lambda_witness"]
    assert lam > 1.0
    row = next(r for r in w["scan"] if r["lambda"] == lam)
    assert row["in_K"] and not row["in_Kplus"] and row["J"] >= w["j0"]
    # at lambda = 1 the scaled ground state is in both sets
    assert w["scan"][0]["in_K"] and w["scan"][0]["in_Kplus"]


def test_boost_and_scaling_suites(ensemble):
    b = ids.boost_suite(ensemble[:3], seed=1)
    assert b["passed"], b
    s = ids.scaling_suite(ensemble[:3])
    assert s["passed"], s
