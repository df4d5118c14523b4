"""Randomised and exact checks of the variational and symmetry identities.

Each suite returns a plain dict with a boolean ``passed`` plus the measured
quantities, so the CLI can dump the whole matrix as JSON.
"""
from __future__ import annotations

import math

import numpy as np

from nls2 import functionals, symmetry
from nls2.functionals import GroundStateConstants
from nls2.grid import Grid, SystemState, to_physical

GN_RTOL = 1e-6
GN_MATCH_RTOL = 1e-4
LEMMA_SLACK = 1e-9
BOOST_RTOL = 1e-8
ZERO_MOMENTUM_TOL = 1e-8
SCALING_RTOL = 1e-6


def random_state(grid: Grid, rng: np.random.Generator, beta: float = 1.0) -> SystemState:
    """Localised band-limited complex Gaussian pair.

    Coefficients are i.i.d. complex normals on wavenumber indices |m_j| <= n/8,
    and the resulting field is multiplied by a Gaussian envelope of random
    width in [L/16, L/10] about the box centre. The envelope keeps the data off
    the box faces and widens the spectrum only by a Gaussian of width ~1/L, so
    on n >= 64 the content near Nyquist sits at roundoff even after a boost by
    a quarter of the Nyquist wavenumber.
    """
    n = grid.n_per_axis
    cut = n // 8
    m = np.fft.fftfreq(n, d=1.0 / n)
    band = (np.abs(m) <= cut)
    mask = band[:, None, None] & band[None, :, None] & band[None, None, :]
    rr = grid.radius
    fields = []
    for _ in range(2):
        coef = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * mask
        noise = to_physical(coef)
        width = grid.box_length * rng.uniform(1.0 / 16.0, 1.0 / 10.0)
        fields.append(noise * np.exp(-0.5 * (rr / width) ** 2))
    mix = rng.uniform(0.0, 1.0)
    u, v = fields[0], mix * fields[1]
    scale = 1.0 / math.sqrt(functionals.mass(SystemState(u, v, grid, 0.0, beta)))
    return SystemState(scale * u, scale * v, grid, 0.0, beta)


def random_ensemble(grid: Grid, size: int, seed: int, beta: float = 1.0) -> list[SystemState]:
    if size < 1:
        raise ValueError("ensemble size must be positive")
    rng = np.random.default_rng(seed)
    return [random_state(grid, rng, beta) for _ in range(size)]


def normalize_below_kinetic_threshold(state: SystemState, gs: GroundStateConstants,
                                      fraction: float) -> SystemState:
    """Amplitude multiple with M*A = fraction * M_gs*A_gs (M*A scales as c^4)."""
    r = functionals.invariant_report(state)
    c = (fraction * gs.ma_threshold / (r.mass * r.kinetic)) ** 0.25
    return state.scaled(c)


def gn_sweep(states, gs_state: SystemState, gs: GroundStateConstants, kgn_scale: float = 1.0) -> dict:
    """Sharp GN: ratio(ground state) equals K_GN in both closed forms; no state exceeds it."""
    kgn = gs.kgn * kgn_scale
    ratio_gs = functionals.gn_ratio(gs_state)
    form_a = 4.0 / (3.0 * math.sqrt(gs.mass_gs * gs.kinetic_gs))
    form_e = 4.0 / (3.0 * math.sqrt(6.0) * math.sqrt(gs.mass_gs * gs.energy_gs))
    ratios = [functionals.gn_ratio(s) for s in states]
    worst = max(ratios) if ratios else 0.0
    match_a = abs(ratio_gs - form_a) / form_a
    match_e = abs(ratio_gs - form_e) / form_e
    ok_match = match_a < GN_MATCH_RTOL and match_e < GN_MATCH_RTOL
    ok_bound = worst <= kgn * (1 + GN_RTOL) and ratio_gs <= kgn * (1 + GN_MATCH_RTOL)
    return {
        "passed": bool(ok_match and ok_bound),
        "kgn": kgn,
        "ratio_ground_state": ratio_gs,
        "rel_err_mass_kinetic_form": match_a,
        "rel_err_mass_energy_form": match_e,
        "max_ratio_over_kgn": worst / kgn,
        "samples": len(ratios),
    }


def lemma32_suite(states, gs: GroundStateConstants, seed: int) -> dict:
    """Parts (i) and (iii) over the ensemble normalised to M*A <= M_gs*A_gs."""
    rng = np.random.default_rng(seed + 1)
    worst_i = math.inf
    worst_iii = math.inf
    for s in states:
        t = normalize_below_kinetic_threshold(s, gs, rng.uniform(0.0, 1.0))
        r = functionals.invariant_report(t)
        a = r.kinetic
        slack_i = (r.energy - a / 6.0) / a
        ratio = r.mass * r.energy / gs.me_threshold
        slack_iii = (r.s_value - 8.0 * a * (1.0 - math.sqrt(max(ratio, 0.0)))) / a
        worst_i = min(worst_i, slack_i)
        worst_iii = min(worst_iii, slack_iii)
    return {
        "passed": bool(worst_i >= -LEMMA_SLACK and worst_iii >= -LEMMA_SLACK),
        "min_slack_i_over_A": worst_i,
        "min_slack_iii_over_A": worst_iii,
        "samples": len(states),
    }


def kplus_subset_suite(states, gs: GroundStateConstants, seed: int) -> dict:
    """Every state found in K+ must also lie in the set K (M*A spread over (0, 2] thresholds)."""
    rng = np.random.default_rng(seed + 2)
    n_plus = 0
    violations = 0
    for s in states:
        t = normalize_below_kinetic_threshold(s, gs, rng.uniform(0.0, 2.0))
        r = functionals.invariant_report(t)
        if functionals.in_set_Kplus(t, gs, r):
            n_plus += 1
            if not functionals.in_set_K(t, gs, r):
                violations += 1
    return {"passed": violations == 0, "in_kplus": n_plus, "violations": violations,
            "samples": len(states)}


def kplus_strict_witness(gs_state: SystemState, gs: GroundStateConstants, c: float = 0.9,
                         lambdas=None) -> dict:
    """Scan lambda for rescale(c*(P, Q), lambda) in K but not in K+ (J grows like lambda*E)."""
    base = gs_state.scaled(c)
    lambdas = list(lambdas) if lambdas is not None else [2.0 ** (k / 4.0) for k in range(0, 25)]
    rows = []
    witness = None
    for lam in lambdas:
        st = symmetry.rescale(base, lam)
        r = functionals.invariant_report(st)
        in_k = functionals.in_set_K(st, gs, r)
        in_kp = functionals.in_set_Kplus(st, gs, r)
        rows.append({"lambda": lam, "J": r.j_value, "K": r.k_value, "in_K": in_k, "in_Kplus": in_kp})
        if witness is None and in_k and not in_kp:
            witness = lam
    j_tail = [row["J"] for row in rows if witness is not None and row["lambda"] >= witness]
    growing = len(j_tail) >= 2 and all(b > a for a, b in zip(j_tail, j_tail[1:]))
    return {
        "passed": bool(witness is not None and growing and j_tail[-1] > gs.j0),
        "lambda_witness": witness,
        "j0": gs.j0,
        "scan": rows,
    }


def boost_suite(states, seed: int) -> dict:
    """Galilean identities for kinetic and energy, and the zero-momentum frame."""
    rng = np.random.default_rng(seed + 3)
    worst_kin = 0.0
    worst_en = 0.0
    worst_zero = 0.0
    worst_zero_energy = 0.0
    for s in states:
        g = s.grid
        xi = symmetry.snap_to_lattice(rng.uniform(-0.25, 0.25, 3) * g.k_nyquist, g)
        r0 = functionals.invariant_report(s)
        b = symmetry.boost(s, xi)
        r1 = functionals.invariant_report(b)
        xf = float(xi @ np.asarray(r0.momentum))
        xx = float(xi @ xi)
        kin_pred = xx * r0.mass + 2.0 * xf + r0.kinetic
        en_pred = 0.5 * xx * r0.mass + xf + r0.energy
        worst_kin = max(worst_kin, abs(r1.kinetic - kin_pred) / abs(kin_pred))
        worst_en = max(worst_en, abs(r1.energy - en_pred) / max(abs(en_pred), abs(r0.energy)))
        z, _ = symmetry.zero_momentum_boost(b)
        rz = functionals.invariant_report(z)
        worst_zero = max(worst_zero, float(np.linalg.norm(rz.momentum)) / rz.mass)
        f2 = float(np.dot(r1.momentum, r1.momentum))
        e_pred = r1.energy - 0.5 * f2 / r1.mass
        worst_zero_energy = max(worst_zero_energy, abs(rz.energy - e_pred) / abs(e_pred))
    return {
        "passed": bool(worst_kin < BOOST_RTOL and worst_en < BOOST_RTOL
                       and worst_zero < ZERO_MOMENTUM_TOL and worst_zero_energy < BOOST_RTOL),
        "max_rel_err_kinetic": worst_kin,
        "max_rel_err_energy": worst_en,
        "max_momentum_over_mass_after_zero_boost": worst_zero,
        "max_rel_err_zero_boost_energy": worst_zero_energy,
        "samples": len(states),
    }


def scaling_suite(states, lambdas=(0.5, 2.0, 3.0)) -> dict:
    worst_mass = 0.0
    worst_prod = 0.0
    for s in states:
        r0 = functionals.invariant_report(s)
        for lam in lambdas:
            r = functionals.invariant_report(symmetry.rescale(s, lam))
            worst_mass = max(worst_mass, abs(r.mass - r0.mass / lam) / (r0.mass / lam))
            worst_prod = max(worst_prod,
                             abs(r.mass * r.energy - r0.mass * r0.energy) / abs(r0.mass * r0.energy),
                             abs(r.mass * r.kinetic - r0.mass * r0.kinetic) / (r0.mass * r0.kinetic))
    return {
        "passed": bool(worst_mass < SCALING_RTOL and worst_prod < SCALING_RTOL),
        "max_rel_err_mass": worst_mass,
        "max_rel_err_products": worst_prod,
        "samples": len(states),
    }
