"""Scattering diagnostics: free flow, asymptotic states, wave operators, decay monitors.

The verdict thresholds here (monotone Cauchy decay over the last three
checkpoint intervals, terminal distance under 10% of the initial norm) are
artifact policy for a finite-time surrogate of an asymptotic statement.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from nls2 import functionals, io
from nls2.evolve import EvolutionConfig, Trajectory, VerdictKind, evolve
from nls2.functionals import GroundStateConstants
from nls2.grid import Grid, SystemState, to_physical, to_spectral

DECAY_WINDOW = 3
TERMINAL_FRACTION = 0.10
ROUNDOFF_FLOOR = 1e-10  # increments below this fraction of the initial norm count as zero
MASS_TOL = 1e-6
ENERGY_TOL = 1e-2
ROUNDTRIP_TOL = 5e-2


class ScatteringVerdict(str, enum.Enum):
    CONSISTENT = "ConsistentWithScattering"
    INCONCLUSIVE = "Inconclusive"


def linear_propagate(f: np.ndarray, t: float, grid: Grid) -> np.ndarray:
    """e^{itΔ} f, the multiplier exp(-i|k|^2 t) in Fourier space."""
    if t == 0.0:
        return np.array(f, dtype=np.complex128, copy=True)
    return to_physical(np.exp(-1j * grid.k_squared * t) * to_spectral(f))


def linear_propagate_state(state: SystemState, t: float) -> SystemState:
    g = state.grid
    return dataclasses.replace(state, u=linear_propagate(state.u, t, g),
                               v=linear_propagate(state.v, t, g), time=state.time + t)


def _h1_weight(grid: Grid) -> np.ndarray:
    return (1.0 + grid.grad_k_squared) * grid.cell_volume


def h1_norm(f: np.ndarray, grid: Grid) -> float:
    """sqrt(∫|f|^2 + ∫|∇f|^2) with the spectral gradient."""
    F = to_spectral(f)
    return math.sqrt(float(np.sum(_h1_weight(grid) * (F.real**2 + F.imag**2))))


def h1_pair_norm(u: np.ndarray, v: np.ndarray, grid: Grid) -> float:
    return math.hypot(h1_norm(u, grid), h1_norm(v, grid))


def h1_distance(a: SystemState, b: SystemState) -> float:
    return h1_pair_norm(a.u - b.u, a.v - b.v, a.grid)


@dataclass
class ScatteringReport:
    asymptotic_pair: tuple[np.ndarray, np.ndarray]
    cauchy_curve: list[tuple[float, float]]
    distance_curve: list[tuple[float, float]]
    l4_curve: list[tuple[float, float, float]]
    l5_accumulated: list[tuple[float, float]]
    scattering_verdict: ScatteringVerdict
    initial_norm: float
    terminal_distance: float
    grid: Grid
    beta: float
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "scattering_verdict": self.scattering_verdict.value,
            "initial_h1_norm": self.initial_norm,
            "terminal_distance": self.terminal_distance,
            "terminal_fraction": self.terminal_distance / self.initial_norm if self.initial_norm else 0.0,
            "policy": {
                "decay_window_intervals": DECAY_WINDOW,
                "terminal_fraction_max": TERMINAL_FRACTION,
                "roundoff_floor": ROUNDOFF_FLOOR,
                "label": "finite-time surrogate; consistent-with verdict, not a proof of scattering",
            },
            "last_increments": [c[1] for c in self.cauchy_curve[-DECAY_WINDOW:]],
            "notes": self.notes,
        }

    def write(self, path) -> Path:
        """JSON summary at ``path`` with CSV sidecars and the asymptotic pair as a snapshot."""
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        stem = p.with_suffix("")
        io.write_rows_csv(f"{stem}_cauchy.csv", ("time", "h1_increment"), self.cauchy_curve)
        io.write_rows_csv(f"{stem}_distance.csv", ("time", "h1_distance"), self.distance_curve)
        io.write_rows_csv(f"{stem}_l4.csv", ("time", "l4_u", "l4_v"), self.l4_curve)
        io.write_rows_csv(f"{stem}_l5.csv", ("time", "l5_accumulated"), self.l5_accumulated)
        asym = SystemState(*self.asymptotic_pair, self.grid, 0.0, self.beta)
        head = io.write_snapshot(asym, f"{stem}_asymptotic")
        out = self.summary()
        out["asymptotic_snapshot"] = head.name
        io.write_json(p, out)
        return p


def _decreasing(incs, floor) -> bool:
    tail = [0.0 if x <= floor else x for x in incs]
    return all(b < a or (a == 0.0 and b == 0.0) for a, b in zip(tail, tail[1:]))


def decay_monitors(traj: Trajectory):
    """(l4_curve, l5_accumulated): spatial L^4 norms and the trapezoid-rule running
    integral of ||u||_5^5 + ||v||_5^5 over the report times."""
    l4 = [(s.time, s.l4[0], s.l4[1]) for s in traj.snapshots]
    acc = []
    total = 0.0
    prev = None
    for s in traj.snapshots:
        val = s.l5_power[0] + s.l5_power[1]
        if prev is not None:
            total += 0.5 * (s.time - prev[0]) * (val + prev[1])
        acc.append((s.time, total))
        prev = (s.time, val)
    return l4, acc


def extract_asymptotic_state(traj: Trajectory) -> ScatteringReport:
    """Back-propagate each checkpoint by the free flow and test the Cauchy behaviour."""
    if traj.verdict is None or traj.verdict.kind is not VerdictKind.REACHED_T_END:
        raise ValueError("asymptotic-state extraction needs a ReachedTEnd trajectory")
    cks = traj.checkpoints
    if len(cks) < DECAY_WINDOW + 1:
        raise ValueError(f"need at least {DECAY_WINDOW + 1} field checkpoints, got {len(cks)}")
    g = traj.grid
    w = _h1_weight(g)
    spectra = []
    for st in cks:
        back = np.exp(1j * g.k_squared * st.time)
        spectra.append((back * to_spectral(st.u), back * to_spectral(st.v)))

    def dist(a, b):
        d = (a[0] - b[0], a[1] - b[1])
        return math.sqrt(float(np.sum(w * (np.abs(d[0]) ** 2 + np.abs(d[1]) ** 2))))

    cauchy = [(cks[i + 1].time, dist(spectra[i + 1], spectra[i])) for i in range(len(cks) - 1)]
    last = spectra[-1]
    distance = [(st.time, dist(sp, last)) for st, sp in zip(cks, spectra)]
    zero = (np.zeros_like(last[0]), np.zeros_like(last[1]))
    initial_norm = dist(spectra[0], zero)
    # the final distance is zero by construction; the penultimate one is the test
    terminal = distance[-2][1]
    incs = [c[1] for c in cauchy[-DECAY_WINDOW:]]
    floor = ROUNDOFF_FLOOR * initial_norm
    ok = _decreasing(incs, floor) and terminal <= TERMINAL_FRACTION * initial_norm
    if initial_norm == 0.0:
        ok = True
    l4, l5 = decay_monitors(traj)
    return ScatteringReport(
        asymptotic_pair=(to_physical(last[0]), to_physical(last[1])),
        cauchy_curve=cauchy,
        distance_curve=distance,
        l4_curve=l4,
        l5_accumulated=l5,
        scattering_verdict=ScatteringVerdict.CONSISTENT if ok else ScatteringVerdict.INCONCLUSIVE,
        initial_norm=initial_norm,
        terminal_distance=terminal,
        grid=g,
        beta=traj.beta,
    )


@dataclass(frozen=True)
class WaveOperatorResult:
    state: SystemState
    mass_residual: float
    energy_residual: float
    roundtrip_distance: float
    asymptotic_mass: float
    asymptotic_kinetic: float

    @property
    def passes(self) -> dict:
        return {
            "mass_identity": self.mass_residual < MASS_TOL,
            "energy_identity": self.energy_residual < ENERGY_TOL,
            "roundtrip": self.roundtrip_distance < ROUNDTRIP_TOL,
        }

    def to_dict(self) -> dict:
        return {
            "time": self.state.time,
            "mass_residual": self.mass_residual,
            "energy_residual": self.energy_residual,
            "roundtrip_distance": self.roundtrip_distance,
            "asymptotic_mass": self.asymptotic_mass,
            "asymptotic_kinetic": self.asymptotic_kinetic,
            "tolerances": {"mass": MASS_TOL, "energy": ENERGY_TOL, "roundtrip": ROUNDTRIP_TOL},
            "passes": self.passes,
        }


def wave_operator(asymptotic: SystemState, T: float, config: EvolutionConfig,
                  constants: GroundStateConstants) -> WaveOperatorResult:
    """Data at t = 0 whose forward flow approaches e^{itΔ}(φ+, ψ+).

    ``asymptotic`` holds (φ+, ψ+). The pair is freely propagated to T,
    evolved back to 0 with step |config.dt|, and then re-evolved forward to T
    to measure the round trip.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    g = asymptotic.grid
    m = functionals.mass(asymptotic)
    a = functionals.kinetic(asymptotic)
    if not 0.5 * m * a < constants.me_threshold:
        raise ValueError(
            f"M*A/2 = {0.5 * m * a:.6g} is not below M_gs*E_gs = {constants.me_threshold:.6g}")
    at_T = SystemState(linear_propagate(asymptotic.u, T, g), linear_propagate(asymptotic.v, T, g),
                       g, T, asymptotic.beta)
    dt = abs(config.dt)
    back = evolve(at_T, dataclasses.replace(config, dt=-dt, t_end=0.0, checkpoint_every=0))
    if back.verdict.kind is not VerdictKind.REACHED_T_END:
        raise RuntimeError(f"backward evolution stopped: {back.verdict.kind.value} at t={back.verdict.time}")
    data = back.final_state
    fwd = evolve(data, dataclasses.replace(config, dt=dt, t_end=T, checkpoint_every=0))
    if fwd.verdict.kind is not VerdictKind.REACHED_T_END:
        raise RuntimeError(f"forward re-evolution stopped: {fwd.verdict.kind.value} at t={fwd.verdict.time}")
    norm = h1_pair_norm(asymptotic.u, asymptotic.v, g)
    rt = h1_distance(fwd.final_state, at_T) / norm if norm > 0 else 0.0
    e0 = functionals.energy(data)
    m0 = functionals.mass(data)
    mass_res = abs(m0 - m) / m if m > 0 else abs(m0)
    energy_res = abs(e0 - 0.5 * a) / (0.5 * a) if a > 0 else abs(e0)
    return WaveOperatorResult(data, mass_res, energy_res, rt, m, a)
