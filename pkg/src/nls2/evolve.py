"""Strang split-step time stepping, run monitoring and the localized virial.

One step is a half kick by the exact nonlinear phase, the exact free flow
exp(-i|k|^2 dt) in Fourier space, then another half kick. Inside
:func:`evolve` adjacent half kicks between reports are merged into one.
"""
from __future__ import annotations

import dataclasses
import enum
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from nls2 import _kernels, functionals, io
from nls2.functionals import InvariantReport
from nls2.grid import Grid, SystemState, gradient, integrate, make_grid

TAIL_THRESHOLD = 1e-3
TAIL_CUT = 2.0 / 3.0
LOCALIZATION_TOL = 1e-8


class NonFiniteStateError(FloatingPointError):
    """A step produced NaN or inf; in :func:`evolve` this becomes ResolutionLoss."""


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    report_every: int = 100
    blowup_kinetic_factor: float = 10.0
    blowup_amplitude_fraction: float = 0.5
    checkpoint_every: int = 0  # in reports; 0 keeps no field checkpoints

    def validate(self) -> None:
        if not (math.isfinite(self.dt) and self.dt != 0.0):
            raise ValueError(f"dt must be finite and nonzero, got {self.dt}")
        if not math.isfinite(self.t_end):
            raise ValueError("t_end must be finite")
        if int(self.report_every) != self.report_every or self.report_every < 1:
            raise ValueError("report_every must be a positive integer")
        if not self.blowup_kinetic_factor > 1.0:
            raise ValueError("blowup_kinetic_factor must exceed 1")
        if not 0.0 < self.blowup_amplitude_fraction <= 1.0:
            raise ValueError("blowup_amplitude_fraction must lie in (0, 1]")
        if int(self.checkpoint_every) != self.checkpoint_every or self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be a nonnegative integer")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class VerdictKind(str, enum.Enum):
    REACHED_T_END = "ReachedTEnd"
    BLOWUP_DETECTED = "BlowUpDetected"
    RESOLUTION_LOSS = "ResolutionLoss"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    time: float
    reason: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "time": self.time, "reason": self.reason}

    @classmethod
    def from_dict(cls, d) -> "Verdict":
        return cls(VerdictKind(d["kind"]), float(d["time"]), d.get("reason", ""))


@dataclass(frozen=True)
class Snapshot:
    """Invariants plus decay and resolution monitors at one report time."""

    time: float
    report: InvariantReport
    l4: tuple[float, float]  # spatial L^4 norms of u, v
    l5_power: tuple[float, float]  # ||u||_5^5, ||v||_5^5
    max_amplitude: float
    tail_fraction: float

    MONITOR_HEADER = ("time", "l4_u", "l4_v", "l5_power_u", "l5_power_v",
                      "max_amplitude", "tail_fraction")

    def monitor_row(self) -> list[float]:
        return [self.time, *self.l4, *self.l5_power, self.max_amplitude, self.tail_fraction]


@dataclass
class Trajectory:
    grid: Grid
    beta: float
    config: EvolutionConfig
    snapshots: list[Snapshot] = field(default_factory=list)
    checkpoints: list[SystemState] = field(default_factory=list)
    verdict: Verdict | None = None
    final_state: SystemState | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def reports(self) -> list[InvariantReport]:
        return [s.report for s in self.snapshots]


def _tail_mask(grid: Grid) -> np.ndarray:
    # top third of each axis' frequency range, i.e. max_j |k_j| > 2/3 k_nyq
    k2 = grid.wavenumbers**2
    kinf2 = np.maximum(np.maximum(k2[:, None, None], k2[None, :, None]), k2[None, None, :])
    return np.ascontiguousarray(kinf2)


def tail_fraction(state: SystemState) -> float:
    """Fraction of the spectral power of (u, v) in the top third of frequencies."""
    g = state.grid
    kinf2 = _tail_mask(g)
    cut2 = (TAIL_CUT * g.k_nyquist) ** 2
    tu, su = _kernels.tail_power(sfft.fftn(state.u, norm="ortho"), kinf2, cut2)
    tv, sv = _kernels.tail_power(sfft.fftn(state.v, norm="ortho"), kinf2, cut2)
    total = su + sv
    return (tu + tv) / total if total > 0 else 0.0


def amplitude_bound(grid: Grid, fraction: float) -> float:
    """Blow-up amplitude bound ``fraction * k_nyq``.

    For the scaling family lam R(lam x) the peak amplitude and the spectral
    width grow together; the amplitude at which the nonlinear frequency
    |u|^2 reaches the largest linear frequency k_nyq^2 is k_nyq.
    """
    return fraction * grid.k_nyquist


def _snapshot(state: SystemState) -> Snapshot:
    dv = state.grid.cell_volume
    l4 = tuple((_kernels.power_sum(f, 4.0) * dv) ** 0.25 for f in (state.u, state.v))
    l5 = tuple(_kernels.power_sum(f, 5.0) * dv for f in (state.u, state.v))
    amp = math.sqrt(max(float(np.max(np.abs(state.u))) ** 2, float(np.max(np.abs(state.v))) ** 2))
    return Snapshot(
        time=state.time,
        report=functionals.invariant_report(state),
        l4=l4,
        l5_power=l5,
        max_amplitude=amp,
        tail_fraction=tail_fraction(state),
    )


def step_strang(state: SystemState, dt: float) -> SystemState:
    """One Strang step of size ``dt`` (negative dt steps backward)."""
    if not state.is_finite():
        raise ValueError("step_strang needs a finite state")
    g = state.grid
    beta = float(state.beta)
    u = state.u.copy()
    v = state.v.copy()
    _kernels.nonlinear_phase(u, v, 0.5 * dt, beta)
    mult = np.exp(-1j * g.k_squared * dt)
    w = _kernels.num_threads()
    u = sfft.ifftn(mult * sfft.fftn(u, norm="ortho", workers=w), norm="ortho", workers=w)
    v = sfft.ifftn(mult * sfft.fftn(v, norm="ortho", workers=w), norm="ortho", workers=w)
    _kernels.nonlinear_phase(u, v, 0.5 * dt, beta)
    out = dataclasses.replace(state, u=u, v=v, time=state.time + dt)
    if not out.is_finite():
        raise NonFiniteStateError(f"non-finite field after step to t={out.time}")
    return out


def evolve(state: SystemState, config: EvolutionConfig, observer=None) -> Trajectory:
    """Advance ``state`` to ``config.t_end`` with fixed steps, monitoring as it goes.

    Halts with BlowUpDetected when the kinetic functional exceeds
    ``blowup_kinetic_factor`` times its initial value or the peak modulus
    exceeds :func:`amplitude_bound`; halts with ResolutionLoss on a
    non-finite field or when the spectral tail fraction exceeds 1e-3.
    ``observer(snapshot, state)`` is called at every report time.
    """
    config.validate()
    if not state.is_finite():
        raise ValueError("initial state is not finite")
    span = config.t_end - state.time
    n_steps = int(round(span / config.dt))
    if n_steps < 0 or abs(n_steps * config.dt - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(
            f"t_end - t0 = {span} is not a nonnegative whole number of steps of dt={config.dt}")

    g = state.grid
    beta = float(state.beta)
    dt = float(config.dt)
    t0 = state.time
    w = _kernels.num_threads()
    traj = Trajectory(grid=g, beta=beta, config=config)

    a_bound = amplitude_bound(g, config.blowup_amplitude_fraction)
    kinf2 = _tail_mask(g)
    cut2 = (TAIL_CUT * g.k_nyquist) ** 2
    gk2 = np.ascontiguousarray(g.grad_k_squared)
    mult = np.exp(-1j * g.k_squared * dt)

    def record(st: SystemState, force_checkpoint=False):
        snap = _snapshot(st)
        if traj.snapshots and snap.time <= traj.snapshots[-1].time:
            return
        idx = len(traj.snapshots)
        traj.snapshots.append(snap)
        if config.checkpoint_every and (idx % config.checkpoint_every == 0 or force_checkpoint):
            traj.checkpoints.append(st.copy())
        if observer is not None:
            observer(snap, st)

    first = _snapshot(state)
    kinetic0 = first.report.kinetic
    peak_pot = _kernels.max_potential(state.u, state.v, beta)
    if abs(dt) * peak_pot >= 0.5:
        warnings.warn(f"dt*max|potential| = {abs(dt) * peak_pot:.3g} >= 0.5; nonlinear phase is under-resolved",
                      RuntimeWarning, stacklevel=2)
    record(state, force_checkpoint=True)

    u = state.u.copy()
    v = state.v.copy()

    def finish(verdict, uu, vv, t):
        final = dataclasses.replace(state, u=uu, v=vv, time=t)
        traj.verdict = verdict
        traj.final_state = final
        if final.is_finite():
            record(final, force_checkpoint=True)
        return traj

    if first.max_amplitude > a_bound:
        return finish(Verdict(VerdictKind.BLOWUP_DETECTED, t0, "initial amplitude above resolvability bound"),
                      u, v, t0)
    if not first.tail_fraction <= TAIL_THRESHOLD:
        return finish(Verdict(VerdictKind.RESOLUTION_LOSS, t0, "initial spectral tail above threshold"),
                      u, v, t0)

    half = 0.5 * dt
    _kernels.nonlinear_phase(u, v, half, beta)
    for s in range(1, n_steps + 1):
        t_prev = t0 + (s - 1) * dt
        U = sfft.fftn(u, norm="ortho", workers=w, overwrite_x=True)
        V = sfft.fftn(v, norm="ortho", workers=w, overwrite_x=True)
        # (U, V) is the half-kicked state at t_prev; kicks leave |u|, |v| alone
        # but do move spectral weight, so this is a split-scheme view of t_prev
        tu, su = _kernels.tail_power(U, kinf2, cut2)
        tv, sv = _kernels.tail_power(V, kinf2, cut2)
        total = su + sv
        kin = (_kernels.weighted_power(U, gk2) + _kernels.weighted_power(V, gk2)) * g.cell_volume
        halt = None
        if not (math.isfinite(total) and math.isfinite(kin)):
            halt = Verdict(VerdictKind.RESOLUTION_LOSS, t_prev, "non-finite field")
        elif kin > config.blowup_kinetic_factor * kinetic0:
            halt = Verdict(VerdictKind.BLOWUP_DETECTED, t_prev,
                           f"kinetic {kin:.6g} > {config.blowup_kinetic_factor:g} x initial {kinetic0:.6g}")
        elif total > 0 and (tu + tv) / total > TAIL_THRESHOLD:
            halt = Verdict(VerdictKind.RESOLUTION_LOSS, t_prev,
                           f"spectral tail fraction {(tu + tv) / total:.3g} > {TAIL_THRESHOLD:g}")
        if halt is not None:
            u = sfft.ifftn(U, norm="ortho", workers=w)
            v = sfft.ifftn(V, norm="ortho", workers=w)
            if halt.kind is not VerdictKind.RESOLUTION_LOSS or math.isfinite(total):
                _kernels.nonlinear_phase(u, v, -half, beta)
            return finish(halt, u, v, t_prev)

        U *= mult
        V *= mult
        u = sfft.ifftn(U, norm="ortho", workers=w, overwrite_x=True)
        v = sfft.ifftn(V, norm="ortho", workers=w, overwrite_x=True)
        t_now = t0 + s * dt
        at_report = s % config.report_every == 0 or s == n_steps
        peak = _kernels.nonlinear_phase(u, v, half, beta)
        amp = math.sqrt(peak) if peak >= 0 else float("nan")
        if amp > a_bound:
            return finish(Verdict(VerdictKind.BLOWUP_DETECTED, t_now,
                                  f"peak amplitude {amp:.6g} > bound {a_bound:.6g}"), u, v, t_now)
        if at_report:
            cur = dataclasses.replace(state, u=u.copy(), v=v.copy(), time=t_now)
            record(cur, force_checkpoint=(s == n_steps))
        if s < n_steps:
            _kernels.nonlinear_phase(u, v, half, beta)

    t_final = t0 + n_steps * dt
    final = dataclasses.replace(state, u=u, v=v, time=t_final)
    if not final.is_finite():
        traj.verdict = Verdict(VerdictKind.RESOLUTION_LOSS, t_final, "non-finite field")
    else:
        traj.verdict = Verdict(VerdictKind.REACHED_T_END, t_final)
    traj.final_state = final
    return traj


# ------------------------------------------------------------------ persistence

def write_trajectory(traj: Trajectory, out_dir) -> Path:
    """invariants.csv, monitors.csv, verdict.json and checkpoints/ under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_reports_csv(traj.reports, out / "invariants.csv")
    io.write_rows_csv(out / "monitors.csv", Snapshot.MONITOR_HEADER,
                      [s.monitor_row() for s in traj.snapshots])
    ck_names = []
    if traj.checkpoints:
        (out / "checkpoints").mkdir(exist_ok=True)
        for i, st in enumerate(traj.checkpoints):
            name = f"checkpoint_{i:04d}"
            io.write_snapshot(st, out / "checkpoints" / name)
            ck_names.append(name)
    io.write_json(out / "verdict.json", {
        "verdict": traj.verdict.to_dict() if traj.verdict else None,
        "grid": {"n_per_axis": traj.grid.n_per_axis, "box_length": traj.grid.box_length},
        "beta": traj.beta,
        "config": traj.config.to_dict(),
        "checkpoints": ck_names,
    })
    if traj.final_state is not None and traj.final_state.is_finite():
        io.write_snapshot(traj.final_state, out / "final")
    return out


def read_trajectory(path) -> Trajectory:
    d = Path(path)
    meta = io.read_json(d / "verdict.json")
    grid = make_grid(meta["grid"]["n_per_axis"], meta["grid"]["box_length"])
    reports = io.read_reports_csv(d / "invariants.csv")
    _, rows = io.read_rows_csv(d / "monitors.csv")
    snaps = []
    for rep, row in zip(reports, rows):
        t, l4u, l4v, l5u, l5v, amp, tail = (float(x) for x in row)
        snaps.append(Snapshot(t, rep, (l4u, l4v), (l5u, l5v), amp, tail))
    checkpoints = [io.read_snapshot(d / "checkpoints" / n) for n in meta.get("checkpoints", [])]
    final = io.read_snapshot(d / "final") if (d / "final.json").exists() else None
    return Trajectory(
        grid=grid,
        beta=float(meta["beta"]),
        config=EvolutionConfig(**meta["config"]),
        snapshots=snaps,
        checkpoints=checkpoints,
        verdict=Verdict.from_dict(meta["verdict"]) if meta.get("verdict") else None,
        final_state=final,
    )


# ------------------------------------------------------------------ virial

def _smootherstep(t: np.ndarray):
    """S(t) = 126t^5 - 420t^6 + 540t^7 - 315t^8 + 70t^9 and its first four derivatives.

    S rises from 0 to 1 on [0, 1] with derivatives 1..4 vanishing at both ends.
    """
    t = np.clip(t, 0.0, 1.0)
    c = np.array([126.0, -420.0, 540.0, -315.0, 70.0])
    pw = np.arange(5, 10)
    out = []
    for d in range(5):
        coef = c.copy()
        for j in range(d):
            coef = coef * (pw - j)
        p = pw - d
        out.append(sum(cf * t**pk for cf, pk in zip(coef, p)))
    return out


@dataclass(frozen=True)
class Centered:
    """|x - c|^2 inside r_cut, rolled off smoothly to 0 outside (within the box)."""

    r_cut: float

    def support(self, grid: Grid) -> tuple[float, float]:
        half = grid.center
        if not 0 < self.r_cut < half:
            raise ValueError(f"r_cut must lie in (0, L/2) = (0, {half})")
        return self.r_cut, self.r_cut + min(self.r_cut, half - self.r_cut)

    def localization_radius(self, grid: Grid) -> float:
        return self.r_cut


@dataclass(frozen=True)
class Truncated:
    """R^2 zeta(x/R) with zeta = |y|^2 for |y| <= 1 and 0 for |y| >= 2."""

    radius: float

    def support(self, grid: Grid) -> tuple[float, float]:
        if not 0 < 2 * self.radius <= grid.center:
            raise ValueError(f"2R must lie in (0, L/2] = (0, {grid.center}]")
        return self.radius, 2.0 * self.radius

    def localization_radius(self, grid: Grid) -> float:
        return 2.0 * self.radius


def radial_weight(r: np.ndarray, a: float, b: float):
    """g = r^2 chi(r) with chi = 1 - S((r - a)/(b - a)); returns g, g', g'/r, g'', g''', g'''/r, g''''."""
    width = b - a
    S = _smootherstep((r - a) / width)
    chi = 1.0 - S[0]
    d1, d2, d3, d4 = (-S[k] / width**k for k in range(1, 5))
    g = r**2 * chi
    g1 = 2 * r * chi + r**2 * d1
    g1_r = 2 * chi + r * d1
    g2 = 2 * chi + 4 * r * d1 + r**2 * d2
    g3 = 6 * d1 + 6 * r * d2 + r**2 * d3
    safe = np.where(r > 0, r, 1.0)
    g3_r = np.where(r > 0, 6 * d1 / safe, 0.0) + 6 * d2 + r * d3
    g4 = 12 * d2 + 8 * r * d3 + r**2 * d4
    return g, g1, g1_r, g2, g3, g3_r, g4


@dataclass(frozen=True)
class VirialReport:
    v: float
    v_prime: float
    v_double_prime: float
    outside_fraction: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def virial(state: SystemState, weight, tol: float = LOCALIZATION_TOL) -> VirialReport:
    """Localized virial V, V' and V'' for a radial weight about the box centre."""
    g = state.grid
    a, b = weight.support(g)
    r = g.radius
    dens = state.u.real**2 + state.u.imag**2 + state.v.real**2 + state.v.imag**2
    total = float(np.sum(dens))
    outside = float(np.sum(dens[r > weight.localization_radius(g)])) / total if total > 0 else 0.0
    if outside >= tol:
        raise ValueError(
            f"mass fraction {outside:.3g} outside r={weight.localization_radius(g):.3g} exceeds {tol:g}")
    phi, g1, g1_r, g2, g3, g3_r, g4 = radial_weight(r, a, b)
    lap = g2 + 2 * g1_r
    bilap = g4 + 4 * g3_r
    X, Y, Z = g.offsets()
    safe = np.where(r > 0, r, 1.0)
    beta = float(state.beta)

    v_val = integrate(phi * dens, g)
    v1 = 0.0
    hess = 0.0
    for f in (state.u, state.v):
        gx, gy, gz = gradient(f, g)
        x_grad = X * gx + Y * gy + Z * gz  # x . grad f
        v1 += 2.0 * integrate(g1_r * np.imag(x_grad * np.conj(f)), g)
        radial_sq = np.where(r > 0, np.abs(x_grad / safe) ** 2, 0.0)
        grad_sq = np.abs(gx) ** 2 + np.abs(gy) ** 2 + np.abs(gz) ** 2
        hess += integrate(g1_r * grad_sq + (g2 - g1_r) * radial_sq, g)
    au = np.abs(state.u) ** 2
    av = np.abs(state.v) ** 2
    quart = au * au + 2.0 * beta * au * av + av * av
    v2 = 4.0 * hess - integrate(bilap * dens, g) - integrate(lap * quart, g)
    return VirialReport(v_val, v1, v2, outside)
