"""Scalar functionals of a state and the threshold sets built from them."""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from nls2 import _kernels
from nls2.grid import SystemState, integrate, to_spectral

BORDERLINE_RTOL = 1e-9


@dataclass(frozen=True)
class InvariantReport:
    mass: float
    momentum: tuple[float, float, float]
    energy: float
    kinetic: float
    quartic: float
    s_value: float
    j_value: float
    k_value: float
    time: float

    CSV_HEADER = ("time", "mass", "Fx", "Fy", "Fz", "energy", "kinetic", "quartic", "S", "J", "K")

    def csv_row(self) -> list[float]:
        return [self.time, self.mass, *self.momentum, self.energy, self.kinetic,
                self.quartic, self.s_value, self.j_value, self.k_value]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["momentum"] = list(self.momentum)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "InvariantReport":
        d = dict(d)
        d["momentum"] = tuple(d["momentum"])
        return cls(**d)

    @classmethod
    def from_csv_row(cls, row) -> "InvariantReport":
        t, m, fx, fy, fz, e, a, q, s, j, k = (float(x) for x in row)
        return cls(m, (fx, fy, fz), e, a, q, s, j, k, t)


@dataclass(frozen=True)
class GroundStateConstants:
    """Functionals of a ground state (P, Q); they set every threshold."""

    mass_gs: float
    kinetic_gs: float
    energy_gs: float
    quartic_gs: float
    j0: float
    kgn: float

    @property
    def me_threshold(self) -> float:
        return self.mass_gs * self.energy_gs

    @property
    def ma_threshold(self) -> float:
        return self.mass_gs * self.kinetic_gs

    @property
    def nehari_level(self) -> float:
        """m = 4 / (3 sqrt(3) K_GN), reported but not independently checked."""
        return 4.0 / (3.0 * math.sqrt(3.0) * self.kgn)

    @classmethod
    def from_values(cls, mass, kinetic, quartic) -> "GroundStateConstants":
        energy = 0.5 * kinetic - 0.25 * quartic
        return cls(
            mass_gs=mass,
            kinetic_gs=kinetic,
            energy_gs=energy,
            quartic_gs=quartic,
            j0=energy + 0.5 * mass,
            kgn=4.0 / (3.0 * math.sqrt(mass * kinetic)),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["me_threshold"] = self.me_threshold
        d["ma_threshold"] = self.ma_threshold
        d["nehari_level"] = self.nehari_level
        return d


class Classification(str, enum.Enum):
    GLOBAL_AND_SCATTERS = "GlobalAndScatters"
    BLOWS_UP_IF_RADIAL = "BlowsUpIfRadial"
    ABOVE_THRESHOLD = "AboveThreshold"


def mass(state: SystemState) -> float:
    u, v = state.u, state.v
    return integrate(u.real**2 + u.imag**2 + v.real**2 + v.imag**2, state.grid)


def _spectral_moments(state: SystemState):
    """Kinetic and momentum from the unitary spectra (Parseval form of the gradient integrals)."""
    g = state.grid
    U = to_spectral(state.u)
    V = to_spectral(state.v)
    pu = U.real**2 + U.imag**2
    pv = V.real**2 + V.imag**2
    p = pu + pv
    kinetic = float(np.sum(g.grad_k_squared * p)) * g.cell_volume
    k = g.deriv_wavenumbers
    mom = []
    for ax, other in ((0, (1, 2)), (1, (0, 2)), (2, (0, 1))):
        marg = p.sum(axis=other)
        mom.append(float(np.dot(k, marg)) * g.cell_volume)
    return kinetic, tuple(mom)


def momentum(state: SystemState) -> tuple[float, float, float]:
    return _spectral_moments(state)[1]


def kinetic(state: SystemState) -> float:
    return _spectral_moments(state)[0]


def quartic(state: SystemState) -> float:
    """Integral of |u|^4 + 2 beta |uv|^2 + |v|^4."""
    return _kernels.quartic_sum(state.u, state.v, float(state.beta)) * state.grid.cell_volume


def energy(state: SystemState) -> float:
    return 0.5 * kinetic(state) - 0.25 * quartic(state)


def s_functional(state: SystemState) -> float:
    return 8.0 * kinetic(state) - 6.0 * quartic(state)


def j_functional(state: SystemState) -> float:
    return energy(state) + 0.5 * mass(state)


def k_functional(state: SystemState) -> float:
    return 2.0 * kinetic(state) - 1.5 * quartic(state)


def invariant_report(state: SystemState) -> InvariantReport:
    m = mass(state)
    a, f = _spectral_moments(state)
    q = quartic(state)
    e = 0.5 * a - 0.25 * q
    return InvariantReport(
        mass=m,
        momentum=f,
        energy=e,
        kinetic=a,
        quartic=q,
        s_value=8.0 * a - 6.0 * q,
        j_value=e + 0.5 * m,
        k_value=2.0 * a - 1.5 * q,
        time=state.time,
    )


def gn_ratio(state: SystemState) -> float:
    """Phi / (M^1/2 A^3/2); bounded above by K_GN for every nonzero state."""
    m = mass(state)
    a = kinetic(state)
    if m <= 0.0 or a <= 0.0:
        raise ValueError("GN ratio is undefined for the zero state")
    return quartic(state) / (math.sqrt(m) * a**1.5)


def _products(state, report=None):
    r = report if report is not None else invariant_report(state)
    return r.mass * r.energy, r.mass * r.kinetic, r


def in_set_K(state: SystemState, gs: GroundStateConstants, report=None) -> bool:
    me, ma, _ = _products(state, report)
    return me < gs.me_threshold and ma < gs.ma_threshold


def in_set_Kplus(state: SystemState, gs: GroundStateConstants, report=None) -> bool:
    r = report if report is not None else invariant_report(state)
    return r.j_value < gs.j0 and r.k_value >= 0.0


def classify(state: SystemState, gs: GroundStateConstants, report=None) -> Classification:
    if not state.beta > 0:
        raise ValueError("classification needs beta > 0")
    me, ma, _ = _products(state, report)
    if me < gs.me_threshold and ma < gs.ma_threshold:
        return Classification.GLOBAL_AND_SCATTERS
    if me < gs.me_threshold and ma > gs.ma_threshold:
        return Classification.BLOWS_UP_IF_RADIAL
    return Classification.ABOVE_THRESHOLD


def borderline(state: SystemState, gs: GroundStateConstants, report=None, rtol=BORDERLINE_RTOL) -> bool:
    """True when M*E or M*A sits within ``rtol`` (relative) of its threshold."""
    me, ma, _ = _products(state, report)
    return (abs(me - gs.me_threshold) <= rtol * abs(gs.me_threshold)
            or abs(ma - gs.ma_threshold) <= rtol * abs(gs.ma_threshold))
