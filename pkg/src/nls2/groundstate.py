"""Radial ground states of the coupled elliptic system.

    -P'' - (2/r) P' + P = (P^2 + beta Q^2) P
    -Q'' - (2/r) Q' + Q = (Q^2 + beta P^2) Q

Both unknowns are carried as w = r*P on a uniform mesh of [0, r_max] with
w(0) = w(r_max) = 0. In that variable the radial Laplacian becomes d^2/dr^2,
which the type-I discrete sine transform diagonalises; odd reflection at both
ends keeps the sine expansion spectrally accurate.
"""
from __future__ import annotations

import dataclasses
import enum
import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.integrate import solve_ivp

from nls2 import functionals
from nls2.functionals import GroundStateConstants
from nls2.grid import Grid, SystemState, embed_radial, make_grid, to_physical, to_spectral

log = logging.getLogger(__name__)

DEFAULT_RADIAL_POINTS = 4096
DEFAULT_R_MAX = 16.0
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10000
STAGNATION_WINDOW = 200
# n=64 at L=16 resolves the peak only to ~1e-3 in the quartic integral
REFERENCE_GRID = (128, 16.0)


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class Method(str, enum.Enum):
    FIXED_POINT = "FixedPointRenormalization"
    IMAGINARY_TIME = "ImaginaryTime"


@dataclass(frozen=True)
class RadialProfile:
    radii: np.ndarray
    samples: np.ndarray
    beta: float

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        s = np.asarray(self.samples, dtype=float)
        if r.shape != s.shape or r.ndim != 1:
            raise ValueError("radii and samples must be 1-D arrays of equal length")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise ValueError("radii must start at 0 and increase strictly")
        if not np.isfinite(s).all():
            raise ValueError("profile samples must be finite")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "samples", s)

    @property
    def amplitude(self) -> float:
        return float(self.samples[0])

    def scaled(self, c: float) -> "RadialProfile":
        return RadialProfile(self.radii, c * self.samples, self.beta)


@dataclass(frozen=True)
class PohozaevReport:
    a_minus_3m: float
    phi_minus_4m: float
    e_minus_half_m: float
    j_minus_m: float
    k_value: float
    mass_gs: float

    def max_relative(self) -> float:
        vals = (self.a_minus_3m, self.phi_minus_4m, self.e_minus_half_m, self.j_minus_m, self.k_value)
        return max(abs(x) for x in vals) / self.mass_gs

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class GroundState:
    p_profile: RadialProfile
    q_profile: RadialProfile
    constants: GroundStateConstants
    residual: float
    method: Method
    iterations: int = 0
    renormalization: float = 1.0

    @property
    def beta(self) -> float:
        return self.p_profile.beta

    def embed(self, grid: Grid, amplitude: float = 1.0) -> SystemState:
        """amplitude * (P, Q) sampled on ``grid`` (radially about the box centre)."""
        u = embed_radial(self.p_profile, grid)
        v = u.copy() if self.q_profile is self.p_profile else embed_radial(self.q_profile, grid)
        return SystemState(amplitude * u, amplitude * v, grid, 0.0, self.beta)

    def constants_on(self, grid: Grid) -> GroundStateConstants:
        return constants_from_state(self.embed(grid))

    def scaled(self, c: float, grid: Grid | None = None) -> "GroundState":
        """Profiles multiplied by ``c`` with constants re-evaluated (no longer a solution)."""
        p = self.p_profile.scaled(c)
        q = self.q_profile.scaled(c)
        g = grid or make_grid(*REFERENCE_GRID)
        consts = constants_from_state(
            SystemState(embed_radial(p, g), embed_radial(q, g), g, 0.0, self.beta))
        return dataclasses.replace(self, p_profile=p, q_profile=q, constants=consts)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "method": self.method.value,
            "residual": self.residual,
            "iterations": self.iterations,
            "renormalization": self.renormalization,
            "p0": self.p_profile.amplitude,
            "q0": self.q_profile.amplitude,
            "constants": self.constants.to_dict(),
        }


def constants_from_state(state: SystemState) -> GroundStateConstants:
    m = functionals.mass(state)
    if m <= 0.0:
        raise ValueError("zero profile is not a ground state")
    return GroundStateConstants.from_values(m, functionals.kinetic(state), functionals.quartic(state))


# ----------------------------------------------------------------- radial solver

class _SineBasis:
    """DST-I on the interior nodes of a uniform mesh of [0, r_max]."""

    def __init__(self, radial_points, r_max):
        if radial_points < 16:
            raise ValueError("need at least 16 radial points")
        self.radii = np.linspace(0.0, r_max, radial_points)
        self.r = self.radii[1:-1]
        m = np.arange(1, radial_points - 1)
        self.k = m * np.pi / r_max
        self.symbol = self.k**2 + 1.0
        self.r_max = r_max

    def fwd(self, w):
        return sfft.dst(w, type=1)

    def inv(self, W):
        return sfft.idst(W, type=1)

    def value_at_origin(self, w):
        # P(0) = w'(0) from the sine series
        W = self.fwd(w)
        return float(np.sum(W * self.k) / (len(self.r) + 1))

    def to_profile(self, w, beta):
        samples = np.concatenate(([self.value_at_origin(w)], w / self.r, [0.0]))
        return RadialProfile(self.radii, samples, beta)


def _nonlinearity(wp, wq, r, beta):
    r2 = r * r
    return wp * (wp**2 + beta * wq**2) / r2, wq * (wq**2 + beta * wp**2) / r2


def _strong_residual(basis, wp, wq, beta):
    npv, nqv = _nonlinearity(wp, wq, basis.r, beta)
    rp = basis.inv(basis.symbol * basis.fwd(wp)) - npv
    rq = basis.inv(basis.symbol * basis.fwd(wq)) - nqv
    return float(max(np.abs(rp / basis.r).max(), np.abs(rq / basis.r).max()))


def solve_ground_state(beta: float, radial_points: int = DEFAULT_RADIAL_POINTS,
                       r_max: float = DEFAULT_R_MAX, tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER, method: Method | str = Method.FIXED_POINT,
                       reference_grid: Grid | None = None, step: float = 0.5) -> GroundState:
    """Symmetric-branch ground state (P = Q) of the radial elliptic system.

    The default method is Petviashvili's spectral renormalisation: iterate
    w <- S^(3/2) L^{-1} N(w) with S = <w, L w> / <w, N(w)>, which removes the
    unstable direction of the plain fixed-point map. ``ImaginaryTime`` instead
    takes preconditioned gradient steps of size ``step`` and projects back onto
    the Nehari manifold after each one.

    Parameters
    ----------
    beta : float
        Coupling, must be positive.
    radial_points, r_max : int, float
        Uniform radial mesh on [0, r_max].
    tol : float
        Convergence threshold on the relative change of one iteration and on
        |S - 1|. Must not exceed 1e-10.
    reference_grid : Grid, optional
        3-D grid used to evaluate the constants; defaults to 128^3 on L = 16.

    Raises
    ------
    ConvergenceError
        No convergence in ``max_iter`` iterations, no halving of the relative
        change for ``STAGNATION_WINDOW`` iterations, or collapse to zero.
    """
    method = Method(method) if not isinstance(method, Method) else method
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if r_max < 12:
        raise ValueError("r_max must be at least 12")
    if not 0 < tol <= 1e-10:
        raise ValueError("tol must lie in (0, 1e-10]")
    basis = _SineBasis(radial_points, r_max)
    r = basis.r
    seed = 3.0 / math.sqrt(1.0 + beta) * r * np.exp(-0.5 * r**2)
    wp, wq = seed.copy(), seed.copy()
    scale0 = float(np.abs(seed).max())
    S = float("nan")
    change = float("inf")
    best, best_it = float("inf"), 0
    for it in range(1, max_iter + 1):
        npv, nqv = _nonlinearity(wp, wq, r, beta)
        Wp, Wq = basis.fwd(wp), basis.fwd(wq)
        Np, Nq = basis.fwd(npv), basis.fwd(nqv)
        num = float(np.sum(basis.symbol * (Wp**2 + Wq**2)))
        den = float(np.sum(Wp * Np + Wq * Nq))
        if not den > 0 or not np.isfinite(num):
            raise ConvergenceError("trivial fixed point: iterate collapsed to zero", change, it)
        S = num / den
        if method is Method.FIXED_POINT:
            fac = S**1.5
            new_p = fac * basis.inv(Np / basis.symbol)
            new_q = fac * basis.inv(Nq / basis.symbol)
        else:
            new_p = (1.0 - step) * wp + step * basis.inv(Np / basis.symbol)
            new_q = (1.0 - step) * wq + step * basis.inv(Nq / basis.symbol)
            new_p, new_q = _nehari_project(basis, new_p, new_q, beta)
        peak = float(max(np.abs(new_p).max(), np.abs(new_q).max()))
        if peak < 1e-12 * scale0:
            raise ConvergenceError("trivial fixed point: iterate collapsed to zero", change, it)
        change = float(max(np.abs(new_p - wp).max(), np.abs(new_q - wq).max())) / peak
        wp, wq = new_p, new_q
        if change < tol and abs(S - 1.0) < max(tol, 1e-12):
            break
        if change < 0.5 * best:
            best, best_it = change, it
        elif it - best_it > STAGNATION_WINDOW:
            # stuck at the roundoff floor: tol is out of reach
            raise ConvergenceError(
                f"non-convergence after {it} iterations: relative change stagnated at "
                f"{change:.3e} (best {best:.3e}), above tol {tol:g}", change, it)
    else:
        raise ConvergenceError(
            f"non-convergence after {max_iter} iterations (last relative change {change:.3e}, "
            f"renormalisation {S!r})", change, max_iter)

    p = basis.to_profile(wp, beta)
    q = p if np.array_equal(wp, wq) else basis.to_profile(wq, beta)
    if p.amplitude <= 0 or q.amplitude <= 0:
        raise ConvergenceError("converged to a non-positive profile", change, it)
    residual = _strong_residual(basis, wp, wq, beta)
    grid = reference_grid or make_grid(*REFERENCE_GRID)
    g_u = embed_radial(p, grid)
    g_v = g_u if q is p else embed_radial(q, grid)
    consts = constants_from_state(SystemState(g_u, g_v, grid, 0.0, beta))
    log.info("ground state beta=%g: %d iterations, P(0)=%.12f, residual %.2e",
             beta, it, p.amplitude, residual)
    return GroundState(p, q, consts, residual, method, it, S)


def _nehari_project(basis, wp, wq, beta):
    npv, nqv = _nonlinearity(wp, wq, basis.r, beta)
    lin = float(np.sum(wp * basis.inv(basis.symbol * basis.fwd(wp)))
                + np.sum(wq * basis.inv(basis.symbol * basis.fwd(wq))))
    non = float(np.sum(wp * npv + wq * nqv))
    if not non > 0:
        raise ConvergenceError("trivial fixed point: iterate collapsed to zero")
    s = math.sqrt(lin / non)
    return s * wp, s * wq


def pohozaev_report(gs: GroundState) -> PohozaevReport:
    c = gs.constants
    if not (gs.p_profile.samples.any() or gs.q_profile.samples.any()) or c.mass_gs <= 0:
        raise ValueError("zero profile is not a ground state")
    m = c.mass_gs
    return PohozaevReport(
        a_minus_3m=c.kinetic_gs - 3.0 * m,
        phi_minus_4m=c.quartic_gs - 4.0 * m,
        e_minus_half_m=c.energy_gs - 0.5 * m,
        j_minus_m=c.j0 - m,
        k_value=2.0 * c.kinetic_gs - 1.5 * c.quartic_gs,
        mass_gs=m,
    )


# ---------------------------------------------------------------- shooting oracle

def _shoot(a, r_end=40.0, r0=1e-4):
    """Integrate -R'' - 2R'/r + R - R^3 = 0 from R(0) = a, R'(0) = 0."""
    c2 = (a - a**3) / 6.0
    c4 = c2 * (1.0 - 3.0 * a * a) / 20.0
    y0 = [a + c2 * r0**2 + c4 * r0**4, 2 * c2 * r0 + 4 * c4 * r0**3]

    def rhs(r, y):
        return [y[1], -2.0 * y[1] / r + y[0] - y[0] ** 3]

    def crosses_zero(r, y):
        return y[0]
    crosses_zero.terminal = True
    crosses_zero.direction = -1

    def turns_up(r, y):
        return y[1]
    turns_up.terminal = True
    turns_up.direction = 1

    return solve_ivp(rhs, (r0, r_end), y0, method="DOP853", rtol=1e-13, atol=1e-16,
                     events=[crosses_zero, turns_up], dense_output=True)


def _overshoots(a):
    return len(_shoot(a).t_events[0]) > 0


@functools.lru_cache(maxsize=8)
def scalar_ground_amplitude(lo: float = 1.0, hi: float = 10.0, width: float = 1e-10) -> float:
    """R(0) of the positive radial solution of -Delta R + R - R^3 = 0, by bisection."""
    if _overshoots(lo) or not _overshoots(hi):
        raise ValueError(f"shooting bracket [{lo}, {hi}] does not enclose the ground state")
    while hi - lo >= width:
        mid = 0.5 * (lo + hi)
        if _overshoots(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def shooting_oracle(beta: float, radial_points: int = DEFAULT_RADIAL_POINTS,
                    r_max: float = DEFAULT_R_MAX, bracket=(1.0, 10.0), width: float = 1e-10,
                    match_level: float = 1e-3) -> RadialProfile:
    """Symmetric-branch profile (1+beta)^(-1/2) R from a shooting computation.

    The shot trajectory is trusted until R falls to ``match_level * R(0)``;
    beyond that the linearised Dirichlet solution sinh(r_max - r)/r carries the
    tail to zero at ``r_max`` (the cubic term is below 1e-6 relative there).
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    a = scalar_ground_amplitude(*bracket, width)
    sol = _shoot(a)
    radii = np.linspace(0.0, r_max, radial_points)
    r_stop = sol.t[-1]
    grid_r = radii[(radii > 0) & (radii <= r_stop)]
    vals = sol.sol(grid_r)[0]
    below = np.nonzero(vals < match_level * a)[0]
    if not len(below):
        raise ValueError("shot did not decay to the matching level")
    r_m = grid_r[below[0]]
    R_m = float(sol.sol(r_m)[0])
    samples = np.zeros_like(radii)
    samples[0] = a
    core = (radii > 0) & (radii < r_m)
    samples[core] = sol.sol(radii[core])[0]
    tail = radii >= r_m
    rt = radii[tail]
    samples[tail] = R_m * (r_m / rt) * np.sinh(r_max - rt) / math.sinh(r_max - r_m)
    return RadialProfile(radii, samples / math.sqrt(1.0 + beta), beta)


# ------------------------------------------------------ grid-consistent ground state

def discrete_ground_state(gs: GroundState, grid: Grid, tol: float = 1e-13,
                          max_iter: int = 500) -> SystemState:
    """Stationary state of the pseudospectral semi-discretisation on ``grid``.

    Runs the same renormalised fixed-point map on the periodic grid, seeded by
    the embedded radial profiles. On coarse grids this differs from the
    embedded radial solution by the spatial discretisation error, and unlike
    it solves the discrete equations to ``tol``.
    """
    state = gs.embed(grid)
    u, v, beta = state.u, state.v, gs.beta
    sym = grid.k_squared + 1.0
    change = float("inf")
    for _ in range(max_iter):
        au, av = np.abs(u) ** 2, np.abs(v) ** 2
        U, V = to_spectral(u), to_spectral(v)
        NU = to_spectral((au + beta * av) * u)
        NV = to_spectral((av + beta * au) * v)
        S = float(np.sum(sym * (np.abs(U) ** 2 + np.abs(V) ** 2))
                  / np.sum((np.conj(U) * NU + np.conj(V) * NV).real))
        fac = S**1.5
        new_u = fac * to_physical(NU / sym)
        new_v = fac * to_physical(NV / sym)
        change = float(max(np.abs(new_u - u).max(), np.abs(new_v - v).max()))
        u, v = new_u, new_v
        if change < tol * np.abs(u).max():
            break
    else:
        raise ConvergenceError(f"grid ground state did not converge (change {change:.2e})", change, max_iter)
    return SystemState(u.real.astype(np.complex128), v.real.astype(np.complex128), grid, 0.0, beta)
