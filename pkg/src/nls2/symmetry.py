"""Scaling and Galilean transforms of grid states."""
from __future__ import annotations

import dataclasses

import numpy as np

from nls2 import functionals
from nls2.grid import Grid, SystemState, make_grid, to_physical, to_spectral


def rescale(state: SystemState, lam: float) -> SystemState:
    """(lam u(lam x), lam v(lam x)) on a box of side L/lam with the same point count.

    With the box shrunk by ``lam`` the new sample points are exactly the old
    ones mapped by x -> x/lam, so the transform is a relabelling: no
    interpolation and no loss of resolution (spectral content keeps its
    position relative to the Nyquist limit). The solution time maps as
    t -> t / lam^2, since u_lam(x, s) = lam u(lam x, lam^2 s).
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    g = state.grid
    new_grid = make_grid(g.n_per_axis, g.box_length / lam)
    return SystemState(lam * state.u, lam * state.v, new_grid, state.time / lam**2, state.beta)


def snap_to_lattice(xi0, grid: Grid) -> np.ndarray:
    """Round each component of xi0 to the nearest multiple of 2*pi/L."""
    dk = 2.0 * np.pi / grid.box_length
    return np.round(np.asarray(xi0, dtype=float) / dk) * dk


def boost(state: SystemState, xi0, t: float = 0.0, snap: bool = True) -> SystemState:
    """Galilean image exp(i(x.xi0 - t|xi0|^2)) (u, v)(x - 2 t xi0).

    ``x`` is measured from the box centre. With ``snap`` (default) xi0 is moved
    to the nearest lattice wavenumber so the phase factor is periodic; off the
    lattice the factor jumps across the box faces, which is harmless only for
    data that vanishes there.
    """
    g = state.grid
    xi = snap_to_lattice(xi0, g) if snap else np.asarray(xi0, dtype=float)
    if xi.shape != (3,):
        raise ValueError("xi0 must have three components")
    if np.any(np.abs(xi) >= g.k_nyquist):
        raise ValueError("|xi0| components must lie below the grid Nyquist wavenumber")
    X, Y, Z = g.offsets()
    phase = np.exp(1j * (X * xi[0] + Y * xi[1] + Z * xi[2] - t * float(xi @ xi)))
    u, v = state.u, state.v
    if t != 0.0:
        shift = 2.0 * t * xi
        k = g.wavenumbers
        mult = (np.exp(-1j * g.axis_array(k, 0) * shift[0])
                * np.exp(-1j * g.axis_array(k, 1) * shift[1])
                * np.exp(-1j * g.axis_array(k, 2) * shift[2]))
        u = to_physical(mult * to_spectral(u))
        v = to_physical(mult * to_spectral(v))
    return dataclasses.replace(state, u=phase * u, v=phase * v)


def zero_momentum_boost(state: SystemState) -> tuple[SystemState, np.ndarray]:
    """Boost by xi0 = -F/M so the output carries no momentum.

    xi0 is used exactly (not snapped), so the data should be localised away
    from the box faces.
    """
    m = functionals.mass(state)
    if not m > 0:
        raise ValueError("zero-mass state has no momentum frame")
    xi0 = -np.asarray(functionals.momentum(state)) / m
    if not np.any(xi0):
        return state.copy(), xi0
    return boost(state, xi0, 0.0, snap=False), xi0
