"""Periodic-box discretisation of R^3 and the spectral calculus on it.

Fields are plain ``complex128`` numpy arrays of shape ``(n, n, n)`` in
row-major (x, y, z) order. A :class:`Grid` carries the geometry; a
:class:`SystemState` bundles the pair (u, v) with its grid, time and coupling.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft
from scipy.interpolate import CubicSpline

from nls2 import _kernels


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [0, L)^3 with the box centre at (L/2, L/2, L/2)."""

    n_per_axis: int
    box_length: float

    @property
    def n(self) -> int:
        return self.n_per_axis

    @property
    def spacing(self) -> float:
        return self.box_length / self.n_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_per_axis,) * 3

    @property
    def center(self) -> float:
        return 0.5 * self.box_length

    @cached_property
    def coords(self) -> np.ndarray:
        return np.arange(self.n_per_axis) * self.spacing

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Per-axis wavenumbers 2*pi*m/L in FFT order; index n/2 is the Nyquist mode."""
        return 2.0 * np.pi * sfft.fftfreq(self.n_per_axis, d=self.spacing)

    @property
    def k_nyquist(self) -> float:
        return np.pi / self.spacing

    @cached_property
    def deriv_wavenumbers(self) -> np.ndarray:
        # Nyquist zeroed so odd derivatives of real fields stay real
        k = self.wavenumbers.copy()
        k[self.n_per_axis // 2] = 0.0
        return k

    def axis_array(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Broadcastable view of a 1-D per-axis array along ``axis``."""
        shape = [1, 1, 1]
        shape[axis] = self.n_per_axis
        return values.reshape(shape)

    @cached_property
    def k_squared(self) -> np.ndarray:
        """|k|^2 including the Nyquist mode (used by the Laplacian)."""
        k2 = self.wavenumbers**2
        return k2[:, None, None] + k2[None, :, None] + k2[None, None, :]

    @cached_property
    def grad_k_squared(self) -> np.ndarray:
        """Sum of squared derivative wavenumbers, consistent with :func:`gradient`."""
        k2 = self.deriv_wavenumbers**2
        return k2[:, None, None] + k2[None, :, None] + k2[None, None, :]

    def offsets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sparse broadcastable components of x - centre."""
        x = self.coords - self.center
        return x[:, None, None], x[None, :, None], x[None, None, :]

    @cached_property
    def radius(self) -> np.ndarray:
        X, Y, Z = self.offsets()
        return np.sqrt(X**2 + Y**2 + Z**2)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=np.complex128)


def make_grid(n_per_axis: int, box_length: float) -> Grid:
    n = int(n_per_axis)
    if n != n_per_axis or n < 8 or n & (n - 1):
        raise ValueError(f"n_per_axis must be a power of two >= 8, got {n_per_axis}")
    if not box_length > 0 or not np.isfinite(box_length):
        raise ValueError(f"box_length must be positive, got {box_length}")
    return Grid(n, float(box_length))


def _workers():
    return _kernels.num_threads()


def to_spectral(f: np.ndarray) -> np.ndarray:
    """Unitary 3-D DFT (``norm="ortho"``)."""
    return sfft.fftn(f, norm="ortho", workers=_workers())


def to_physical(F: np.ndarray) -> np.ndarray:
    return sfft.ifftn(F, norm="ortho", workers=_workers())


def spectral_power(F: np.ndarray, grid: Grid) -> float:
    """Spectral side of Parseval: sum |F|^2 times the cell volume."""
    return float(np.sum(F.real**2 + F.imag**2)) * grid.cell_volume


def gradient(f: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    F = to_spectral(f)
    k = grid.deriv_wavenumbers
    return tuple(to_physical(1j * grid.axis_array(k, ax) * F) for ax in range(3))


def laplacian(f: np.ndarray, grid: Grid) -> np.ndarray:
    return to_physical(-grid.k_squared * to_spectral(f))


def integrate(f: np.ndarray, grid: Grid) -> float:
    """Rectangle rule; spectrally accurate for smooth periodic integrands."""
    return float(np.sum(f)) * grid.cell_volume


def embed_radial(profile, grid: Grid) -> np.ndarray:
    """Sample a radial profile at |x - centre| by cubic-spline interpolation.

    ``profile`` needs ``radii`` (starting at 0) and ``samples``. Radii past
    the last sample map to zero, which is only allowed when the profile has
    decayed there.
    """
    r = np.asarray(profile.radii, dtype=float)
    s = np.asarray(profile.samples, dtype=float)
    if r[0] != 0.0 or np.any(np.diff(r) <= 0):
        raise ValueError("profile radii must start at 0 and increase strictly")
    needed = np.sqrt(3.0) * grid.center
    if r[-1] < needed and abs(s[-1]) > 1e-8:
        raise ValueError(
            f"profile ends at r={r[-1]:.3g} with value {s[-1]:.3g}; "
            f"it must reach r={needed:.3g} or decay first"
        )
    if not np.any(s):
        return grid.zeros()
    spline = CubicSpline(r, s, bc_type=((1, 0.0), "not-a-knot"))
    rad = grid.radius
    out = np.where(rad <= r[-1], spline(np.minimum(rad, r[-1])), 0.0)
    return out.astype(np.complex128)


@dataclass
class SystemState:
    """The pair (u, v) at one time, with coupling ``beta``."""

    u: np.ndarray
    v: np.ndarray
    grid: Grid
    time: float = 0.0
    beta: float = 1.0
    blowup_artifact: bool = field(default=False, compare=False)

    def __post_init__(self):
        self.u = np.ascontiguousarray(self.u, dtype=np.complex128)
        self.v = np.ascontiguousarray(self.v, dtype=np.complex128)
        if self.u.shape != self.grid.shape or self.v.shape != self.grid.shape:
            raise ValueError(f"fields must have shape {self.grid.shape}")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")

    def copy(self) -> "SystemState":
        return dataclasses.replace(self, u=self.u.copy(), v=self.v.copy())

    def scaled(self, c: float) -> "SystemState":
        """Amplitude multiple c*(u, v)."""
        return dataclasses.replace(self, u=c * self.u, v=c * self.v)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.u).all() and np.isfinite(self.v).all())
