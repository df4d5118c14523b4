"""Numerical toolkit for the 3D coupled cubic NLS system

    i u_t + Δu + (|u|^2 + β|v|^2) u = 0,
    i v_t + Δv + (|v|^2 + β|u|^2) v = 0,

on a periodic box: ground states, split-step evolution, conserved and
variational functionals, threshold classification and scattering diagnostics.
"""
from nls2._kernels import BACKEND
from nls2.grid import Grid, SystemState, make_grid

__version__ = "0.1.0"

__all__ = ["BACKEND", "Grid", "SystemState", "make_grid", "__version__"]
