"""Eulerian diffuse-interface fluid-structure interaction in 2D.

Finite-element solver for incompressible Navier-Stokes coupled with
Cahn-Hilliard phase separation and the transport of the left Cauchy-Green
tensor, advanced by a partitioned midpoint scheme with fixed-point
subiteration.
"""
from .materials import MaterialParams
from .mesh import Mesh, boundary_vertices, build_graded, build_uniform
from .state import FSISpaces, SimState, make_spaces

__version__ = "0.1.0"

__all__ = [
    "FSISpaces",
    "MaterialParams",
    "Mesh",
    "SimState",
    "boundary_vertices",
    "build_graded",
    "build_uniform",
    "make_spaces",
]
