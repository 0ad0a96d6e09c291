"""Linearised Cahn-Hilliard half step for the pair (phi, m).

The unknown vector is ``[phi; m]`` on one P2 scalar space. Rows are ordered
``[chemical-potential equation; phase evolution equation]`` so that a strong
Dirichlet condition on phi replaces rows of the chemical-potential equation
and leaves the evolution rows (and with them mass conservation) untouched.

The transport term is assembled as ``-int phi (v . grad kappa)``, which is
equal to ``int (v . grad phi) kappa`` for solenoidal ``v`` vanishing on the
boundary and makes ``int phi`` exactly conserved for any discrete ``v``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import (
    FEFunction,
    apply_dirichlet,
    assemble_convection,
    assemble_load,
    assemble_mass,
    cached_form,
    default_order,
    get_quadrature,
)
from .linsolve import FactorCache, LinearSolveReport, SolverOptions, solve
from .materials import MaterialParams


@dataclass
class CHSubproblemInput:
    phi_n: FEFunction
    phi_guess: FEFunction
    v_guess: FEFunction
    dt: float
    params: MaterialParams
    phi_bc: str | float = "natural"  # "natural" or a Dirichlet value
    forcing: np.ndarray | None = None  # load vector of the evolution equation

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("time step must be positive")
        mesh = self.phi_n.space.mesh
        for f in (self.phi_guess, self.v_guess):
            if f.space.mesh is not mesh:
                raise ValueError("Cahn-Hilliard inputs live on different meshes")
        if self.phi_bc != "natural" and not isinstance(self.phi_bc, (int, float)):
            raise ValueError(f"phi_bc must be 'natural' or a number, got {self.phi_bc!r}")


def ch_matrix(inp: CHSubproblemInput):
    """Block matrix and right-hand side before boundary conditions."""
    prm = inp.params
    S = inp.phi_n.space
    M = cached_form(S, "mass")
    K = cached_form(S, "stiffness")
    # W'_lin(phi_g, phi) = (phi_g^2 - 1) phi
    quad = get_quadrature(S.mesh, default_order(S))
    Mw = assemble_mass(S, inp.phi_guess.at_quadrature(quad) ** 2 - 1.0)
    C = assemble_convection(S, inp.v_guess)
    g, eps, mob = prm.gamma, prm.epsilon, prm.mobility
    A = sp.bmat(
        [
            [(g / eps) * Mw + (g * eps) * K, -M],
            [(2.0 / inp.dt) * M - C.T, mob * K],
        ],
        format="csr",
    )
    rhs = np.zeros(2 * S.dof_count)
    rhs[S.dof_count :] = (2.0 / inp.dt) * (M @ inp.phi_n.coeffs)
    if inp.forcing is not None:
        rhs[S.dof_count :] += inp.forcing
    return A, rhs


def solve_ch_halfstep(inp: CHSubproblemInput, opts: SolverOptions | None = None, cache: FactorCache | None = None):
    """Solve for ``(phi, m)`` at the half step; returns ``(phi, m, report)``."""
    S = inp.phi_n.space
    A, rhs = ch_matrix(inp)
    if inp.phi_bc != "natural":
        dofs = S.boundary_scalar_dofs()
        A, rhs = apply_dirichlet(A, rhs, dofs, float(inp.phi_bc))
    x, report = solve(A, rhs, opts, subproblem="cahn-hilliard", cache=cache)
    n = S.dof_count
    return FEFunction(S, x[:n], "phi"), FEFunction(S, x[n:], "m"), report


def mms_forcing_phi(space, t: float, mms, order: int | None = None) -> np.ndarray:
    """Load vector ``int f_phi kappa`` of the manufactured phase forcing at time ``t``."""
    return assemble_load(space, lambda x, y: mms.forcing_phi(x, y, t), order)


def add_mms_forcing(rhs: np.ndarray, space, t: float, mms) -> np.ndarray:
    """Return ``rhs`` plus the manufactured phase forcing (evolution rows of a block vector,
    or the whole vector when it has the size of ``space``)."""
    f = mms_forcing_phi(space, t, mms)
    out = np.array(rhs, dtype=float, copy=True)
    if len(out) == len(f):
        return out + f
    out[space.dof_count :] += f
    return out


__all__ = [
    "CHSubproblemInput",
    "LinearSolveReport",
    "add_mms_forcing",
    "ch_matrix",
    "mms_forcing_phi",
    "solve_ch_halfstep",
]
