"""Half step of the stabilised upper-convected transport of B.

The three stored components ``(B11, B12, B22)`` are solved together as one
block system; the velocity gradient couples them. Each component equation
is tested with its own scalar test function, which spans the same discrete
space as testing with symmetric tensors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import (
    FEFunction,
    assemble_convection,
    assemble_load,
    assemble_mass,
    cached_form,
    default_order,
    get_quadrature,
)
from .linsolve import FactorCache, LinearSolveError, SolverOptions, solve
from .materials import MaterialParams

IDENTITY = (1.0, 0.0, 1.0)


class StabilizationError(ValueError):
    """Raised when the tensor transport is configured without the stabilisation it needs."""


@dataclass
class BSubproblemInput:
    B_n: FEFunction
    v_guess: FEFunction
    phi_new: FEFunction
    dt: float
    params: MaterialParams
    forcing: np.ndarray | None = None
    allow_unstabilized: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("time step must be positive")
        mesh = self.B_n.space.mesh
        if self.v_guess.space.mesh is not mesh or self.phi_new.space.mesh is not mesh:
            raise ValueError("tensor transport inputs live on different meshes")
        if self.B_n.space.value_kind != "symtensor2":
            raise ValueError("B must live on a symmetric-tensor space")


def check_stabilization(params: MaterialParams) -> None:
    """A vanishing solid viscosity requires ``delta_stab > 0``."""
    if params.mu_s == 0.0 and params.delta_stab <= 0.0:
        raise StabilizationError(
            f"delta_stab must be positive when mu_s = 0 (g_f={params.g_f}, mu_s={params.mu_s}, "
            f"delta_stab={params.delta_stab})"
        )


def b_matrix(inp: BSubproblemInput):
    """Block matrix over ``(B11, B12, B22)`` and the matching right-hand side."""
    prm = inp.params
    T = inp.B_n.space
    P = T.scalar_space()
    quad = get_quadrature(P.mesh, default_order(P))
    phi = inp.phi_new.at_quadrature(quad)
    G = prm.G(phi)
    alpha = prm.alpha(phi)
    L = inp.v_guess.grad_at_quadrature(quad)  # (nt, nq, 2, 2)
    L11, L12, L21, L22 = L[..., 0, 0], L[..., 0, 1], L[..., 1, 0], L[..., 1, 1]

    def mass(w):
        return assemble_mass(P, w, order=quad.order)

    c = 2.0 / inp.dt
    base = mass(c * G + alpha) + assemble_convection(P, inp.v_guess, G, order=quad.order)
    if prm.delta_stab > 0.0:
        base = base + prm.delta_stab * cached_form(P, "stiffness")
    blocks = [
        [base - mass(2.0 * G * L11), mass(-2.0 * G * L12), None],
        [mass(-G * L21), base - mass(G * (L11 + L22)), mass(-G * L12)],
        [None, mass(-2.0 * G * L21), base - mass(2.0 * G * L22)],
    ]
    A = sp.bmat(blocks, format="csr")

    Bn = inp.B_n.at_quadrature(quad)  # (nt, nq, 3)
    load = c * G[..., None] * Bn + alpha[..., None] * np.asarray(IDENTITY)
    rhs = assemble_load(T, load, order=quad.order)
    if inp.forcing is not None:
        rhs = rhs + inp.forcing
    return A, rhs


def solve_b_halfstep(inp: BSubproblemInput, opts: SolverOptions | None = None, cache: FactorCache | None = None):
    """Solve for B at the half step; returns ``(B, report)``.

    Natural boundary conditions throughout. Linear-solver failures carry the
    ``(g_f, mu_s, delta_stab)`` triple since degeneracy depends on it.
    """
    prm = inp.params
    if not inp.allow_unstabilized:
        check_stabilization(prm)
    A, rhs = b_matrix(inp)
    try:
        x, report = solve(A, rhs, opts, subproblem="tensor-transport", cache=cache)
    except LinearSolveError as exc:
        raise LinearSolveError(
            f"{exc} (g_f={prm.g_f}, mu_s={prm.mu_s}, delta_stab={prm.delta_stab})",
            "tensor-transport",
            exc.report,
        ) from exc
    return FEFunction(inp.B_n.space, x, "B"), report


def mms_forcing_B(space, t: float, mms, order: int | None = None) -> np.ndarray:
    """Load vector of the manufactured tensor forcing at time ``t``."""

    def f(x, y):
        return np.stack(mms.forcing_B(x, y, t), axis=-1)

    return assemble_load(space, f, order)


def add_mms_forcing_b(rhs: np.ndarray, space, t: float, mms) -> np.ndarray:
    return np.asarray(rhs, dtype=float) + mms_forcing_B(space, t, mms)


def min_eigenvalue(B: FEFunction, order: int = 4) -> float:
    """Smallest eigenvalue of B over all quadrature points (monitor only)."""
    quad = get_quadrature(B.space.mesh, order)
    b = B.at_quadrature(quad)
    a, c, d = b[..., 0], b[..., 1], b[..., 2]
    lam = 0.5 * (a + d) - np.sqrt(0.25 * (a - d) ** 2 + c**2)
    return float(lam.min())
