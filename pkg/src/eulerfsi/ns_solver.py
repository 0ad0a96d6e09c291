"""Half step of the variable-density Navier-Stokes system (Taylor-Hood P2/P1).

Elastic and capillary stresses enter explicitly through the current iterates
of B and phi. The elastic stress is written as ``G(phi) (B - I)``; the
difference ``grad G(phi)`` is a gradient and is absorbed by the pressure, so
the computed pressure is the physical one shifted by ``-G(phi)``. This keeps
the unstrained state ``B = I`` free of spurious currents when ``G`` jumps
across the interface.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import (
    FEFunction,
    apply_dirichlet,
    assemble_convection,
    assemble_divergence,
    assemble_gradient_load,
    assemble_load,
    assemble_mass,
    assemble_vector_laplacian_and_symgrad,
    cached_form,
    default_order,
    get_quadrature,
)
from .linsolve import FactorCache, LinearSolveError, SolverOptions, solve
from .materials import MaterialParams


@dataclass
class NSSubproblemInput:
    v_n: FEFunction
    phi_n: FEFunction
    phi_new: FEFunction
    m_new: FEFunction
    B_new: FEFunction
    v_guess: FEFunction
    q_space: object
    dt: float
    params: MaterialParams
    forcing: np.ndarray | None = None  # extra momentum load vector
    boundary_velocity: object = None  # callable (x, y) -> (vx, vy); zero when None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("time step must be positive")
        mesh = self.v_n.space.mesh
        for f in (self.phi_n, self.phi_new, self.m_new, self.B_new, self.v_guess):
            if f.space.mesh is not mesh:
                raise ValueError("Navier-Stokes inputs live on different meshes")


def _divergence(V, Q):
    cache = V.__dict__.setdefault("_div", {})
    if id(Q) not in cache:
        cache[id(Q)] = (Q, assemble_divergence(V, Q))
    return cache[id(Q)][1]


def ns_system(inp: NSSubproblemInput):
    """Saddle-point matrix ``[[A, -D^T], [D, 0]]`` and right-hand side (no boundary conditions)."""
    prm = inp.params
    V, Q = inp.v_n.space, inp.q_space
    quad = get_quadrature(V.mesh, default_order(V))
    phi = inp.phi_new.at_quadrature(quad)
    gphi = inp.phi_new.grad_at_quadrature(quad)
    rho = prm.rho(phi)
    vg = inp.v_guess.at_quadrature(quad)

    # (v_g . grad)(rho v) = rho (v_g . grad) v + (v_g . grad rho) v
    grad_rho = prm.drho(phi)[..., None] * gphi
    A = assemble_mass(V, (2.0 / inp.dt) * rho + np.einsum("tqd,tqd->tq", vg, grad_rho), order=quad.order)
    A = A + assemble_convection(V, vg, rho, order=quad.order)
    coef = 0.5 * (prm.rho_f - prm.rho_s)
    if coef != 0.0:
        flux = prm.mobility * inp.m_new.grad_at_quadrature(quad)
        A = A + assemble_convection(V, flux, coef, order=quad.order)
    A = A + assemble_vector_laplacian_and_symgrad(V, prm.mu(phi), order=quad.order)
    D = _divergence(V, Q)
    K = sp.bmat([[A, -D.T], [D, None]], format="csr")

    rho_n = prm.rho(inp.phi_n.at_quadrature(quad))
    rhs_v = assemble_mass(V, (2.0 / inp.dt) * rho_n, order=quad.order) @ inp.v_n.coeffs
    # explicit stresses: -G (B - I) + gamma eps grad phi (x) grad phi, tested against grad z
    Bq = inp.B_new.at_quadrature(quad)
    G = prm.G(phi)
    S = np.empty(phi.shape + (2, 2))
    S[..., 0, 0] = -G * (Bq[..., 0] - 1.0)
    S[..., 0, 1] = S[..., 1, 0] = -G * Bq[..., 1]
    S[..., 1, 1] = -G * (Bq[..., 2] - 1.0)
    S += prm.gamma * prm.epsilon * np.einsum("tqa,tqb->tqab", gphi, gphi)
    rhs_v = rhs_v + assemble_gradient_load(V, S, order=quad.order)
    f = np.asarray(prm.body_force)
    if np.any(f):
        rhs_v = rhs_v + assemble_load(V, rho[..., None] * f, order=quad.order)
    if inp.forcing is not None:
        rhs_v = rhs_v + inp.forcing
    rhs = np.concatenate([rhs_v, np.zeros(Q.dof_count)])
    return K, rhs


def solve_ns_halfstep(inp: NSSubproblemInput, opts: SolverOptions | None = None, cache: FactorCache | None = None):
    """Solve for ``(v, p)`` at the half step; returns ``(v, p, report)``.

    Velocity Dirichlet data on the whole boundary; the pressure is pinned at
    one dof during the solve and shifted to zero mean afterwards.
    """
    V, Q = inp.v_n.space, inp.q_space
    K, rhs = ns_system(inp)
    bdofs = V.boundary_scalar_dofs()
    if inp.boundary_velocity is None:
        values = np.zeros(2 * len(bdofs))
    else:
        xy = V.dof_coords[bdofs]
        bx, by = inp.boundary_velocity(xy[:, 0], xy[:, 1])
        values = np.concatenate([np.broadcast_to(bx, len(bdofs)), np.broadcast_to(by, len(bdofs))])
    dofs = np.concatenate([bdofs, bdofs + V.n_scalar, [V.dof_count]])
    values = np.concatenate([values, [0.0]])
    K, rhs = apply_dirichlet(K, rhs, dofs, values)
    try:
        x, report = solve(K, rhs, opts, subproblem="navier-stokes", cache=cache)
    except LinearSolveError as exc:
        if "singular" in str(exc):
            raise LinearSolveError(f"singular saddle-point system: {exc}", "navier-stokes", exc.report) from exc
        raise
    v = FEFunction(V, x[: V.dof_count], "v")
    p = FEFunction(Q, x[V.dof_count :], "p")
    p.coeffs -= mean_value(p)
    return v, p, report


def mean_value(f: FEFunction) -> float:
    M = cached_form(f.space, "mass")
    area = float(M.sum())
    return float(np.ones(f.space.dof_count) @ (M @ f.coeffs)) / area


def mms_forcing_v(space, t: float, mms, order: int | None = None) -> np.ndarray:
    def f(x, y):
        return np.stack(mms.forcing_v(x, y, t), axis=-1)

    return assemble_load(space, f, order)


def add_mms_forcing_ns(rhs: np.ndarray, space, t: float, mms) -> np.ndarray:
    """Add the manufactured momentum forcing to the velocity rows of ``rhs``."""
    f = mms_forcing_v(space, t, mms)
    out = np.array(rhs, dtype=float, copy=True)
    out[: len(f)] += f
    return out
