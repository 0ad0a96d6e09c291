"""Lagrange P1/P2 spaces on triangles, and functions living on them."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..mesh import Mesh
from .quadrature import quadrature_rule

VALUE_KINDS = {"scalar": 1, "vector2": 2, "symtensor2": 3}

# gradients of the barycentric coordinates w.r.t. reference coordinates (xi, eta)
_DLAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
_EDGE_VERTS = ((1, 2), (2, 0), (0, 1))  # local edge k is opposite vertex k


def reference_basis(degree: int, bary: np.ndarray):
    """Values ``(nq, nloc)`` and reference gradients ``(nq, nloc, 2)`` at barycentric points."""
    lam = np.asarray(bary, dtype=float)
    nq = len(lam)
    if degree == 1:
        return lam.copy(), np.broadcast_to(_DLAMBDA, (nq, 3, 2)).copy()
    if degree != 2:
        raise ValueError(f"unsupported degree {degree}")
    vals = np.empty((nq, 6))
    grads = np.empty((nq, 6, 2))
    for i in range(3):
        vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        grads[:, i] = (4.0 * lam[:, i] - 1.0)[:, None] * _DLAMBDA[i]
    for k, (a, b) in enumerate(_EDGE_VERTS):
        vals[:, 3 + k] = 4.0 * lam[:, a] * lam[:, b]
        grads[:, 3 + k] = 4.0 * (lam[:, b, None] * _DLAMBDA[a] + lam[:, a, None] * _DLAMBDA[b])
    return vals, grads


class Quadrature:
    """Quadrature points and weights mapped onto every triangle of a mesh."""

    def __init__(self, mesh: Mesh, order: int):
        self.mesh = mesh
        self.order = order
        self.bary, self.ref_weights = quadrature_rule(order)
        p = mesh.vertices[mesh.triangles]
        x0 = p[:, 0]
        jac = np.stack([p[:, 1] - x0, p[:, 2] - x0], axis=2)  # columns are edge vectors
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        if np.any(det <= 0.0):
            raise ValueError("mesh contains triangles with non-positive orientation")
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1] / det
        inv[:, 0, 1] = -jac[:, 0, 1] / det
        inv[:, 1, 0] = -jac[:, 1, 0] / det
        inv[:, 1, 1] = jac[:, 0, 0] / det
        self.det = det
        self.jac_inv = inv
        self.points = np.einsum("qk,tkd->tqd", self.bary, p)
        self.dx = self.ref_weights[None, :] * det[:, None]

    @property
    def n_points(self) -> int:
        return len(self.ref_weights)


@lru_cache(maxsize=64)
def get_quadrature(mesh: Mesh, order: int) -> Quadrature:
    return Quadrature(mesh, order)


class FESpace:
    """Continuous Lagrange space of degree 1 or 2.

    Vector and symmetric-tensor spaces store their components one after the
    other: global dof ``c * n_scalar + i`` is scalar dof ``i`` of component
    ``c``. Symmetric tensors keep ``(xx, xy, yy)``.
    """

    def __init__(self, mesh: Mesh, degree: int = 1, value_kind: str = "scalar"):
        if degree not in (1, 2):
            raise ValueError(f"unsupported degree {degree}")
        if value_kind not in VALUE_KINDS:
            raise ValueError(f"unknown value kind {value_kind!r}")
        self.mesh = mesh
        self.degree = degree
        self.value_kind = value_kind
        self.ncomp = VALUE_KINDS[value_kind]
        if degree == 1:
            self.cell_dofs = np.asarray(mesh.triangles)
            self.n_scalar = mesh.n_vertices
            self.dof_coords = np.asarray(mesh.vertices)
        else:
            self.cell_dofs = np.hstack([mesh.triangles, mesh.n_vertices + mesh.triangle_edges])
            self.n_scalar = mesh.n_vertices + mesh.n_edges
            self.dof_coords = np.vstack([mesh.vertices, mesh.edge_midpoints()])
        self.nloc = self.cell_dofs.shape[1]
        self.dof_count = self.ncomp * self.n_scalar
        self.element_dofs = np.hstack([self.cell_dofs + c * self.n_scalar for c in range(self.ncomp)])
        self._tab = {}

    def __repr__(self):
        return f"FESpace(P{self.degree}, {self.value_kind}, dofs={self.dof_count})"

    def scalar_space(self) -> "FESpace":
        if self.ncomp == 1:
            return self
        return scalar_space(self.mesh, self.degree)

    def tabulate(self, quad: Quadrature):
        """Basis values ``(nq, nloc)`` and physical gradients ``(nt, nq, nloc, 2)``."""
        key = quad.order
        if key not in self._tab:
            vals, rgrads = reference_basis(self.degree, quad.bary)
            grads = np.einsum("qla,tai->tqli", rgrads, quad.jac_inv)
            self._tab[key] = (vals, grads)
        return self._tab[key]

    def component_slice(self, c: int) -> slice:
        return slice(c * self.n_scalar, (c + 1) * self.n_scalar)

    def boundary_scalar_dofs(self) -> np.ndarray:
        mesh = self.mesh
        bverts = np.unique(mesh.edges[mesh.boundary_edges].ravel())
        if self.degree == 1:
            return bverts
        return np.concatenate([bverts, mesh.n_vertices + mesh.boundary_edges])

    def boundary_dofs(self) -> np.ndarray:
        """Global dofs on the boundary, all components."""
        b = self.boundary_scalar_dofs()
        return np.concatenate([b + c * self.n_scalar for c in range(self.ncomp)])


@lru_cache(maxsize=64)
def scalar_space(mesh: Mesh, degree: int) -> FESpace:
    return FESpace(mesh, degree, "scalar")


@lru_cache(maxsize=64)
def make_space(mesh: Mesh, degree: int, value_kind: str = "scalar") -> FESpace:
    return FESpace(mesh, degree, value_kind)


class FEFunction:
    def __init__(self, space: FESpace, coeffs=None, name: str = ""):
        self.space = space
        if coeffs is None:
            coeffs = np.zeros(space.dof_count)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.dof_count,):
            raise ValueError(f"coefficient vector has shape {coeffs.shape}, expected ({space.dof_count},)")
        self.coeffs = coeffs
        self.name = name

    def __repr__(self):
        return f"FEFunction({self.name or '?'}, {self.space!r})"

    def copy(self, name: str | None = None) -> "FEFunction":
        return FEFunction(self.space, self.coeffs.copy(), self.name if name is None else name)

    def with_coeffs(self, coeffs) -> "FEFunction":
        return FEFunction(self.space, coeffs, self.name)

    def component(self, c: int) -> np.ndarray:
        return self.coeffs[self.space.component_slice(c)]

    def _local(self):
        sp = self.space
        # (nt, ncomp, nloc)
        return np.stack([self.component(c)[sp.cell_dofs] for c in range(sp.ncomp)], axis=1)

    def at_quadrature(self, quad: Quadrature) -> np.ndarray:
        """Values at quadrature points: ``(nt, nq)`` or ``(nt, nq, ncomp)``."""
        vals, _ = self.space.tabulate(quad)
        out = np.einsum("tcl,ql->tqc", self._local(), vals)
        return out[..., 0] if self.space.ncomp == 1 else out

    def grad_at_quadrature(self, quad: Quadrature) -> np.ndarray:
        """Gradients at quadrature points: ``(nt, nq, 2)`` or ``(nt, nq, ncomp, 2)``.

        For a vector field the last two axes form ``(grad v)_ij = d v_i / d x_j``.
        """
        _, grads = self.space.tabulate(quad)
        out = np.einsum("tcl,tqli->tqci", self._local(), grads)
        return out[:, :, 0] if self.space.ncomp == 1 else out

    def evaluate(self, points) -> np.ndarray:
        """Point values; raises ValueError for points outside the domain."""
        sp = self.space
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cells, bary = sp.mesh.locate(pts)
        out = np.empty((len(pts), sp.ncomp))
        for k in range(len(pts)):
            vals, _ = reference_basis(sp.degree, bary[k : k + 1])
            for c in range(sp.ncomp):
                out[k, c] = vals[0] @ self.component(c)[sp.cell_dofs[cells[k]]]
        if sp.ncomp == 1:
            out = out[:, 0]
        return out[0] if np.ndim(points) == 1 else out


def interpolate(space: FESpace, field, name: str = "") -> FEFunction:
    """Nodal interpolant of ``field(x, y)``.

    ``field`` returns an array shaped like ``x`` for scalar spaces, or a
    sequence of ``ncomp`` such arrays (components in storage order).
    """
    x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
    vals = field(x, y)
    if space.ncomp == 1:
        coeffs = np.broadcast_to(np.asarray(vals, dtype=float), x.shape).copy()
    else:
        comps = [np.broadcast_to(np.asarray(v, dtype=float), x.shape) for v in vals]
        if len(comps) != space.ncomp:
            raise ValueError(f"field returned {len(comps)} components, expected {space.ncomp}")
        coeffs = np.concatenate(comps)
    return FEFunction(space, coeffs, name)


def constant(space: FESpace, value, name: str = "") -> FEFunction:
    value = np.atleast_1d(np.asarray(value, dtype=float))
    if space.ncomp == 1:
        return FEFunction(space, np.full(space.n_scalar, float(value[0])), name)
    if len(value) != space.ncomp:
        raise ValueError(f"expected {space.ncomp} constant components")
    return FEFunction(space, np.repeat(value, space.n_scalar), name)


def integrate(mesh: Mesh, expr, order: int = 4) -> float:
    """Integral over the domain of ``expr``.

    ``expr`` is a callable ``f(x, y)`` or an array of values at the
    quadrature points of ``get_quadrature(mesh, order)``.
    """
    quad = get_quadrature(mesh, order)
    if callable(expr):
        vals = expr(quad.points[..., 0], quad.points[..., 1])
    else:
        vals = expr
    return float(np.sum(np.broadcast_to(vals, quad.dx.shape) * quad.dx))
