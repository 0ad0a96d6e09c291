"""Vectorised assembly of the bilinear and linear forms used by the solvers.

All forms are assembled element-by-element with numpy and scattered into a
CSR matrix through a cached sparsity pattern (``np.bincount`` keeps the
summation order fixed, so repeated assemblies are bitwise reproducible).
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .space import FEFunction, FESpace, Quadrature, get_quadrature


def default_order(test: FESpace, trial: FESpace | None = None) -> int:
    trial = test if trial is None else trial
    return min(6, test.degree + trial.degree + 2)


def coefficient(weight, quad: Quadrature) -> np.ndarray:
    """Evaluate a coefficient at quadrature points, shape ``(nt, nq)``."""
    shape = quad.dx.shape
    if isinstance(weight, FEFunction):
        if weight.space.ncomp != 1:
            raise ValueError("coefficient must be scalar-valued")
        return weight.at_quadrature(quad)
    if callable(weight):
        return np.broadcast_to(weight(quad.points[..., 0], quad.points[..., 1]), shape)
    arr = np.asarray(weight, dtype=float)
    if arr.ndim == 0:
        return np.full(shape, float(arr))
    if arr.shape != shape:
        raise ValueError(f"coefficient array has shape {arr.shape}, expected {shape}")
    return arr


class _Pattern:
    def __init__(self, test: FESpace, trial: FESpace):
        rows = np.broadcast_to(test.element_dofs[:, :, None], (len(test.element_dofs), test.element_dofs.shape[1], trial.element_dofs.shape[1]))
        cols = np.broadcast_to(trial.element_dofs[:, None, :], rows.shape)
        ncols = trial.dof_count
        keys = rows.ravel().astype(np.int64) * ncols + cols.ravel()
        uniq, inverse = np.unique(keys, return_inverse=True)
        self.inverse = inverse
        self.nnz = len(uniq)
        r = uniq // ncols
        self.indices = (uniq % ncols).astype(np.int32)
        self.indptr = np.concatenate(([0], np.cumsum(np.bincount(r, minlength=test.dof_count)))).astype(np.int32)
        self.shape = (test.dof_count, trial.dof_count)


def _pattern(test: FESpace, trial: FESpace) -> _Pattern:
    cache = test.__dict__.setdefault("_patterns", {})
    key = id(trial)
    if key not in cache:
        cache[key] = (trial, _Pattern(test, trial))
    return cache[key][1]


def scatter_matrix(local: np.ndarray, test: FESpace, trial: FESpace) -> sp.csr_matrix:
    """Sum element matrices ``(nt, ncomp_t*nloc_t, ncomp_u*nloc_u)`` into CSR."""
    pat = _pattern(test, trial)
    data = np.bincount(pat.inverse, weights=local.ravel(), minlength=pat.nnz)
    return sp.csr_matrix((data, pat.indices.copy(), pat.indptr.copy()), shape=pat.shape)


def scatter_vector(local: np.ndarray, space: FESpace) -> np.ndarray:
    """Sum element vectors ``(nt, ncomp*nloc)`` into a global vector."""
    return np.bincount(space.element_dofs.ravel(), weights=local.ravel(), minlength=space.dof_count)


def _block_diagonal(local: np.ndarray, ncomp: int) -> np.ndarray:
    if ncomp == 1:
        return local
    nt, a, b = local.shape
    out = np.zeros((nt, ncomp * a, ncomp * b))
    for c in range(ncomp):
        out[:, c * a : (c + 1) * a, c * b : (c + 1) * b] = local
    return out


def _setup(test, trial, order):
    trial = test if trial is None else trial
    if trial.mesh is not test.mesh:
        raise ValueError("test and trial spaces live on different meshes")
    order = default_order(test, trial) if order is None else order
    quad = get_quadrature(test.mesh, order)
    return trial, quad


def _weighted_product(w, a, b):
    """``out[t, i, j] = sum_q w[t, q] a[t, q, i] b[t, q, j]`` via batched matmul.

    ``a`` and ``b`` may also be reference tabulations of shape ``(nq, n)``.
    """
    nt = w.shape[0]
    a = np.broadcast_to(a, (nt,) + a.shape[-2:])
    b = np.broadcast_to(b, (nt,) + b.shape[-2:])
    return np.swapaxes(a * w[..., None], 1, 2) @ b


def local_mass(test, trial, quad, weight):
    w = coefficient(weight, quad) * quad.dx
    vt, _ = test.tabulate(quad)
    vu, _ = trial.tabulate(quad)
    return _weighted_product(np.broadcast_to(w, quad.dx.shape), vt, vu)


def assemble_mass(space: FESpace, weight=1.0, order: int | None = None, trial_space: FESpace | None = None):
    """``M[i, j] = int weight * psi_i * psi_j`` (block-diagonal for vector spaces)."""
    trial, quad = _setup(space, trial_space, order)
    if trial.ncomp != space.ncomp:
        raise ValueError("mass matrix needs matching value kinds")
    local = local_mass(space, trial, quad, weight)
    return scatter_matrix(_block_diagonal(local, space.ncomp), space, trial)


def assemble_stiffness(space: FESpace, weight=1.0, order: int | None = None):
    """``K[i, j] = int weight * grad psi_i . grad psi_j`` (block-diagonal for vector spaces)."""
    _, quad = _setup(space, None, order)
    w = coefficient(weight, quad) * quad.dx
    _, g = space.tabulate(quad)
    w = np.broadcast_to(w, quad.dx.shape)
    local = _weighted_product(w, g[..., 0], g[..., 0]) + _weighted_product(w, g[..., 1], g[..., 1])
    return scatter_matrix(_block_diagonal(local, space.ncomp), space, space)


def _velocity_at(velocity, quad):
    if isinstance(velocity, FEFunction):
        if velocity.space.mesh is not quad.mesh:
            raise ValueError("velocity lives on a different mesh")
        if velocity.space.ncomp != 2:
            raise ValueError("velocity must be a vector2 function")
        return velocity.at_quadrature(quad)
    vel = np.asarray(velocity, dtype=float)
    if vel.shape == (2,):
        return np.broadcast_to(vel, quad.dx.shape + (2,))
    if vel.shape != quad.dx.shape + (2,):
        raise ValueError(f"velocity array has shape {vel.shape}")
    return vel


def assemble_convection(space: FESpace, velocity, weight=1.0, order: int | None = None):
    """``C[i, j] = int weight * (velocity . grad psi_j) * psi_i`` (block-diagonal for vector spaces)."""
    _, quad = _setup(space, None, order)
    w = coefficient(weight, quad) * quad.dx
    vel = _velocity_at(velocity, quad)
    vals, g = space.tabulate(quad)
    adv = vel[..., None, 0] * g[..., 0] + vel[..., None, 1] * g[..., 1]
    local = _weighted_product(np.broadcast_to(w, quad.dx.shape), vals, adv)
    return scatter_matrix(_block_diagonal(local, space.ncomp), space, space)


def assemble_vector_laplacian_and_symgrad(space: FESpace, viscosity=1.0, order: int | None = None):
    """``A[i, j] = int 2 mu D(psi_j) : D(psi_i)`` on a vector2 space."""
    if space.ncomp != 2:
        raise ValueError("symmetric-gradient form needs a vector2 space")
    _, quad = _setup(space, None, order)
    mu = coefficient(viscosity, quad) * quad.dx
    _, g = space.tabulate(quad)
    gx, gy = g[..., 0], g[..., 1]
    mu = np.broadcast_to(mu, quad.dx.shape)
    xx = _weighted_product(mu, gx, gx)
    yy = _weighted_product(mu, gy, gy)
    xy = _weighted_product(mu, gx, gy)  # test d/dx, trial d/dy
    n = space.nloc
    local = np.empty((len(mu), 2 * n, 2 * n))
    local[:, :n, :n] = 2.0 * xx + yy
    local[:, n:, n:] = xx + 2.0 * yy
    local[:, :n, n:] = np.swapaxes(xy, 1, 2)  # test x-comp (d/dy), trial y-comp (d/dx)
    local[:, n:, :n] = xy
    return scatter_matrix(local, space, space)


def assemble_divergence(v_space: FESpace, p_space: FESpace, order: int | None = None):
    """``B[i, j] = int q_i div(psi_j)``, shape ``(n_p, n_v)``."""
    if v_space.ncomp != 2 or p_space.ncomp != 1:
        raise ValueError("divergence form needs (vector2, scalar) spaces")
    if v_space.mesh is not p_space.mesh:
        raise ValueError("velocity and pressure spaces live on different meshes")
    order = default_order(v_space, p_space) if order is None else order
    quad = get_quadrature(v_space.mesh, order)
    q, _ = p_space.tabulate(quad)
    _, g = v_space.tabulate(quad)
    local = np.concatenate(
        [_weighted_product(quad.dx, q, g[..., c]) for c in range(2)], axis=2
    )
    return scatter_matrix(local, p_space, v_space)


def assemble_load(space: FESpace, f, order: int | None = None) -> np.ndarray:
    """``b[i] = int f . psi_i``.

    ``f`` is a scalar, an array at quadrature points (``(nt, nq)`` for a
    scalar space, ``(nt, nq, ncomp)`` otherwise), or a callable returning
    either.
    """
    order = default_order(space) if order is None else order
    quad = get_quadrature(space.mesh, order)
    vals, _ = space.tabulate(quad)
    if callable(f) and not isinstance(f, FEFunction):
        f = f(quad.points[..., 0], quad.points[..., 1])
    if isinstance(f, FEFunction):
        f = f.at_quadrature(quad)
    f = np.asarray(f, dtype=float)
    if space.ncomp == 1:
        fq = np.broadcast_to(f, quad.dx.shape)[..., None]
    else:
        fq = np.broadcast_to(f, quad.dx.shape + (space.ncomp,))
    local = np.einsum("tq,tqc,qi->tci", quad.dx, fq, vals, optimize=True).reshape(len(quad.dx), -1)
    return scatter_vector(local, space)


def assemble_gradient_load(space: FESpace, flux, order: int | None = None) -> np.ndarray:
    """``b[i] = int F : grad psi_i`` with ``F`` of shape ``(nt, nq, ncomp, 2)``."""
    order = default_order(space) if order is None else order
    quad = get_quadrature(space.mesh, order)
    _, g = space.tabulate(quad)
    F = np.asarray(flux, dtype=float)
    if space.ncomp == 1 and F.ndim == 3:
        F = F[:, :, None, :]
    local = np.einsum("tq,tqcd,tqid->tci", quad.dx, F, g, optimize=True).reshape(len(quad.dx), -1)
    return scatter_vector(local, space)


def apply_dirichlet(matrix, rhs, dofs, values):
    """Symmetric elimination of prescribed dofs.

    Constrained rows and columns are zeroed and the diagonal set to 1;
    known column contributions move to the right-hand side. Returns new
    ``(matrix, rhs)``; the inputs are not modified.
    """
    A = sp.csr_matrix(matrix, copy=True)
    n = A.shape[0]
    dofs = np.asarray(dofs, dtype=np.int64)
    g = np.zeros(n)
    g[dofs] = values
    b = np.asarray(rhs, dtype=float) - A @ g
    b[dofs] = g[dofs]
    mask = np.zeros(n, dtype=bool)
    mask[dofs] = True
    rows = np.repeat(np.arange(n), np.diff(A.indptr))
    A.data[mask[rows] | mask[A.indices]] = 0.0
    A = A + sp.diags(mask.astype(float), format="csr")
    A.eliminate_zeros()
    A.sort_indices()
    return A, b


def cached_form(space: FESpace, kind: str):
    """Unit-weight ``"mass"`` or ``"stiffness"`` matrix, built once per space."""
    cache = space.__dict__.setdefault("_forms", {})
    if kind not in cache:
        if kind == "mass":
            cache[kind] = assemble_mass(space)
        elif kind == "stiffness":
            cache[kind] = assemble_stiffness(space)
        else:
            raise ValueError(f"unknown cached form {kind!r}")
    return cache[kind]
