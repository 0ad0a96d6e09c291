"""Conforming triangulations of the unit square.

Two structured patterns are available: ``right-diagonal`` (each grid cell cut
by its (0,0)-(1,1) diagonal) and ``union-jack`` (each cell split into four
triangles through its centroid). A tensor-product graded variant of either
pattern concentrates grid lines in a band around a circle.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PATTERNS = ("right-diagonal", "union-jack")
BOUNDARY_NAMES = ("left", "right", "bottom", "top")


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray  # (nv, 2)
    triangles: np.ndarray  # (nt, 3), counterclockwise
    cell_size: float
    pattern: str = "right-diagonal"
    edges: np.ndarray = field(init=False)  # (ne, 2), sorted vertex pairs
    triangle_edges: np.ndarray = field(init=False)  # (nt, 3); local edge k is opposite vertex k
    edge_triangles: np.ndarray = field(init=False)  # (ne, 2); -1 marks a missing neighbour
    boundary_edges: np.ndarray = field(init=False)
    boundary_tags: np.ndarray = field(init=False)  # label per entry of boundary_edges

    def __post_init__(self):
        tri = self.triangles
        nt = len(tri)
        local = np.array([[1, 2], [2, 0], [0, 1]])
        pairs = np.sort(tri[:, local].reshape(-1, 2), axis=1)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = inverse.reshape(nt, 3)

        owners = np.repeat(np.arange(nt), 3)
        flat = inverse.ravel()
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=len(edges))
        if counts.max() > 2:
            raise ValueError("non-manifold edge in triangulation")
        first = np.concatenate(([0], np.cumsum(counts)[:-1]))
        edge_tri = -np.ones((len(edges), 2), dtype=np.int64)
        edge_tri[:, 0] = owners[order[first]]
        two = counts == 2
        edge_tri[two, 1] = owners[order[first[two] + 1]]

        bnd = np.flatnonzero(counts == 1)
        mid = self.vertices[edges[bnd]].mean(axis=1)
        tags = np.empty(len(bnd), dtype=object)
        tol = 1e-12
        tags[np.abs(mid[:, 0]) < tol] = "left"
        tags[np.abs(mid[:, 0] - 1.0) < tol] = "right"
        tags[np.abs(mid[:, 1]) < tol] = "bottom"
        tags[np.abs(mid[:, 1] - 1.0) < tol] = "top"

        for name, value in (
            ("edges", edges),
            ("triangle_edges", inverse),
            ("edge_triangles", edge_tri),
            ("boundary_edges", bnd),
            ("boundary_tags", tags),
        ):
            object.__setattr__(self, name, value)
        for arr in (self.vertices, self.triangles, edges, inverse, edge_tri, bnd):
            arr.flags.writeable = False

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_midpoints(self) -> np.ndarray:
        return self.vertices[self.edges].mean(axis=1)

    def locate(self, points, tol: float = 1e-12):
        """Return (triangle index, barycentric coordinates) for each point.

        Raises ValueError if a point lies outside the triangulation.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        p = self.vertices[self.triangles]
        x0 = p[:, 0]
        jac = np.stack([p[:, 1] - x0, p[:, 2] - x0], axis=2)  # (nt, 2, 2)
        inv = np.linalg.inv(jac)
        cells = np.empty(len(pts), dtype=np.int64)
        bary = np.empty((len(pts), 3))
        for k, pt in enumerate(pts):
            ref = np.einsum("tij,tj->ti", inv, pt - x0)
            lam = np.column_stack([1.0 - ref.sum(axis=1), ref])
            hit = np.flatnonzero(lam.min(axis=1) >= -tol)
            if len(hit) == 0:
                raise ValueError(f"point {tuple(pt)} lies outside the mesh")
            cells[k] = hit[0]
            bary[k] = lam[hit[0]]
        return cells, bary


def _grid_mesh(xs: np.ndarray, ys: np.ndarray, pattern: str, cell_size: float) -> Mesh:
    if pattern not in PATTERNS:
        raise ValueError(f"unknown mesh pattern {pattern!r}; expected one of {PATTERNS}")
    nx, ny = len(xs) - 1, len(ys) - 1
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = [np.column_stack([X.ravel(), Y.ravel()])]
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    if pattern == "right-diagonal":
        tris = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
        # interleave so triangles of one cell are adjacent in memory
        tris = tris.reshape(2, -1, 3).transpose(1, 0, 2).reshape(-1, 3)
    else:
        cx = 0.5 * (xs[:-1] + xs[1:])
        cy = 0.5 * (ys[:-1] + ys[1:])
        CX, CY = np.meshgrid(cx, cy, indexing="xy")
        verts.append(np.column_stack([CX.ravel(), CY.ravel()]))
        e = (nx + 1) * (ny + 1) + np.arange(nx * ny)
        tris = np.stack(
            [
                np.column_stack([a, b, e]),
                np.column_stack([b, c, e]),
                np.column_stack([c, d, e]),
                np.column_stack([d, a, e]),
            ],
            axis=1,
        ).reshape(-1, 3)
    return Mesh(np.vstack(verts), tris.astype(np.int64), float(cell_size), pattern)


def build_uniform(n_per_side: int, pattern: str = "right-diagonal") -> Mesh:
    """Uniform ``n x n`` grid of the unit square split by ``pattern``."""
    n = int(n_per_side)
    if n < 1:
        raise ValueError("n_per_side must be >= 1")
    s = np.linspace(0.0, 1.0, n + 1)
    return _grid_mesh(s, s, pattern, 1.0 / n)


def graded_coordinates(n_coarse: int, lo: float, hi: float, refine: int) -> np.ndarray:
    """Grid lines on [0, 1] with spacing 1/n_coarse outside [lo, hi], 1/(refine*n_coarse) inside."""
    lo, hi = max(0.0, lo), min(1.0, hi)
    h = 1.0 / n_coarse
    pieces = [(0.0, lo, h), (lo, hi, h / refine), (hi, 1.0, h)]
    coords = [0.0]
    for a, b, step in pieces:
        if b - a <= 1e-14:
            continue
        m = max(1, int(round((b - a) / step)))
        coords.extend(np.linspace(a, b, m + 1)[1:])
    return np.asarray(coords)


def build_graded(
    n_coarse: int,
    center=(0.5, 0.7),
    radius: float = 0.2,
    band: float = 0.1,
    refine: int = 2,
    pattern: str = "union-jack",
) -> Mesh:
    """Tensor-product grid refined by ``refine`` in a band around a circle.

    The band covers ``[c - radius - band, c + radius + band]`` in each
    direction. ``cell_size`` reports the smallest spacing.
    """
    xs = graded_coordinates(n_coarse, center[0] - radius - band, center[0] + radius + band, refine)
    ys = graded_coordinates(n_coarse, center[1] - radius - band, center[1] + radius + band, refine)
    h = min(np.diff(xs).min(), np.diff(ys).min())
    return _grid_mesh(xs, ys, pattern, h)


def boundary_vertices(mesh: Mesh) -> set[int]:
    v = mesh.vertices
    tol = 1e-12
    on = (
        (np.abs(v[:, 0]) < tol)
        | (np.abs(v[:, 0] - 1.0) < tol)
        | (np.abs(v[:, 1]) < tol)
        | (np.abs(v[:, 1] - 1.0) < tol)
    )
    return set(np.flatnonzero(on).tolist())


def write_vtk(path, mesh: Mesh, point_data: dict | None = None, title: str = "eulerfsi mesh") -> None:
    """Write the mesh (and optional vertex data) as legacy ASCII VTK."""
    from .vtk import write_unstructured

    write_unstructured(path, mesh.vertices, mesh.triangles, point_data or {}, title)
