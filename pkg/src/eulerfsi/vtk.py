"""Legacy ASCII VTK writer (unstructured grid of linear triangles)."""
from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path

import numpy as np

VTK_TRIANGLE = 5


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_unstructured(path, points, triangles, point_data: dict, title: str = "eulerfsi") -> None:
    """Write points/triangles plus point data.

    Values in ``point_data`` may be shaped ``(n,)`` (scalar), ``(n, 2)``
    (vector, padded with z = 0) or ``(n, 3)`` interpreted as a symmetric
    tensor ``(xx, xy, yy)``.
    """
    points = np.asarray(points, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    n = len(points)
    buf = io.StringIO()
    buf.write("# vtk DataFile Version 3.0\n")
    buf.write(title.replace("\n", " ")[:255] + "\n")
    buf.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
    buf.write(f"POINTS {n} double\n")
    pts3 = np.column_stack([points, np.zeros(n)])
    np.savetxt(buf, pts3, fmt="%.17g")
    nt = len(triangles)
    buf.write(f"CELLS {nt} {4 * nt}\n")
    np.savetxt(buf, np.column_stack([np.full(nt, 3), triangles]), fmt="%d")
    buf.write(f"CELL_TYPES {nt}\n")
    np.savetxt(buf, np.full(nt, VTK_TRIANGLE), fmt="%d")
    if point_data:
        buf.write(f"POINT_DATA {n}\n")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if len(values) != n:
                raise ValueError(f"point data {name!r} has {len(values)} rows, expected {n}")
            if values.ndim == 1:
                buf.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                np.savetxt(buf, values, fmt="%.17g")
            elif values.shape[1] == 2:
                buf.write(f"VECTORS {name} double\n")
                np.savetxt(buf, np.column_stack([values, np.zeros(n)]), fmt="%.17g")
            elif values.shape[1] == 3:
                xx, xy, yy = values.T
                z = np.zeros(n)
                full = np.column_stack([xx, xy, z, xy, yy, z, z, z, z])
                buf.write(f"TENSORS {name} double\n")
                np.savetxt(buf, full, fmt="%.17g")
            else:
                raise ValueError(f"unsupported point data shape {values.shape} for {name!r}")
    atomic_write_text(path, buf.getvalue())
