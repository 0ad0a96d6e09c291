"""Symmetric quadrature on triangles (Dunavant rules)."""
from __future__ import annotations

from functools import lru_cache
from itertools import permutations

import numpy as np

# (weight, barycentric orbit generator) with weights normalised to sum 1.
_S3 = "s3"  # centroid
_S21 = "s21"  # (a, b, b) and permutations
_S111 = "s111"  # (a, b, c) all distinct

_RULES = {
    1: [(1.0, _S3, ())],
    2: [(1.0 / 3.0, _S21, (2.0 / 3.0, 1.0 / 6.0))],
    4: [
        (0.223381589678011, _S21, (0.108103018168070, 0.445948490915965)),
        (0.109951743655322, _S21, (0.816847572980459, 0.091576213509771)),
    ],
    5: [
        (0.225000000000000, _S3, ()),
        (0.132394152788506, _S21, (0.059715871789770, 0.470142064105115)),
        (0.125939180544827, _S21, (0.797426985353087, 0.101286507323456)),
    ],
    6: [
        (0.116786275726379, _S21, (0.501426509658179, 0.249286745170910)),
        (0.050844906370207, _S21, (0.873821971016996, 0.063089014491502)),
        (0.082851075618374, _S111, (0.053145049844817, 0.310352451033784, 0.636502499121399)),
    ],
}
# degree 3 uses the degree-4 rule (the 4-point rule has a negative weight)
_ALIAS = {3: 4}


def _orbit(kind, args):
    if kind == _S3:
        return [(1 / 3, 1 / 3, 1 / 3)]
    if kind == _S21:
        a, b = args
        return [(a, b, b), (b, a, b), (b, b, a)]
    return sorted(set(permutations(args)))


@lru_cache(maxsize=None)
def quadrature_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points ``(nq, 3)`` and weights ``(nq,)`` on the reference triangle.

    Weights sum to the reference area 1/2; the rule integrates every
    polynomial of total degree ``<= order`` exactly.
    """
    order = int(order)
    if order < 1 or order > 6:
        raise ValueError(f"unsupported quadrature order {order}; supported orders are 1..6")
    spec = _RULES[_ALIAS.get(order, order)]
    pts, wts = [], []
    for w, kind, args in spec:
        for p in _orbit(kind, args):
            pts.append(p)
            wts.append(w)
    pts = np.array(pts)
    wts = np.array(wts)
    # rules are tabulated to 15 digits; renormalise so barycentrics and weights are exact sums
    pts[:, 0] = 1.0 - pts[:, 1] - pts[:, 2]
    wts = 0.5 * wts / wts.sum()
    pts.flags.writeable = False
    wts.flags.writeable = False
    return pts, wts
