"""Reference elements: shape functions and quadrature for tri3, quad4, tet4."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np


@dataclass(frozen=True)
class ElementKind:
    name: str
    dim: int
    n_nodes: int
    vtk_id: int
    quadrature_orders: Tuple[int, ...]   # admissible point counts
    default_order: int                   # point count used unless overridden


ELEMENT_KINDS: Dict[str, ElementKind] = {
    "tri3": ElementKind("tri3", 2, 3, 5, (1, 3), 1),
    "quad4": ElementKind("quad4", 2, 4, 9, (4,), 4),
    "tet4": ElementKind("tet4", 3, 4, 10, (1, 4), 1),
}


def shape_functions(kind: str, local: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Shape function values N (k,) and local gradients dN (k, dim).

    Reference domains: unit triangle/tetrahedron (vertex at origin), and
    [-1, 1]^2 for quad4.  Partition of unity holds: sum(N) = 1, sum(dN) = 0.
    """
    local = np.asarray(local, dtype=float)
    if kind == "tri3":
        x, y = local
        N = np.array([1.0 - x - y, x, y])
        dN = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    elif kind == "quad4":
        x, y = local
        N = 0.25 * np.array([(1 - x) * (1 - y), (1 + x) * (1 - y),
                             (1 + x) * (1 + y), (1 - x) * (1 + y)])
        dN = 0.25 * np.array([[-(1 - y), -(1 - x)],
                              [(1 - y), -(1 + x)],
                              [(1 + y), (1 + x)],
                              [-(1 + y), (1 - x)]])
    elif kind == "tet4":
        x, y, z = local
        N = np.array([1.0 - x - y - z, x, y, z])
        dN = np.array([[-1.0, -1.0, -1.0],
                       [1.0, 0.0, 0.0],
                       [0.0, 1.0, 0.0],
                       [0.0, 0.0, 1.0]])
    else:
        raise ValueError(f"unknown element kind {kind!r}")
    return N, dN


def element_quadrature(kind: str, n_points: int | None = None) -> Tuple[np.ndarray, np.ndarray]:
    """Quadrature points and weights on the reference element.

    Weights sum to the reference measure (1/2 triangle, 4 square,
    1/6 tetrahedron); every rule integrates affine functions exactly.
    """
    ek = ELEMENT_KINDS.get(kind)
    if ek is None:
        raise ValueError(f"unknown element kind {kind!r}")
    n = ek.default_order if n_points is None else int(n_points)
    if n not in ek.quadrature_orders:
        raise ValueError(f"{kind} supports {ek.quadrature_orders} point rules, got {n}")
    if kind == "tri3":
        if n == 1:
            pts = np.array([[1.0 / 3.0, 1.0 / 3.0]])
            wts = np.array([0.5])
        else:
            pts = np.array([[1.0 / 6.0, 1.0 / 6.0],
                            [2.0 / 3.0, 1.0 / 6.0],
                            [1.0 / 6.0, 2.0 / 3.0]])
            wts = np.full(3, 1.0 / 6.0)
    elif kind == "quad4":
        g = 1.0 / math.sqrt(3.0)
        pts = np.array([[-g, -g], [g, -g], [g, g], [-g, g]])
        wts = np.ones(4)
    else:  # tet4
        if n == 1:
            pts = np.array([[0.25, 0.25, 0.25]])
            wts = np.array([1.0 / 6.0])
        else:
            a = (5.0 + 3.0 * math.sqrt(5.0)) / 20.0
            b = (5.0 - math.sqrt(5.0)) / 20.0
            pts = np.array([[a, b, b], [b, a, b], [b, b, a], [b, b, b]])
            wts = np.full(4, 1.0 / 24.0)
    return pts, wts
