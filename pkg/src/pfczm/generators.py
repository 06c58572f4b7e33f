"""Built-in benchmark meshes: notched bending beams, tension bars, 3D beams.

All generators emit validated :class:`~pfczm.mesh.Mesh` objects with the node
sets the solver and the monitors expect, plus a ``metadata`` block recording
the generating geometry (ligament length, crack seed point, monitor hints).
"""

from __future__ import annotations

import math
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .mesh import Mesh, MeshError


# -----------------------------
# Graded 1D point distributions
# -----------------------------

def graded_axis(anchors: Iterable[float], fine_windows: List[Tuple[float, float]],
                fine: float, coarse: float, growth: float = 0.7) -> np.ndarray:
    """Monotone 1D node coordinates honoring anchors and refinement windows.

    Element size is ``fine`` inside any window and grows linearly with the
    distance to the nearest window, capped at ``coarse``.  Every anchor is an
    exact output coordinate (interval counts are rounded, never zero).
    """
    pts = np.array(sorted(set(float(a) for a in anchors)))
    if pts.size < 2:
        raise ValueError("need at least two distinct anchors")
    windows = [(float(a), float(b)) for a, b in fine_windows]

    def target(x: np.ndarray) -> np.ndarray:
        d = np.full_like(x, np.inf)
        for a, b in windows:
            inside = (x >= a) & (x <= b)
            dist = np.where(inside, 0.0, np.minimum(np.abs(x - a), np.abs(x - b)))
            d = np.minimum(d, dist)
        if not windows:
            d = np.zeros_like(x)
            return np.full_like(x, coarse)
        return np.minimum(coarse, fine + growth * d)

    coords = [pts[0]]
    for A, B in zip(pts[:-1], pts[1:]):
        m = max(16, int(4 * (B - A) / fine))
        xs = np.linspace(A, B, m + 1)
        dens = 1.0 / target(xs)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))])
        n = max(1, int(round(cum[-1])))
        marks = np.linspace(0.0, cum[-1], n + 1)[1:]
        nodes = np.interp(marks, cum, xs)
        nodes[-1] = B
        coords.extend(nodes.tolist())
    return np.array(coords)


def _structured_tris(xs: np.ndarray, ys: np.ndarray,
                     keep_cell) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor grid split into triangles with alternating diagonals."""
    nx, ny = xs.size - 1, ys.size - 1
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            cx = 0.5 * (xs[i] + xs[i + 1])
            cy = 0.5 * (ys[j] + ys[j + 1])
            if not keep_cell(cx, cy):
                continue
            bl, br = nid(i, j), nid(i + 1, j)
            tl, tr = nid(i, j + 1), nid(i + 1, j + 1)
            if (i + j) % 2 == 0:
                tris.append((bl, br, tr))
                tris.append((bl, tr, tl))
            else:
                tris.append((bl, br, tl))
                tris.append((br, tr, tl))
    return nodes, np.array(tris, dtype=np.int64)


def _prune_nodes(nodes: np.ndarray, elements: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Drop nodes not referenced by any element; return (nodes, elements, old2new)."""
    used = np.unique(elements)
    old2new = np.full(nodes.shape[0], -1, dtype=np.int64)
    old2new[used] = np.arange(used.size)
    return nodes[used], old2new[elements], old2new


def _nearest_node(nodes: np.ndarray, point) -> int:
    d = np.linalg.norm(nodes - np.asarray(point, dtype=float), axis=1)
    return int(np.argmin(d))


def _node_at(nodes: np.ndarray, point, tol: float) -> int:
    i = _nearest_node(nodes, point)
    if np.linalg.norm(nodes[i] - np.asarray(point, dtype=float)) > tol:
        raise MeshError(f"no mesh node at required location {tuple(point)}")
    return i


# -----------------------------
# Notched beam in three-point bending
# -----------------------------

def generate_senb_mesh(height: float, span: float, notch_depth: float,
                       notch_width: float, notch_offset: float = 0.0,
                       band_halfwidth: float = 6.0, coarse: float = 8.0,
                       fine: float = 0.5, length: Optional[float] = None,
                       load_width: float = 20.0, ell: Optional[float] = None,
                       allow_coarse_band: bool = False) -> Mesh:
    """Single-edge-notched bending beam with a graded crack band.

    The notch is an explicit rectangular cut of width ``notch_width`` and
    depth ``notch_depth`` rising from the bottom edge, centered at
    mid-span + ``notch_offset``.  Refinement covers the corridor between the
    notch and the load point (degenerating to a vertical band for a centered
    notch).  Named node sets: ``support_left``, ``support_right``, ``load``,
    and monitor pairs ``ctod`` (notch-tip flanks) / ``cmod`` (notch mouth),
    plus ``crack_seed`` at the notch root.

    When ``ell`` is given, ``fine`` must not exceed ``ell / 5`` (the band must
    resolve the regularization length); pass ``allow_coarse_band=True`` to
    override for convergence studies.
    """
    h, h0, b0 = float(height), float(notch_depth), float(notch_width)
    L = float(length) if length is not None else 1.1 * span
    if not 0.0 < h0 < h:
        raise MeshError(f"notch depth must lie in (0, height), got {h0}")
    if ell is not None and fine > ell / 5.0 * (1.0 + 1e-9) and not allow_coarse_band:
        raise MeshError(
            f"band element size {fine} exceeds ell/5 = {ell / 5.0:.4g}; the damage band "
            "would be under-resolved. Reduce 'fine' or set allow_coarse_band=true."
        )
    xc = 0.5 * L
    xn = xc + float(notch_offset)
    x_sup_l, x_sup_r = xc - 0.5 * span, xc + 0.5 * span
    if not (0.0 <= x_sup_l < x_sup_r <= L):
        raise MeshError("span does not fit into beam length")
    nl, nr = xn - 0.5 * b0, xn + 0.5 * b0
    if not (x_sup_l < nl and nr < x_sup_r):
        raise MeshError("notch must lie strictly between the supports")

    bw = float(band_halfwidth)
    if notch_offset == 0.0:
        x_window = (xn - bw, xn + bw)
    else:
        x_window = (min(xn, xc) - bw, max(xn, xc) + bw)
    y_window = (max(0.0, h0 - min(bw, h0)), h)

    x_anchors = [0.0, x_sup_l, nl, nr, xc - 0.5 * load_width, xc + 0.5 * load_width,
                 x_sup_r, L]
    y_anchors = [0.0, h0, h]
    xs = graded_axis(x_anchors, [x_window], fine, coarse)
    ys = graded_axis(y_anchors, [y_window], fine, coarse)

    def keep(cx: float, cy: float) -> bool:
        return not (nl < cx < nr and cy < h0)

    nodes, tris = _structured_tris(xs, ys, keep)
    nodes, tris, old2new = _prune_nodes(nodes, tris)

    tol = 0.25 * fine
    top = np.flatnonzero(np.abs(nodes[:, 1] - h) < 1e-9)
    load = top[np.abs(nodes[top, 0] - xc) <= 0.5 * load_width + tol]
    node_sets = {
        "support_left": np.array([_node_at(nodes, (x_sup_l, 0.0), tol)]),
        "support_right": np.array([_node_at(nodes, (x_sup_r, 0.0), tol)]),
        "load": np.sort(load),
        "ctod": np.array([_node_at(nodes, (nl, h0), tol), _node_at(nodes, (nr, h0), tol)]),
        "cmod": np.array([_node_at(nodes, (nl, 0.0), tol), _node_at(nodes, (nr, 0.0), tol)]),
        "crack_seed": np.array([_node_at(nodes, (xn, h0), 0.5 * b0 + tol)]),
    }
    meta = {
        "geometry": "senb",
        "height": h, "length": L, "span": span,
        "notch_depth": h0, "notch_width": b0, "notch_x": xn, "load_x": xc,
        "ligament": h - h0,
        "seed_point": [xn, h0],
        "propagation_axis": [0.0, 1.0],
        "fine": fine, "coarse": coarse, "band_halfwidth": bw,
        "load_width": load_width, "load_direction": [0.0, -1.0],
        "primary_monitor": "ctod",
    }
    mesh = Mesh(dimension=2, kind="tri3", nodes=nodes, elements=tris,
                node_sets=node_sets, metadata=meta)
    mesh.validate()
    return mesh


# -----------------------------
# Plain tension bar (strength checks)
# -----------------------------

def generate_bar_mesh(length: float, height: float, size: float) -> Mesh:
    """Uniform triangulated rectangle pulled along x.

    Node sets: ``fix`` (left edge), ``pull`` (right edge), ``corner``
    (bottom-left node, pins rigid body motion).
    """
    L, H = float(length), float(height)
    nx, ny = max(1, round(L / size)), max(1, round(H / size))
    xs = np.linspace(0.0, L, nx + 1)
    ys = np.linspace(0.0, H, ny + 1)
    nodes, tris = _structured_tris(xs, ys, lambda cx, cy: True)
    node_sets = {
        "fix": np.flatnonzero(np.abs(nodes[:, 0]) < 1e-12),
        "pull": np.flatnonzero(np.abs(nodes[:, 0] - L) < 1e-12),
        "corner": np.array([_node_at(nodes, (0.0, 0.0), 1e-9)]),
    }
    meta = {
        "geometry": "bar", "length": L, "height": H, "size": size,
        "section_area": H,     # unit thickness
        "seed_point": [0.5 * L, 0.0],
        "propagation_axis": [0.0, 1.0],
        "ligament": H,
        "load_direction": [1.0, 0.0],
        "primary_monitor": "control",
    }
    mesh = Mesh(dimension=2, kind="tri3", nodes=nodes, elements=tris,
                node_sets=node_sets, metadata=meta)
    mesh.validate()
    return mesh


# -----------------------------
# 3D tension beam with a slanted surface notch
# -----------------------------

_FREUDENTHAL = [(0, 1, 2, 6), (0, 2, 3, 6), (0, 3, 7, 6),
                (0, 7, 4, 6), (0, 4, 5, 6), (0, 5, 1, 6)]


def generate_tension3d_mesh(length: float, width: float, height: float,
                            notch_depth: float, notch_thickness: float,
                            size: float, notch_angle_deg: float = 45.0) -> Mesh:
    """Box beam under axial tension with a slanted notch cut from the top.

    The notch is a planar slab at mid-length whose in-plane normal is rotated
    ``notch_angle_deg`` about the vertical axis; it extends from the top face
    down by ``notch_depth``.  Sets: ``fix`` (x = 0 face), ``load`` (x = L
    face) and ``monitor`` (far top corner node).
    """
    L, W, H = float(length), float(width), float(height)
    h0, b0 = float(notch_depth), float(notch_thickness)
    if not 0.0 < h0 < H:
        raise MeshError(f"notch depth must lie in (0, height), got {h0}")
    nx = max(2, round(L / size))
    ny = max(2, round(W / size))
    nz = max(2, round(H / size))
    xs = np.linspace(0.0, L, nx + 1)
    ys = np.linspace(0.0, W, ny + 1)
    zs = np.linspace(0.0, H, nz + 1)

    def nid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    theta = math.radians(notch_angle_deg)
    normal = np.array([math.cos(theta), math.sin(theta), 0.0])
    p0 = np.array([0.5 * L, 0.5 * W, 0.0])

    tets: List[Tuple[int, int, int, int]] = []
    removed = 0
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                c = np.array([0.5 * (xs[i] + xs[i + 1]),
                              0.5 * (ys[j] + ys[j + 1]),
                              0.5 * (zs[k] + zs[k + 1])])
                if abs(np.dot(c - p0, normal)) <= 0.5 * b0 and c[2] >= H - h0:
                    removed += 1
                    continue
                corners = [nid(i, j, k), nid(i + 1, j, k), nid(i + 1, j + 1, k),
                           nid(i, j + 1, k), nid(i, j, k + 1), nid(i + 1, j, k + 1),
                           nid(i + 1, j + 1, k + 1), nid(i, j + 1, k + 1)]
                for t in _FREUDENTHAL:
                    tets.append(tuple(corners[v] for v in t))
    if removed == 0:
        raise MeshError("notch slab removed no cells; thickness below element size?")
    elements = np.array(tets, dtype=np.int64)
    nodes, elements, _ = _prune_nodes(nodes, elements)

    node_sets = {
        "fix": np.flatnonzero(np.abs(nodes[:, 0]) < 1e-12),
        "load": np.flatnonzero(np.abs(nodes[:, 0] - L) < 1e-12),
        "monitor": np.array([_nearest_node(nodes, (L, W, H))]),
    }
    meta = {
        "geometry": "tension3d",
        "length": L, "width": W, "height": H,
        "notch_depth": h0, "notch_thickness": b0,
        "notch_angle_deg": notch_angle_deg,
        "notch_normal": normal.tolist(),
        "ligament": H - h0,
        "seed_point": [0.5 * L, 0.5 * W, H - h0],
        "propagation_axis": [0.0, 0.0, -1.0],
        "size": size,
        "load_direction": [1.0, 0.0, 0.0],
        "primary_monitor": "monitor_node",
    }
    mesh = Mesh(dimension=3, kind="tet4", nodes=nodes, elements=elements,
                node_sets=node_sets, metadata=meta)
    mesh.validate()
    return mesh
