"""Post-processing: crack tracing, stress-intensity amplitudes, Paris fits,
S-N aggregation and the CSV/VTK output writers.

CSV series schema (one row per increment):
``increment,cycle,t,F,control,CTOD,CMOD,CMSD,a,max_phi,dissipated_energy``.
Field output uses legacy ASCII VTK unstructured grids with the damage field
and displacements as point data and the per-element history quantities as
cell data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .elements import ELEMENT_KINDS
from .mesh import Mesh

CSV_COLUMNS = ["increment", "cycle", "t", "F", "control", "CTOD", "CMOD",
               "CMSD", "a", "max_phi", "dissipated_energy"]


class PostprocError(ValueError):
    pass


# -----------------------------
# Crack geometry
# -----------------------------

@dataclass
class CrackMeasure:
    threshold: float
    length: float                 # advance beyond the notch root [mm]
    tip: Optional[np.ndarray]     # coordinates of the farthest traced node


_EDGE_LOCAL = {
    "tri3": [(0, 1), (1, 2), (2, 0)],
    "quad4": [(0, 1), (1, 2), (2, 3), (3, 0)],
    "tet4": [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
}


def build_node_graph(mesh: Mesh) -> sp.csr_matrix:
    """Undirected node adjacency weighted by Euclidean edge length."""
    pairs = np.concatenate([mesh.elements[:, list(e)] for e in _EDGE_LOCAL[mesh.kind]],
                           axis=0)
    pairs = np.unique(np.sort(pairs, axis=1), axis=0)
    lengths = np.linalg.norm(mesh.nodes[pairs[:, 0]] - mesh.nodes[pairs[:, 1]], axis=1)
    n = mesh.n_nodes
    g = sp.coo_matrix((np.concatenate([lengths, lengths]),
                       (np.concatenate([pairs[:, 0], pairs[:, 1]]),
                        np.concatenate([pairs[:, 1], pairs[:, 0]]))), shape=(n, n))
    return g.tocsr()


def extract_crack_length(phi: np.ndarray, mesh: Mesh, threshold: float = 0.95,
                         graph: Optional[sp.csr_matrix] = None,
                         node_measure: Optional[np.ndarray] = None) -> CrackMeasure:
    """Crack advance traced from the notch root through the damaged region.

    2D: geodesic length (along mesh edges) from the seed point to the farthest
    connected node with ``phi >= threshold``; this follows the ridge of a
    narrow band to within an element size.  3D: measure-weighted mean advance
    of the over-threshold nodes along the propagation axis.
    """
    meta = mesh.metadata
    seed = np.asarray(meta.get("seed_point", mesh.nodes.mean(axis=0)), dtype=float)
    above = np.flatnonzero(phi >= threshold)
    if above.size == 0:
        return CrackMeasure(threshold=threshold, length=0.0, tip=None)

    if mesh.dimension == 3:
        axis = np.asarray(meta.get("propagation_axis", [0.0, 0.0, -1.0]), dtype=float)
        axis /= np.linalg.norm(axis)
        adv = (mesh.nodes[above] - seed) @ axis
        w = (node_measure[above] if node_measure is not None
             else np.ones(above.size))
        ahead = adv > 0.0
        if not ahead.any():
            return CrackMeasure(threshold=threshold, length=0.0,
                                tip=mesh.nodes[above[int(np.argmax(adv))]].copy())
        length = float(np.sum(w[ahead] * adv[ahead]) / np.sum(w[ahead]))
        tip = mesh.nodes[above[int(np.argmax(adv))]].copy()
        return CrackMeasure(threshold=threshold, length=length, tip=tip)

    if graph is None:
        graph = build_node_graph(mesh)
    d_seed = np.linalg.norm(mesh.nodes[above] - seed, axis=1)
    # Trace starts at over-threshold nodes adjacent to the notch root; a
    # detached damaged region elsewhere does not count as crack advance.
    start_radius = 3.0 * float(np.median(graph.data)) if graph.nnz else np.inf
    starts = np.flatnonzero(d_seed <= start_radius)
    if starts.size == 0:
        return CrackMeasure(threshold=threshold, length=0.0, tip=None)
    sub = graph[above][:, above]
    dist = dijkstra(sub, directed=False, indices=starts, min_only=True)
    reach = np.isfinite(dist)
    i = int(np.argmax(np.where(reach, dist, -np.inf)))
    return CrackMeasure(threshold=threshold, length=float(dist[i]),
                        tip=mesh.nodes[above[i]].copy())


# -----------------------------
# Stress intensity and Paris law
# -----------------------------

def senb_geometry_factor(alpha: float) -> float:
    """Dimensionless three-point-bend geometry function f(a/h)."""
    if not 0.0 < alpha < 1.0:
        raise PostprocError(f"a/h must lie in (0, 1), got {alpha}")
    num = 3.0 * math.sqrt(alpha) * (1.99 - alpha * (1.0 - alpha)
                                    * (2.15 - 3.93 * alpha + 2.70 * alpha ** 2))
    den = 2.0 * (1.0 + 2.0 * alpha) * (1.0 - alpha) ** 1.5
    return num / den


def compute_sif_senb(force: float, span: float, thickness: float, height: float,
                     crack: float) -> float:
    """Mode-I stress intensity K_I [MPa*mm^0.5] for a bend bar.

    ``crack`` is the total crack depth (notch plus traced advance).  Zero
    force gives zero K_I; K_I is linear in the force at fixed crack depth.
    """
    alpha = crack / height
    return force * span / (thickness * height ** 1.5) * senb_geometry_factor(alpha)


@dataclass
class ParisFit:
    C: float
    m: float
    r_squared: float
    n_points: int
    series: List[Tuple[float, float]] = field(default_factory=list)  # (dK, da/dN)


def fit_paris(series: Sequence[Tuple[float, float]], min_points: int = 5) -> ParisFit:
    """Least-squares power-law fit da/dN = C * dK^m in log-log space.

    Points with non-positive growth or amplitude are excluded before fitting;
    fewer than ``min_points`` surviving points refuse the fit.
    """
    pts = [(dk, da) for dk, da in series if dk > 0.0 and da > 0.0]
    if len(pts) < min_points:
        raise PostprocError(
            f"Paris fit needs at least {min_points} positive-growth points, "
            f"got {len(pts)}")
    x = np.log10([p[0] for p in pts])
    y = np.log10([p[1] for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0.0 else 1.0
    return ParisFit(C=10.0 ** intercept, m=float(slope), r_squared=r2,
                    n_points=len(pts), series=pts)


def cycle_peak_rows(rows: Sequence[dict]) -> List[dict]:
    """One row per cycle, taken at the upper load level (max force)."""
    best: Dict[int, dict] = {}
    for r in rows:
        c = int(r["cycle"])
        if c < 1:
            continue
        if c not in best or r["F"] > best[c]["F"]:
            best[c] = r
    return [best[c] for c in sorted(best)]


def paris_series_from_rows(rows: Sequence[dict], height: float, span: float,
                           notch_depth: float, smin_ratio: float,
                           thickness: float = 1.0,
                           window: Tuple[float, float] = (0.01, 0.8),
                           ) -> List[Tuple[float, float]]:
    """Per-cycle (dK_I, da/dN) pairs from logged increments.

    Growth is evaluated at the upper load level of each cycle; the amplitude
    uses the current total crack depth and the block's force ratio.  Only
    cycles whose traced advance fraction a/height lies inside ``window``
    enter the series.
    """
    peaks = cycle_peak_rows(rows)
    out: List[Tuple[float, float]] = []
    for prev, cur in zip(peaks[:-1], peaks[1:]):
        da = cur["a"] - prev["a"]
        dn = cur["cycle"] - prev["cycle"]
        if dn <= 0:
            continue
        frac = cur["a"] / height
        if not window[0] <= frac <= window[1]:
            continue
        crack_total = notch_depth + cur["a"]
        if not 0.0 < crack_total / height < 1.0:
            continue
        kmax = compute_sif_senb(cur["F"], span, thickness, height, crack_total)
        kmin = compute_sif_senb(cur["F"] * smin_ratio, span, thickness, height,
                                crack_total)
        out.append((kmax - kmin, da / dn))
    return out


# -----------------------------
# S-N bookkeeping
# -----------------------------

@dataclass
class SNRow:
    smax: float
    smin: float
    kf: float
    cycles_to_failure: Optional[int]
    status: str = "failed"        # failed | survived | error


def sn_table_csv(rows: Sequence[SNRow]) -> str:
    lines = ["smax,smin,kf,Nf,status"]
    for r in rows:
        nf = "" if r.cycles_to_failure is None else str(r.cycles_to_failure)
        lines.append(f"{r.smax:.6g},{r.smin:.6g},{r.kf:.6g},{nf},{r.status}")
    return "\n".join(lines) + "\n"


# -----------------------------
# Writers
# -----------------------------

def format_series_rows(rows: Sequence[dict]) -> str:
    out = [",".join(CSV_COLUMNS)]
    for r in rows:
        out.append(format_series_row(r))
    return "\n".join(out) + "\n"


def format_series_row(r: dict) -> str:
    vals = [str(int(r["increment"])), str(int(r["cycle"])), f"{r['t']:.9g}",
            f"{r['F']:.9g}", f"{r['control']:.9g}", f"{r['CTOD']:.9g}",
            f"{r['CMOD']:.9g}", f"{r['CMSD']:.9g}", f"{r['a']:.9g}",
            f"{r['max_phi']:.9g}", f"{r['dissipated_energy']:.9g}"]
    return ",".join(vals)


def write_series_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w") as fh:
        fh.write(format_series_rows(rows))


def read_series_csv(path) -> List[dict]:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0].split(",") != CSV_COLUMNS:
        raise PostprocError(f"{path}: unexpected CSV header")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        r = dict(zip(CSV_COLUMNS, parts))
        rows.append({
            "increment": int(r["increment"]), "cycle": int(r["cycle"]),
            "t": float(r["t"]), "F": float(r["F"]), "control": float(r["control"]),
            "CTOD": float(r["CTOD"]), "CMOD": float(r["CMOD"]),
            "CMSD": float(r["CMSD"]), "a": float(r["a"]),
            "max_phi": float(r["max_phi"]),
            "dissipated_energy": float(r["dissipated_energy"]),
        })
    return rows


def write_fields_vtk(mesh: Mesh, path, point_scalars: Dict[str, np.ndarray],
                     point_vectors: Dict[str, np.ndarray],
                     cell_scalars: Dict[str, np.ndarray],
                     title: str = "pfczm fields") -> None:
    """Legacy ASCII VTK unstructured grid writer (deterministic output)."""
    vtk_id = ELEMENT_KINDS[mesh.kind].vtk_id
    pts = mesh.nodes
    if mesh.dimension == 2:
        pts = np.column_stack([pts, np.zeros(mesh.n_nodes)])
    k = mesh.elements.shape[1]
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.n_nodes} double\n")
        for p in pts:
            fh.write(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
        fh.write(f"CELLS {mesh.n_elements} {mesh.n_elements * (k + 1)}\n")
        for e in mesh.elements:
            fh.write(f"{k} " + " ".join(str(int(n)) for n in e) + "\n")
        fh.write(f"CELL_TYPES {mesh.n_elements}\n")
        for _ in range(mesh.n_elements):
            fh.write(f"{vtk_id}\n")
        if point_scalars or point_vectors:
            fh.write(f"POINT_DATA {mesh.n_nodes}\n")
            for name, arr in point_scalars.items():
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in arr:
                    fh.write(f"{v:.9g}\n")
            for name, arr in point_vectors.items():
                vec = np.asarray(arr, dtype=float).reshape(mesh.n_nodes, -1)
                if vec.shape[1] == 2:
                    vec = np.column_stack([vec, np.zeros(mesh.n_nodes)])
                fh.write(f"VECTORS {name} double\n")
                for v in vec:
                    fh.write(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        if cell_scalars:
            fh.write(f"CELL_DATA {mesh.n_elements}\n")
            for name, arr in cell_scalars.items():
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in arr:
                    fh.write(f"{v:.9g}\n")
