"""Mesh data model, validation and JSON file I/O.

The on-disk schema is a single JSON object:

.. code-block:: json

    {
      "dimension": 2,
      "element_kind": "tri3",
      "nodes": [[x, y], ...],
      "elements": [[n0, n1, n2], ...],
      "node_sets": {"name": [i, ...]},
      "side_sets": {"name": [[element, local_face], ...]},
      "metadata": {}
    }

Coordinates are in mm.  ``metadata`` is free-form (generators store the
geometry they were built from: monitor hints, ligament length, seed points).
A mesh holds one element kind; unknown kinds are rejected on read.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

from .elements import ELEMENT_KINDS, element_quadrature, shape_functions


class MeshError(ValueError):
    """Raised for schema violations or inconsistent mesh data."""


@dataclass
class Mesh:
    dimension: int
    kind: str
    nodes: np.ndarray                     # (n_nodes, dimension), mm
    elements: np.ndarray                  # (n_elements, nodes_per_element)
    node_sets: Dict[str, np.ndarray] = field(default_factory=dict)
    side_sets: Dict[str, np.ndarray] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def validate(self) -> None:
        """Check kind, index ranges, element non-degeneracy and set integrity."""
        ek = ELEMENT_KINDS.get(self.kind)
        if ek is None:
            raise MeshError(f"unknown element kind {self.kind!r}")
        if self.dimension != ek.dim:
            raise MeshError(f"element kind {self.kind} requires dimension {ek.dim}, "
                            f"mesh says {self.dimension}")
        if self.nodes.ndim != 2 or self.nodes.shape[1] != self.dimension:
            raise MeshError(f"nodes must be (n, {self.dimension}), got {self.nodes.shape}")
        if self.elements.ndim != 2 or self.elements.shape[1] != ek.n_nodes:
            raise MeshError(f"elements must be (n, {ek.n_nodes}), got {self.elements.shape}")
        bad = np.flatnonzero((self.elements < 0) | (self.elements >= self.n_nodes))
        if bad.size:
            e = int(bad[0] // ek.n_nodes)
            raise MeshError(f"element {e} references node index out of range "
                            f"(got {int(self.elements.flat[bad[0]])}, "
                            f"have {self.n_nodes} nodes)")
        self._check_jacobians()
        for name, idx in self.node_sets.items():
            if idx.size == 0:
                raise MeshError(f"node set {name!r} is empty")
            if np.any((idx < 0) | (idx >= self.n_nodes)):
                raise MeshError(f"node set {name!r} references nodes out of range")
        for name, faces in self.side_sets.items():
            if faces.size and np.any((faces[:, 0] < 0) | (faces[:, 0] >= self.n_elements)):
                raise MeshError(f"side set {name!r} references elements out of range")

    def _check_jacobians(self) -> None:
        pts, _ = element_quadrature(self.kind)
        coords = self.nodes[self.elements]          # (ne, k, dim)
        for q in range(pts.shape[0]):
            _, dN = shape_functions(self.kind, pts[q])
            J = np.einsum("eki,kj->eij", coords, dN)   # (ne, dim, dim)
            det = np.linalg.det(J)
            bad = np.flatnonzero(det <= 0.0)
            if bad.size:
                raise MeshError(f"element {int(bad[0])} has non-positive Jacobian "
                                f"determinant {det[bad[0]]:.3e}")

    # -----------------------------
    # Serialization
    # -----------------------------

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dimension": int(self.dimension),
            "element_kind": self.kind,
            "nodes": self.nodes.tolist(),
            "elements": self.elements.tolist(),
            "node_sets": {k: np.asarray(v).tolist() for k, v in sorted(self.node_sets.items())},
            "side_sets": {k: np.asarray(v).tolist() for k, v in sorted(self.side_sets.items())},
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Mesh":
        for key in ("dimension", "element_kind", "nodes", "elements"):
            if key not in data:
                raise MeshError(f"mesh file missing required field {key!r}")
        kind = data["element_kind"]
        if kind not in ELEMENT_KINDS:
            raise MeshError(f"unknown element kind {kind!r} in field 'element_kind'")
        mesh = cls(
            dimension=int(data["dimension"]),
            kind=kind,
            nodes=np.asarray(data["nodes"], dtype=float),
            elements=np.asarray(data["elements"], dtype=np.int64),
            node_sets={k: np.asarray(v, dtype=np.int64)
                       for k, v in data.get("node_sets", {}).items()},
            side_sets={k: np.asarray(v, dtype=np.int64).reshape(-1, 2)
                       for k, v in data.get("side_sets", {}).items()},
            metadata=dict(data.get("metadata", {})),
        )
        mesh.validate()
        return mesh

    def content_hash(self) -> str:
        """Deterministic digest of the mesh content (used in run metadata)."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        json.dump(mesh.to_dict(), fh)


def read_mesh(path) -> Mesh:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MeshError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise MeshError(f"{path}: top level must be a JSON object")
    try:
        return Mesh.from_dict(data)
    except MeshError as exc:
        raise MeshError(f"{path}: {exc}") from exc
