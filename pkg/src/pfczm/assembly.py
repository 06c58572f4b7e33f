"""Sparse assembly of the displacement and phase-field subsystems.

The displacement subsystem is degraded linear elasticity,
``K(phi) = sum_e int g(phi) B^T D B``.  The phase-field subsystem is a
reaction-diffusion residual with unit diffusivity,

    R_i = int grad(N_i) . grad(phi)
        + int N_i * [ c0 / (2 ell Gf_fat) * g'(phi) * H + (1 - phi) / ell^2 ]

with ``Gf_fat = f * Gf`` per quadrature point, and the Newton tangent

    A_ij = K_diff + int N_i N_j * [ c0 / (2 ell Gf_fat) * g''(phi) * H - 1 / ell^2 ].

Element kinematics are precomputed once per mesh (:class:`ElementData`);
assemblies then reduce to einsums plus one deterministic COO -> CSR pass, so
repeated runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .constitutive import DerivedCoefficients, MaterialParams, degradation, elastic_matrix
from .elements import ELEMENT_KINDS, element_quadrature, shape_functions
from .mesh import Mesh


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class DirichletBC:
    """Fix one displacement component (or phi) on a named node set."""

    node_set: str
    component: str          # 'x' | 'y' | 'z' | 'phi'
    value: float = 0.0


@dataclass
class SparseSystem:
    """Assembled symmetric system with its dof numbering convention.

    Displacement dofs interleave components: dof = node * dof_per_node + comp.
    The phase field uses one dof per node (dof_per_node = 1).
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dof_per_node: int

    @property
    def ndof(self) -> int:
        return self.rhs.shape[0]

    def node_dof(self, node: int, component: int = 0) -> int:
        return node * self.dof_per_node + component

    def symmetry_error(self) -> float:
        d = self.matrix - self.matrix.T
        denom = max(np.abs(self.matrix.data).max(), 1e-300)
        return float(np.abs(d.data).max() / denom) if d.nnz else 0.0


class ElementData:
    """Precomputed element kinematics, quadrature weights and dof maps."""

    def __init__(self, mesh: Mesh, params: MaterialParams,
                 n_quad: Optional[int] = None):
        kind = ELEMENT_KINDS[mesh.kind]
        self.mesh = mesh
        self.kind = kind
        self.dim = kind.dim
        self.n_voigt = 3 if kind.dim == 2 else 6
        pts, wts = element_quadrature(mesh.kind, n_quad)
        self.n_quad = pts.shape[0]
        conn = mesh.elements
        coords = mesh.nodes[conn]                       # (ne, k, dim)
        ne, k, dim = coords.shape
        nq = self.n_quad

        self.N = np.zeros((nq, k))
        dN_ref = np.zeros((nq, k, dim))
        for q in range(nq):
            self.N[q], dN_ref[q] = shape_functions(mesh.kind, pts[q])

        self.dNdx = np.zeros((ne, nq, k, dim))
        self.qp_weight = np.zeros((ne, nq))             # w * |J|
        for q in range(nq):
            J = np.einsum("eka,kb->eab", coords, dN_ref[q])
            detJ = np.linalg.det(J)
            Jinv = np.linalg.inv(J)
            self.dNdx[:, q] = np.einsum("kb,eba->eka", dN_ref[q], Jinv)
            self.qp_weight[:, q] = wts[q] * detJ

        # Strain-displacement operator, engineering Voigt rows.
        nd = k * dim
        B = np.zeros((ne, nq, self.n_voigt, nd))
        dN = self.dNdx
        if dim == 2:
            B[:, :, 0, 0::2] = dN[..., 0]
            B[:, :, 1, 1::2] = dN[..., 1]
            B[:, :, 2, 0::2] = dN[..., 1]
            B[:, :, 2, 1::2] = dN[..., 0]
        else:
            B[:, :, 0, 0::3] = dN[..., 0]
            B[:, :, 1, 1::3] = dN[..., 1]
            B[:, :, 2, 2::3] = dN[..., 2]
            B[:, :, 3, 1::3] = dN[..., 2]
            B[:, :, 3, 2::3] = dN[..., 1]
            B[:, :, 4, 0::3] = dN[..., 2]
            B[:, :, 4, 2::3] = dN[..., 0]
            B[:, :, 5, 0::3] = dN[..., 1]
            B[:, :, 5, 1::3] = dN[..., 0]
        self.B = B

        D = elastic_matrix(params, dim)
        M0 = np.einsum("eqvi,vw,eqwj->eqij", B, D, B)
        M0 = 0.5 * (M0 + np.swapaxes(M0, -1, -2))       # exact symmetry
        self.stiff0 = M0 * self.qp_weight[:, :, None, None]

        self.Kdiff = np.einsum("eq,eqka,eqla->ekl", self.qp_weight, dN, dN)
        self.Kdiff = 0.5 * (self.Kdiff + np.swapaxes(self.Kdiff, -1, -2))
        self.Mq = np.einsum("eq,qk,ql->eqkl", self.qp_weight, self.N, self.N)
        self.NW = self.qp_weight[:, :, None] * self.N[None, :, :]

        self.conn = conn
        self.u_dof = (conn[:, :, None] * dim + np.arange(dim)[None, None, :]).reshape(ne, nd)
        self.rows_u = np.repeat(self.u_dof, nd, axis=1).ravel()
        self.cols_u = np.tile(self.u_dof, (1, nd)).ravel()
        self.rows_p = np.repeat(conn, k, axis=1).ravel()
        self.cols_p = np.tile(conn, (1, k)).ravel()
        self.n_nodes = mesh.n_nodes
        self.ndof_u = mesh.n_nodes * dim
        self.total_volume = float(self.qp_weight.sum())

    # ---- field evaluation at quadrature points ----

    def phi_at_qps(self, phi: np.ndarray) -> np.ndarray:
        return np.einsum("ek,qk->eq", phi[self.conn], self.N)

    def grad_phi_at_qps(self, phi: np.ndarray) -> np.ndarray:
        return np.einsum("eqka,ek->eqa", self.dNdx, phi[self.conn])

    def strain_at_qps(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("eqvj,ej->eqv", self.B, u[self.u_dof])

    def lumped_node_measure(self) -> np.ndarray:
        """Nodal volume (area in 2D) from row-sum lumping of the mass terms."""
        w = np.zeros(self.n_nodes)
        np.add.at(w, self.conn.ravel(),
                  np.einsum("eq,qk->ek", self.qp_weight, self.N).ravel())
        return w


# -----------------------------
# Subsystem assembly
# -----------------------------

def assemble_displacement(edata: ElementData, phi: np.ndarray,
                          coeffs: DerivedCoefficients,
                          params: MaterialParams) -> SparseSystem:
    """Degraded elastic stiffness using phi interpolated at quadrature points."""
    phi_q = np.clip(edata.phi_at_qps(phi), 0.0, 1.0)
    g, _, _ = degradation(phi_q, coeffs, params.p)
    Ke = np.einsum("eq,eqij->eij", g, edata.stiff0)
    K = sp.coo_matrix((Ke.ravel(), (edata.rows_u, edata.cols_u)),
                      shape=(edata.ndof_u, edata.ndof_u)).tocsr()
    return SparseSystem(matrix=K, rhs=np.zeros(edata.ndof_u), dof_per_node=edata.dim)


def assemble_phasefield(edata: ElementData, phi: np.ndarray, H_qp: np.ndarray,
                        f_qp: np.ndarray, coeffs: DerivedCoefficients,
                        params: MaterialParams,
                        convexify: bool = False) -> Tuple[np.ndarray, sp.csr_matrix]:
    """Residual and Newton tangent of the phase-field subsystem.

    ``H_qp`` and ``f_qp`` are frozen per-quadrature-point arrays of shape
    (n_elements, n_quad).  Returns (residual, tangent).  With ``convexify``
    the reaction part of the tangent is clamped non-negative, which yields a
    positive definite globalization matrix (the residual is untouched).
    """
    if np.any(f_qp <= 0.0):
        raise AssemblyError("fatigue degradation factor must stay positive")
    phi_e = phi[edata.conn]
    phi_q = np.clip(np.einsum("ek,qk->eq", phi_e, edata.N), 0.0, 1.0)
    _, gp, gpp = degradation(phi_q, coeffs, params.p)
    cr = coeffs.c0 / (2.0 * params.ell * params.Gf * f_qp)
    inv_l2 = 1.0 / params.ell ** 2
    react = cr * gp * H_qp + inv_l2 * (1.0 - phi_q)
    dreact = cr * gpp * H_qp - inv_l2
    if convexify:
        dreact = np.maximum(dreact, 0.0)

    Re = np.einsum("eij,ej->ei", edata.Kdiff, phi_e)
    Re += np.einsum("eq,eqi->ei", react, edata.NW)
    R = np.bincount(edata.conn.ravel(), weights=Re.ravel(),
                    minlength=edata.n_nodes)

    Ae = edata.Kdiff + np.einsum("eq,eqij->eqij", dreact, edata.Mq).sum(axis=1)
    A = sp.coo_matrix((Ae.ravel(), (edata.rows_p, edata.cols_p)),
                      shape=(edata.n_nodes, edata.n_nodes)).tocsr()
    return R, A


def phasefield_energy(edata: ElementData, phi: np.ndarray, H_qp: np.ndarray,
                      f_qp: np.ndarray, coeffs: DerivedCoefficients,
                      params: MaterialParams) -> float:
    """Potential whose gradient is the assembled phase-field residual.

    Per quadrature point: ``|grad phi|^2 / 2 + cr * g(phi) * H
    - (1 - phi)^2 / (2 ell^2)`` with ``cr = c0 / (2 ell Gf f)``.  Used by the
    Newton globalization (monotone energy descent through damage snaps).
    """
    phi_q = np.clip(edata.phi_at_qps(phi), 0.0, 1.0)
    g, _, _ = degradation(phi_q, coeffs, params.p)
    grad = edata.grad_phi_at_qps(phi)
    cr = coeffs.c0 / (2.0 * params.ell * params.Gf * f_qp)
    dens = (0.5 * np.sum(grad * grad, axis=-1) + cr * g * H_qp
            - (1.0 - phi_q) ** 2 / (2.0 * params.ell ** 2))
    return float(np.sum(edata.qp_weight * dens))


def crack_density_at_qps(edata: ElementData, phi: np.ndarray,
                         coeffs: DerivedCoefficients,
                         params: MaterialParams) -> np.ndarray:
    """Crack surface density gamma = [alpha_hat/ell + ell*|grad phi|^2] / c0."""
    from .constitutive import geometric_function

    phi_q = np.clip(edata.phi_at_qps(phi), 0.0, 1.0)
    a_hat, _ = geometric_function(phi_q, params.xi)
    grad = edata.grad_phi_at_qps(phi)
    return (a_hat / params.ell + params.ell * np.sum(grad * grad, axis=-1)) / coeffs.c0


# -----------------------------
# Boundary conditions and loads
# -----------------------------

_COMPONENTS = {"x": 0, "y": 1, "z": 2, "phi": 0}


def collect_dirichlet(mesh: Mesh, bcs: Sequence[DirichletBC],
                      dof_per_node: int) -> Tuple[np.ndarray, np.ndarray]:
    """Expand named-set BCs into (dof indices, values); reject conflicts."""
    seen: Dict[int, Tuple[float, DirichletBC]] = {}
    for bc in bcs:
        if bc.node_set not in mesh.node_sets:
            raise AssemblyError(f"boundary condition references unknown node set "
                                f"{bc.node_set!r}")
        comp = _COMPONENTS.get(bc.component)
        if comp is None or (bc.component == "phi") != (dof_per_node == 1):
            raise AssemblyError(f"component {bc.component!r} not valid here")
        if comp >= dof_per_node:
            raise AssemblyError(f"component {bc.component!r} exceeds dimension")
        for n in mesh.node_sets[bc.node_set]:
            dof = int(n) * dof_per_node + comp
            if dof in seen and seen[dof][0] != bc.value:
                raise AssemblyError(
                    f"conflicting Dirichlet values on node {int(n)} component "
                    f"{bc.component!r}: {seen[dof][0]} vs {bc.value}")
            seen[dof] = (bc.value, bc)
    dofs = np.array(sorted(seen), dtype=np.int64)
    values = np.array([seen[d][0] for d in dofs])
    return dofs, values


def apply_dirichlet(system: SparseSystem, dofs: np.ndarray,
                    values: np.ndarray) -> SparseSystem:
    """Symmetric row/column elimination with right-hand-side correction.

    Constrained rows/columns are zeroed, unit diagonal entries inserted and
    the prescribed values moved to the RHS, so the solution of the modified
    system carries the prescribed values exactly.
    """
    n = system.ndof
    u_bc = np.zeros(n)
    u_bc[dofs] = values
    rhs = system.rhs - system.matrix @ u_bc
    free = np.ones(n)
    free[dofs] = 0.0
    Df = sp.diags(free)
    fixed = np.zeros(n)
    fixed[dofs] = 1.0
    K = (Df @ system.matrix @ Df + sp.diags(fixed)).tocsr()
    rhs = free * rhs
    rhs[dofs] = values
    return SparseSystem(matrix=K, rhs=rhs, dof_per_node=system.dof_per_node)


def _boundary_entities(mesh: Mesh) -> np.ndarray:
    """Boundary edges (2D) or faces (3D) as node-index rows."""
    if mesh.dimension == 2:
        if mesh.kind == "tri3":
            loc = [(0, 1), (1, 2), (2, 0)]
        else:
            loc = [(0, 1), (1, 2), (2, 3), (3, 0)]
    else:
        loc = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
    ents = np.concatenate([mesh.elements[:, list(f)] for f in loc], axis=0)
    key = np.sort(ents, axis=1)
    _, idx, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    return ents[idx[counts == 1]]


def consistent_load(mesh: Mesh, node_set: str, direction: Sequence[float],
                    total: float = 1.0) -> np.ndarray:
    """Nodal force vector distributing ``total`` over a boundary node set.

    Weights follow the tributary boundary measure (edge length in 2D, face
    area in 3D) so the resultant is statically equivalent to a uniform
    traction over the covered boundary; isolated nodes fall back to equal
    weights.
    """
    if node_set not in mesh.node_sets:
        raise AssemblyError(f"unknown node set {node_set!r}")
    sel = np.zeros(mesh.n_nodes, dtype=bool)
    sel[mesh.node_sets[node_set]] = True
    w = np.zeros(mesh.n_nodes)
    for ent in _boundary_entities(mesh):
        if not sel[ent].all():
            continue
        pts = mesh.nodes[ent]
        if mesh.dimension == 2:
            measure = float(np.linalg.norm(pts[1] - pts[0]))
        else:
            measure = 0.5 * float(np.linalg.norm(np.cross(pts[1] - pts[0], pts[2] - pts[0])))
        w[ent] += measure / len(ent)
    if w[sel].sum() <= 0.0:
        w[sel] = 1.0
    w[~sel] = 0.0
    w *= total / w.sum()
    d = np.asarray(direction, dtype=float)
    d /= np.linalg.norm(d)
    f = np.zeros(mesh.n_nodes * mesh.dimension)
    for c in range(mesh.dimension):
        f[c::mesh.dimension] = w * d[c]
    return f
