"""Time-incremental driver: load programs, staggered solution, run logging.

Each increment performs a single-pass alternate minimization: solve the
displacement subsystem linearly with the damage field of the previous
increment, evaluate the driving force and freeze the history field, then
Newton-solve the phase-field subsystem with frozen history and frozen fatigue
factors.  History, fatigue state and monitors are committed once the pass
chain succeeds, so a rejected increment leaves the state untouched.

Loading scenarios:

* LS1, monotonic ramp controlled by CTOD (bending beams) or by a prescribed
  boundary displacement (bars, 3D beams).
* LS2, CTOD-controlled unload/reload excursions followed by a final ramp.
* LS3, force-controlled cycles with step-wise raised upper level.
* LS4, force-controlled constant-amplitude fatigue blocks.

Force-controlled programs describe levels as fractions of a reference
ultimate force, which is either supplied or measured from a monotonic run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (DirichletBC, ElementData, assemble_displacement,
                       assemble_phasefield, collect_dirichlet, consistent_load,
                       crack_density_at_qps, phasefield_energy)
from .constitutive import (MaterialParams, QuadPointState, derive_coefficients,
                           driving_force, elastic_response, update_fatigue)
from .mesh import Mesh
from .postproc import build_node_graph, extract_crack_length


class SolverError(RuntimeError):
    pass


class NewtonError(SolverError):
    """Phase-field Newton did not converge."""


class SingularSystemError(SolverError):
    """Linear solve failed on a (near) singular stiffness."""


class InvariantError(SolverError):
    """An always-on run assertion (irreversibility, monotone state) failed."""


class ProgramError(ValueError):
    pass


def _splu(matrix) -> spla.SuperLU:
    """Sparse LU tuned for the symmetric systems assembled here."""
    return spla.splu(matrix.tocsc(), permc_spec="MMD_AT_PLUS_A",
                     options=dict(SymmetricMode=True))


# -----------------------------
# Settings and load programs
# -----------------------------

@dataclass
class SolverSettings:
    newton_tol: float = 1e-6          # relative residual drop
    newton_abs_tol: float = 1e-8      # residual floor, scaled by mesh reaction capacity
    max_newton_iter: int = 50
    staggered_passes: int = 1         # single-pass by default
    linear_solver: str = "sparse-direct"   # "sparse-direct" | "cg"
    max_bisections: int = 5
    divergence_guard: float = 100.0   # multiple of the first-cycle monitor step
    quadrature: Optional[int] = None  # points per element, kind default if None

    def validate(self) -> None:
        if self.newton_tol <= 0.0 or self.newton_abs_tol <= 0.0:
            raise ProgramError("newton tolerances must be positive")
        if self.max_newton_iter < 1 or self.staggered_passes < 1:
            raise ProgramError("iteration counts must be >= 1")
        if self.linear_solver not in ("sparse-direct", "cg"):
            raise ProgramError(f"unknown linear solver {self.linear_solver!r}")


@dataclass(frozen=True)
class CycleBlock:
    smax: float      # upper level, fraction of the reference ultimate force
    smin: float      # lower level
    count: int       # cycles in this block

    def validate(self) -> None:
        if not 0.0 <= self.smin < self.smax <= 1.0:
            raise ProgramError(f"need 0 <= smin < smax <= 1, got ({self.smin}, {self.smax})")
        if self.count < 1:
            raise ProgramError("cycle count must be >= 1")


@dataclass(frozen=True)
class CtodCycle:
    upper: float
    lower: float


@dataclass
class LoadProgram:
    scenario: str                    # LS1 | LS2 | LS3 | LS4
    control: str                     # ctod | force | displacement
    target: float = 0.0              # monotonic end value (LS1/LS2 tail)
    increments: int = 100            # monotonic increment count
    cycle_blocks: List[CycleBlock] = field(default_factory=list)
    ctod_cycles: List[CtodCycle] = field(default_factory=list)
    increments_per_cycle: int = 10
    reference_force: Optional[float] = None
    max_cycles: Optional[int] = None

    def validate(self) -> None:
        if self.scenario not in ("LS1", "LS2", "LS3", "LS4"):
            raise ProgramError(f"unknown scenario {self.scenario!r}")
        if self.control not in ("ctod", "force", "displacement"):
            raise ProgramError(f"unknown control {self.control!r}")
        ipc = self.increments_per_cycle
        if ipc < 4 or ipc % 2 != 0:
            raise ProgramError("increments_per_cycle must be even and >= 4")
        if self.scenario in ("LS1", "LS2"):
            if self.control == "force":
                raise ProgramError(f"{self.scenario} is displacement-type controlled")
            if self.target <= 0.0 or self.increments < 1:
                raise ProgramError("monotonic programs need target > 0 and increments >= 1")
        if self.scenario == "LS2" and not self.ctod_cycles:
            raise ProgramError("LS2 needs unloading cycles")
        if self.scenario in ("LS3", "LS4"):
            if self.control != "force":
                raise ProgramError(f"{self.scenario} is force controlled")
            if not self.cycle_blocks:
                raise ProgramError(f"{self.scenario} needs cycle blocks")
            for b in self.cycle_blocks:
                b.validate()


def stepwise_blocks(smax_start: float = 0.50, smax_step: float = 0.05,
                    smin: float = 0.10, cycles_per_level: int = 10,
                    smax_end: float = 0.95) -> List[CycleBlock]:
    """Blocks for the step-wise raised pre-peak cycling scenario."""
    blocks = []
    s = smax_start
    while s <= smax_end + 1e-12:
        blocks.append(CycleBlock(smax=min(s, 1.0), smin=smin, count=cycles_per_level))
        s += smax_step
    return blocks


@dataclass(frozen=True)
class _Step:
    t: float
    cycle: int
    target: float
    is_peak: bool = False


def build_schedule(program: LoadProgram) -> List[_Step]:
    """Expand a program into per-increment control targets.

    Cyclic loading splits each cycle evenly between loading and unloading
    ramps; force targets are stored as fractions of the reference force.
    """
    program.validate()
    steps: List[_Step] = []
    if program.scenario == "LS1":
        n = program.increments
        for i in range(1, n + 1):
            steps.append(_Step(t=i / n, cycle=0, target=program.target * i / n,
                               is_peak=(i == n)))
        return steps

    half = program.increments_per_cycle // 2

    def ramp(t0: float, cycle: int, a: float, b: float, peak_at_end: bool) -> float:
        for i in range(1, half + 1):
            steps.append(_Step(t=t0 + 0.5 * i / half, cycle=cycle,
                               target=a + (b - a) * i / half,
                               is_peak=(peak_at_end and i == half)))
        return t0 + 0.5

    if program.scenario == "LS2":
        t = 0.0
        cur = 0.0
        cyc = 0
        for cb in program.ctod_cycles:
            cyc += 1
            t = ramp(t, cyc, cur, cb.upper, True)
            t = ramp(t, cyc, cb.upper, cb.lower, False)
            cur = cb.lower
        n = program.increments
        for i in range(1, n + 1):
            steps.append(_Step(t=t + i / n, cycle=cyc,
                               target=cur + (program.target - cur) * i / n,
                               is_peak=(i == n)))
        return steps

    # LS3 / LS4: force fractions per cycle
    cycles: List[Tuple[float, float]] = []
    for b in program.cycle_blocks:
        cycles.extend([(b.smax, b.smin)] * b.count)
    if program.max_cycles is not None:
        cycles = cycles[: program.max_cycles]
    t = 0.0
    cur = 0.0
    for i, (smax, smin) in enumerate(cycles, start=1):
        t = ramp(t, i, cur, smax, True)
        t = ramp(t, i, smax, smin, False)
        cur = smin
    return steps


# -----------------------------
# Load setup (BCs, monitors)
# -----------------------------

@dataclass
class LoadSetup:
    fixed_bcs: List[DirichletBC]
    load_set: str
    load_direction: np.ndarray
    control_component: int             # for displacement control
    ctod_pair: Optional[Tuple[int, int]] = None
    cmod_pair: Optional[Tuple[int, int]] = None
    monitor_node: Optional[int] = None
    primary_monitor: str = "control"   # ctod | cmod | monitor_node | control


def load_setup_from_mesh(mesh: Mesh) -> LoadSetup:
    """Supports, load pattern and monitors implied by a generated mesh."""
    geo = mesh.metadata.get("geometry")
    direction = np.asarray(mesh.metadata.get("load_direction", [0.0, -1.0]), dtype=float)
    if geo == "senb":
        pair = tuple(int(i) for i in mesh.node_sets["ctod"])
        mouth = tuple(int(i) for i in mesh.node_sets["cmod"])
        return LoadSetup(
            fixed_bcs=[DirichletBC("support_left", "x"), DirichletBC("support_left", "y"),
                       DirichletBC("support_right", "y")],
            load_set="load", load_direction=direction, control_component=1,
            ctod_pair=pair, cmod_pair=mouth, primary_monitor="ctod")
    if geo == "bar":
        return LoadSetup(
            fixed_bcs=[DirichletBC("fix", "x"), DirichletBC("corner", "y")],
            load_set="pull", load_direction=direction, control_component=0,
            primary_monitor="control")
    if geo == "tension3d":
        return LoadSetup(
            fixed_bcs=[DirichletBC("fix", "x"), DirichletBC("fix", "y"),
                       DirichletBC("fix", "z")],
            load_set="load", load_direction=direction, control_component=0,
            monitor_node=int(mesh.node_sets["monitor"][0]),
            primary_monitor="monitor_node")
    raise ProgramError(f"mesh metadata lacks a recognized geometry tag ({geo!r}); "
                       "supply a load setup explicitly")


# -----------------------------
# Run records
# -----------------------------

@dataclass
class RunLog:
    rows: List[dict]
    metadata: Dict
    status: str = "completed"             # completed | failed | aborted
    failure_cause: Optional[str] = None
    failure_cycle: Optional[int] = None   # cycle index at failure
    peak_force: float = 0.0
    final_phi: Optional[np.ndarray] = None
    final_u: Optional[np.ndarray] = None

    @property
    def cycles_to_failure(self) -> Optional[int]:
        return self.failure_cycle if self.status == "failed" else None


@dataclass
class _State:
    u: np.ndarray
    phi: np.ndarray
    qp: QuadPointState
    gamma: np.ndarray          # crack density per quadrature point
    dissipated: float
    crack: float
    control_value: float

    def copy(self) -> "_State":
        return _State(self.u.copy(), self.phi.copy(), self.qp.copy(),
                      self.gamma.copy(), self.dissipated, self.crack,
                      self.control_value)


# -----------------------------
# Simulation engine
# -----------------------------

class Simulation:
    """Bundles mesh-fixed data and performs staggered increments."""

    def __init__(self, mesh: Mesh, params: MaterialParams,
                 settings: Optional[SolverSettings] = None,
                 setup: Optional[LoadSetup] = None):
        params.validate()
        self.settings = settings or SolverSettings()
        self.settings.validate()
        self.mesh = mesh
        self.params = params
        self.coeffs = derive_coefficients(params)
        self.setup = setup or load_setup_from_mesh(mesh)
        self.edata = ElementData(mesh, params, self.settings.quadrature)
        self.dim = self.edata.dim
        self.bc_dofs, self.bc_vals = collect_dirichlet(
            mesh, self.setup.fixed_bcs, self.dim)
        self.f_unit = consistent_load(mesh, self.setup.load_set,
                                      self.setup.load_direction)
        self.graph = build_node_graph(mesh)
        self.node_measure = self.edata.lumped_node_measure()
        self.load_dofs = (np.asarray(mesh.node_sets[self.setup.load_set]) * self.dim
                          + self.setup.control_component)
        self._factor_cache: Dict = {"phi": None}
        # Reaction capacity of the phase-field residual; absolute Newton
        # tolerances are measured against this so they track mesh size.
        cap = np.bincount(self.edata.conn.ravel(),
                          weights=self.edata.NW.sum(axis=1).ravel(),
                          minlength=mesh.n_nodes) / params.ell ** 2
        self.phi_residual_scale = float(np.linalg.norm(cap))

    # ---- state ----

    def initial_state(self) -> _State:
        nqp = self.edata.mesh.n_elements * self.edata.n_quad
        qp = QuadPointState.initial(nqp, self.coeffs)
        shape = (self.edata.mesh.n_elements, self.edata.n_quad)
        for name in ("H", "alpha_bar", "alpha_prev", "f_fat"):
            setattr(qp, name, getattr(qp, name).reshape(shape))
        return _State(u=np.zeros(self.edata.ndof_u),
                      phi=np.zeros(self.mesh.n_nodes),
                      qp=qp, gamma=np.zeros(shape), dissipated=0.0,
                      crack=0.0, control_value=0.0)

    # ---- linear displacement solve ----

    def _factorized(self, phi: np.ndarray, extra_dofs: Optional[np.ndarray]):
        cache = self._factor_cache
        key_extra = -1 if extra_dofs is None else len(extra_dofs)
        if cache.get("phi") is not None and np.array_equal(cache["phi"], phi) \
                and cache.get("extra") == key_extra:
            return cache["K"], cache["Kbc"], cache["lu"], cache["dofs"]
        system = assemble_displacement(self.edata, phi, self.coeffs, self.params)
        K = system.matrix
        dofs = self.bc_dofs
        if extra_dofs is not None:
            dofs = np.unique(np.concatenate([dofs, extra_dofs]))
        n = system.ndof
        free = np.ones(n)
        free[dofs] = 0.0
        Df = sp.diags(free)
        fixed = np.zeros(n)
        fixed[dofs] = 1.0
        Kbc = (Df @ K @ Df + sp.diags(fixed)).tocsc()
        lu = None
        if self.settings.linear_solver == "sparse-direct":
            try:
                lu = _splu(Kbc)
            except RuntimeError as exc:
                node = self._suspect_node(Kbc)
                raise SingularSystemError(
                    f"displacement stiffness is singular ({exc}); suspect node {node}"
                ) from exc
        cache.update(phi=phi.copy(), extra=key_extra, K=K, Kbc=Kbc, lu=lu, dofs=dofs)
        return K, Kbc, lu, dofs

    def _suspect_node(self, K) -> int:
        diag = np.abs(K.diagonal())
        return int(np.argmin(diag)) // self.dim

    def solve_displacement(self, phi: np.ndarray, f_ext: np.ndarray,
                           prescribed: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                           ) -> Tuple[np.ndarray, sp.csr_matrix]:
        """Solve the degraded elastic system; returns (u, stiffness before BCs)."""
        extra_dofs = prescribed[0] if prescribed is not None else None
        K, Kbc, lu, dofs = self._factorized(phi, extra_dofs)
        n = K.shape[0]
        u_bc = np.zeros(n)
        u_bc[self.bc_dofs] = self.bc_vals
        if prescribed is not None:
            u_bc[prescribed[0]] = prescribed[1]
        rhs_bc = f_ext - K @ u_bc
        rhs_bc[dofs] = u_bc[dofs]
        if lu is None:
            diag = Kbc.diagonal()
            if np.any(diag <= 0.0):
                raise SingularSystemError("non-positive diagonal in displacement "
                                          f"stiffness; suspect node {self._suspect_node(Kbc)}")
            M = sp.diags(1.0 / diag)
            u, info = spla.cg(Kbc, rhs_bc, M=M, rtol=1e-12, atol=0.0, maxiter=20 * n)
            if info != 0:
                raise SingularSystemError(f"conjugate gradient failed (info={info})")
        else:
            u = lu.solve(rhs_bc)
        if not np.all(np.isfinite(u)):
            raise SingularSystemError("displacement solve produced non-finite values; "
                                      f"suspect node {self._suspect_node(K)}")
        return u, K

    # ---- phase-field Newton ----

    def solve_phasefield_newton(self, phi0: np.ndarray, H_qp: np.ndarray,
                                f_qp: np.ndarray) -> Tuple[np.ndarray, int]:
        """Damped projected Newton on the frozen-history reaction-diffusion system.

        Iterates are clamped to [0, 1]; convergence is measured on the
        projected residual, which ignores bound-consistent entries (a node
        held at a bound whose residual pushes it further out).  Steps are
        globalized by backtracking on the potential whose gradient is the
        residual; where the exact tangent is indefinite (damage snapping
        through) a positive definite convexified tangent takes over, so the
        iteration descends monotonically into the post-snap well.
        """
        st = self.settings
        atol = st.newton_abs_tol * self.phi_residual_scale

        def projected_norm(p: np.ndarray, R: np.ndarray) -> float:
            ok = ((p <= 1e-14) & (R > 0.0)) | ((p >= 1.0 - 1e-14) & (R < 0.0))
            return float(np.linalg.norm(np.where(ok, 0.0, R)))

        def energy(p: np.ndarray) -> float:
            return phasefield_energy(self.edata, p, H_qp, f_qp,
                                     self.coeffs, self.params)

        phi = np.clip(phi0, 0.0, 1.0)
        R, A = assemble_phasefield(self.edata, phi, H_qp, f_qp,
                                   self.coeffs, self.params)
        norm0 = projected_norm(phi, R)
        if norm0 < atol:
            return phi, 0
        E = energy(phi)
        norm = norm0
        for it in range(1, st.max_newton_iter + 1):
            accepted = None
            for convex in (False, True):
                if convex:
                    _, J = assemble_phasefield(self.edata, phi, H_qp, f_qp,
                                               self.coeffs, self.params,
                                               convexify=True)
                else:
                    J = A
                try:
                    dphi = _splu(J).solve(-R)
                except RuntimeError:
                    continue
                step = 1.0
                for _ in range(12):
                    cand = np.clip(phi + step * dphi, 0.0, 1.0)
                    slope = float(R @ (cand - phi))
                    Ec = energy(cand)
                    if Ec <= E + 1e-4 * min(slope, 0.0) + 1e-14 * abs(E):
                        accepted = (cand, Ec)
                        break
                    step *= 0.5
                if accepted is not None:
                    break
            if accepted is None:
                raise NewtonError(f"phase-field Newton stalled at |R|={norm:.3e}")
            cand, E = accepted
            moved = float(np.max(np.abs(cand - phi)))
            phi = cand
            R, A = assemble_phasefield(self.edata, phi, H_qp, f_qp,
                                       self.coeffs, self.params)
            norm = projected_norm(phi, R)
            if norm < max(st.newton_tol * norm0, atol) or moved < 1e-11:
                return phi, it
        raise NewtonError(f"phase-field Newton exceeded {st.max_newton_iter} iterations "
                          f"(|R|/|R0| = {norm / norm0:.3e})")

    # ---- monitors ----

    def monitors(self, u: np.ndarray) -> Dict[str, float]:
        out = {"CTOD": 0.0, "CMOD": 0.0, "CMSD": 0.0, "monitor": 0.0}
        s = self.setup
        if s.ctod_pair is not None:
            a, b = s.ctod_pair
            out["CTOD"] = float(u[b * self.dim] - u[a * self.dim])
        if s.cmod_pair is not None:
            a, b = s.cmod_pair
            out["CMOD"] = float(u[b * self.dim] - u[a * self.dim])
            out["CMSD"] = float(u[b * self.dim + 1] - u[a * self.dim + 1])
        if s.monitor_node is not None:
            dof = s.monitor_node * self.dim + int(np.argmax(np.abs(s.load_direction)))
            out["monitor"] = float(u[dof])
        return out

    def primary_monitor_value(self, mon: Dict[str, float], control_value: float) -> float:
        key = self.setup.primary_monitor
        if key == "ctod":
            return mon["CTOD"]
        if key == "cmod":
            return mon["CMOD"]
        if key == "monitor_node":
            return mon["monitor"]
        return control_value

    def ctod_of(self, u: np.ndarray) -> float:
        if self.setup.ctod_pair is None:
            raise ProgramError("mesh provides no CTOD monitor pair")
        a, b = self.setup.ctod_pair
        return float(u[b * self.dim] - u[a * self.dim])

    def control_ctod_scaling(self, phi: np.ndarray,
                             ctod_target: float) -> Tuple[float, np.ndarray]:
        """Force and displacement field realizing a CTOD target.

        One unit-load solve fixes the (linear, fixed-damage) response; the
        returned force is exact for the current damage field, which keeps
        post-peak paths snapback-free under CTOD control.
        """
        u1, _ = self.solve_displacement(phi, self.f_unit)
        c1 = self.ctod_of(u1)
        if not c1 > 0.0:
            raise ProgramError(
                f"unit-load CTOD is {c1:.3e}; monitor pair inverted or load path broken")
        scale = ctod_target / c1
        return scale, scale * u1

    # ---- one staggered increment ----

    def increment(self, state: _State, control: str, target: float,
                  fu: float = 1.0) -> Tuple[_State, Dict[str, float]]:
        """Run one increment; returns (new committed state, record fields).

        Raises NewtonError / SingularSystemError without touching ``state``.
        """
        phi_prev = state.phi
        phi = phi_prev
        force = 0.0
        u = state.u
        H_frozen = state.qp.H
        for _ in range(self.settings.staggered_passes):
            if control == "force":
                force = target * fu
                u, _K = self.solve_displacement(phi, force * self.f_unit)
            elif control == "ctod":
                force, u = self.control_ctod_scaling(phi, target)
            elif control == "displacement":
                pres = (self.load_dofs, np.full(self.load_dofs.shape, target))
                u, K = self.solve_displacement(phi, np.zeros_like(self.f_unit),
                                               prescribed=pres)
                reac = K @ u
                d = self.setup.load_direction / np.linalg.norm(self.setup.load_direction)
                comp = int(np.argmax(np.abs(d)))
                force = float(reac[self.load_dofs].sum() * np.sign(d[comp]))
            else:
                raise ProgramError(f"unknown control {control!r}")

            strain = self.edata.strain_at_qps(u)
            _stress, psi0, sigma1 = elastic_response(strain, self.params)
            Y = driving_force(sigma1, self.params)
            H_frozen = np.maximum(np.maximum(state.qp.H, Y), self.coeffs.Hmin)
            phi_new, _iters = self.solve_phasefield_newton(phi, H_frozen,
                                                           state.qp.f_fat)
            phi = np.clip(phi_new, phi_prev, 1.0)

        # Commit: history, dissipation, fatigue, monitors.
        new = state.copy()
        new.u = u
        new.phi = phi
        new.qp.H = H_frozen
        gamma = crack_density_at_qps(self.edata, phi, self.coeffs, self.params)
        d_inc = float(np.sum(self.edata.qp_weight * state.qp.f_fat
                             * self.params.Gf * (gamma - state.gamma)))
        new.gamma = gamma
        new.dissipated = state.dissipated + d_inc
        phi_qp = np.clip(self.edata.phi_at_qps(phi), 0.0, 1.0)
        update_fatigue(new.qp, phi_qp, psi0, self.coeffs)
        new.control_value = target

        self._check_invariants(state, new, d_inc)

        measure = extract_crack_length(phi, self.mesh, graph=self.graph,
                                       node_measure=self.node_measure)
        new.crack = max(state.crack, measure.length)
        mon = self.monitors(u)
        rec = {"F": force, "control": target, "CTOD": mon["CTOD"],
               "CMOD": mon["CMOD"], "CMSD": mon["CMSD"],
               "monitor": mon["monitor"], "a": new.crack,
               "max_phi": float(phi.max()),
               "dissipated_energy": new.dissipated}
        return new, rec

    def _check_invariants(self, old: _State, new: _State, d_inc: float) -> None:
        if np.any(new.phi < old.phi - 1e-12):
            raise InvariantError("phase field decreased beyond tolerance")
        if np.any(new.qp.H < old.qp.H - 1e-14):
            raise InvariantError("history field decreased")
        if np.any(new.qp.alpha_bar < old.qp.alpha_bar - 1e-14):
            raise InvariantError("fatigue accumulation decreased")
        if np.any(new.qp.f_fat > old.qp.f_fat + 1e-14):
            raise InvariantError("fatigue degradation factor increased")
        if d_inc < -1e-9 * max(1.0, abs(new.dissipated)):
            raise InvariantError(f"dissipated energy decreased by {d_inc:.3e}")


# -----------------------------
# Program driver
# -----------------------------

def run_program(mesh: Mesh, params: MaterialParams, program: LoadProgram,
                settings: Optional[SolverSettings] = None,
                setup: Optional[LoadSetup] = None,
                row_sink: Optional[Callable[[dict], None]] = None,
                state_probe: Optional[Callable] = None) -> RunLog:
    """Execute a load program and return the populated run log.

    ``row_sink`` receives each committed record (used for CSV streaming);
    ``state_probe(sim, state, row)`` can snapshot internal state for tests.
    Force-controlled programs require ``program.reference_force``.
    """
    program.validate()
    sim = Simulation(mesh, params, settings, setup)
    fu = program.reference_force
    if program.control == "force":
        if fu is None or fu <= 0.0:
            raise ProgramError("force-controlled programs need reference_force "
                               "(measure it with a monotonic run first)")
    else:
        fu = 1.0

    schedule = build_schedule(program)
    state = sim.initial_state()
    rows: List[dict] = []
    status, cause, n_fail = "completed", None, None
    guard_ref = 0.0
    prev_primary = 0.0
    increment_no = 0
    ligament = float(mesh.metadata.get("ligament", math.inf))
    stop = False

    for step in schedule:
        prev_target = state.control_value
        pending = [step.target]
        bisections = 0
        verdict = None        # "failed" | "aborted" once the run must stop
        while pending:
            tgt = pending[0]
            try:
                new_state, rec = sim.increment(state, program.control, tgt, fu)
            except (NewtonError, SingularSystemError) as exc:
                bisections += 1
                if bisections > sim.settings.max_bisections:
                    cause = f"{type(exc).__name__}: {exc}"
                    # A force-controlled system that cannot equilibrate has
                    # failed; under displacement-type control this is a
                    # solver abort worth surfacing.
                    verdict = "failed" if program.control == "force" else "aborted"
                    break
                pending.insert(0, 0.5 * (prev_target + tgt))
                continue
            increment_no += 1
            rec.update(increment=increment_no, cycle=step.cycle, t=step.t)
            rows.append(rec)
            if row_sink is not None:
                row_sink(rec)
            primary = sim.primary_monitor_value(rec, rec["control"])
            d_primary = abs(primary - prev_primary)
            prev_primary = primary
            state = new_state
            prev_target = tgt
            pending.pop(0)
            if state_probe is not None and state_probe(sim, state, rec):
                stop = True
                break
            if program.control == "force":
                if step.cycle <= 1:
                    guard_ref = max(guard_ref, d_primary)
                elif guard_ref > 0.0 and d_primary > sim.settings.divergence_guard * guard_ref:
                    cause = ("divergence guard: monitor increment "
                             f"{d_primary:.3e} exceeds {sim.settings.divergence_guard:g}x "
                             f"first-cycle reference {guard_ref:.3e}")
                    verdict = "failed"
                    break
            if state.crack >= 0.98 * ligament:
                cause = f"crack reached the ligament end ({state.crack:.3g} mm)"
                verdict = "failed"
                break
        if verdict is not None:
            status = verdict
            n_fail = step.cycle
            break
        if stop:
            break

    peak = max((r["F"] for r in rows), default=0.0)
    meta = {
        "scenario": program.scenario,
        "control": program.control,
        "reference_force": fu if program.control == "force" else None,
        "increments_per_cycle": program.increments_per_cycle,
        "mesh_hash": mesh.content_hash(),
        "n_elements": mesh.n_elements,
        "quadrature_points": sim.edata.n_quad,
        "material": {k: getattr(params, k) for k in
                     ("E0", "nu", "ft", "Gf", "ell", "xi", "p", "kf",
                      "plane_assumption")},
        "settings": {"newton_tol": sim.settings.newton_tol,
                     "max_newton_iter": sim.settings.max_newton_iter,
                     "staggered_passes": sim.settings.staggered_passes,
                     "linear_solver": sim.settings.linear_solver,
                     "divergence_guard": sim.settings.divergence_guard},
        "failure_criterion": "singular solve, Newton divergence after bisection, "
                             "monitor increment beyond guard, or crack at ligament end",
        "geometry": dict(mesh.metadata),
    }
    return RunLog(rows=rows, metadata=meta, status=status, failure_cause=cause,
                  failure_cycle=n_fail, peak_force=peak,
                  final_phi=state.phi.copy(), final_u=state.u.copy())


def measure_ultimate_force(mesh: Mesh, params: MaterialParams,
                           settings: Optional[SolverSettings] = None,
                           control: Optional[str] = None,
                           target: Optional[float] = None,
                           increments: int = 100,
                           stop_fraction: float = 0.55) -> Tuple[float, RunLog]:
    """Peak force of a monotonic ramp (the reference for force fractions).

    Uses CTOD control when the mesh provides a monitor pair, otherwise a
    prescribed boundary displacement.  Default targets bracket the peak with
    a margin (the cohesive opening scale Gf/ft for CTOD control, a multiple
    of the elastic limit stretch otherwise); the ramp ends early once the
    reaction drops below ``stop_fraction`` of the running peak.
    """
    if control is None:
        control = "ctod" if "ctod" in mesh.node_sets else "displacement"
    if target is None:
        if control == "ctod":
            target = 4.0 * params.Gf / params.ft
        else:
            d = np.asarray(mesh.metadata.get("load_direction", [1.0, 0.0, 0.0]))
            axis = int(np.argmax(np.abs(d[: mesh.dimension])))
            extent = float(mesh.nodes[:, axis].max() - mesh.nodes[:, axis].min())
            target = 4.0 * extent * params.ft / params.E0
    program = LoadProgram(scenario="LS1", control=control, target=target,
                          increments=increments)
    peak_seen = {"v": 0.0}

    def probe(sim, state, rec):
        peak_seen["v"] = max(peak_seen["v"], rec["F"])
        return rec["F"] < stop_fraction * peak_seen["v"]

    log = run_program(mesh, params, program, settings, state_probe=probe)
    return log.peak_force, log
