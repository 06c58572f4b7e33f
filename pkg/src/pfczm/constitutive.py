"""Integration-point material model: phase-field cohesive zone with fatigue.

All quantities use the N / mm / MPa unit system (fracture energy in N/mm).
The model couples three ingredients evaluated pointwise:

* a geometric crack function ``alpha_hat(phi) = xi*phi + (1 - xi)*phi**2``
  with scaling constant ``c0 = 4 * int_0^1 sqrt(alpha_hat) dbeta`` (``c0 = pi``
  for ``xi = 2``),
* a rational energetic degradation function
  ``g(phi) = (1 - phi)^p / ((1 - phi)^p + Q(phi))`` whose coefficients are
  calibrated so that the regularized model reproduces an exponential
  traction-separation law ``sigma(w) = ft * exp(-ft/Gf * w)``,
* a tension-only driving force ``Y = <sigma1>^2 / (2 E0)`` tracked through a
  non-decreasing history field with floor ``Hmin = ft^2 / (2 E0)``, plus a
  fatigue degradation factor ``f(abar)`` that scales the fracture energy once
  the accumulated measure ``abar`` passes the threshold ``aT = Gf / (kf*ell)``.

Everything here is a pure function of its inputs (or of a per-point state
record owned by the caller) and accepts scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.integrate import quad

ArrayLike = Union[float, np.ndarray]


# -----------------------------
# Parameter records
# -----------------------------

@dataclass(frozen=True)
class MaterialParams:
    """Physical constants of the model (N, mm, MPa)."""

    E0: float                 # Young's modulus [MPa]
    nu: float                 # Poisson's ratio [-]
    ft: float                 # tensile strength [MPa]
    Gf: float                 # fracture energy [N/mm]
    ell: float                # regularization length [mm]
    xi: float = 2.0           # geometric function coefficient, in (0, 2]
    p: float = 2.5            # degradation exponent, > 2
    kf: float = 0.01          # fatigue accumulation rate parameter, >= 0 (0 disables fatigue)
    plane_assumption: str = "plane-stress"   # "plane-stress" | "3D"

    def validate(self) -> None:
        if not self.E0 > 0.0:
            raise ValueError(f"E0 must be > 0, got {self.E0}")
        if not 0.0 <= self.nu < 0.5:
            raise ValueError(f"nu must be in [0, 0.5), got {self.nu}")
        if not self.ft > 0.0:
            raise ValueError(f"ft must be > 0, got {self.ft}")
        if not self.Gf > 0.0:
            raise ValueError(f"Gf must be > 0, got {self.Gf}")
        if not self.ell > 0.0:
            raise ValueError(f"ell must be > 0, got {self.ell}")
        if not 0.0 < self.xi <= 2.0:
            raise ValueError(f"xi must be in (0, 2], got {self.xi}")
        if not self.p > 2.0:
            raise ValueError(
                f"p must be > 2 (the p <= 2 calibration branch is not supported), got {self.p}"
            )
        if self.kf < 0.0:
            raise ValueError(f"kf must be >= 0, got {self.kf}")
        if self.plane_assumption not in ("plane-stress", "3D"):
            raise ValueError(
                f"plane_assumption must be 'plane-stress' or '3D', got {self.plane_assumption!r}"
            )


@dataclass(frozen=True)
class DerivedCoefficients:
    """Closed-form coefficients derived from :class:`MaterialParams`.

    ``c0`` scales the crack surface density, ``a1/a2/a3`` parametrize the
    degradation function, ``k0 = -ft^2/Gf`` is the initial softening slope of
    the target cohesive law, ``alphaT`` the fatigue threshold (``inf`` when
    ``kf = 0``) and ``Hmin`` the driving-force floor.
    """

    c0: float
    a1: float
    a2: float
    a3: float
    k0: float      # [MPa^2 * mm / N], negative
    alphaT: float  # [MPa]; +inf disables fatigue
    Hmin: float    # [MPa]


def scaling_constant(xi: Optional[float] = None,
                     alpha_hat: Optional[Callable[[float], float]] = None,
                     rel_tol: float = 1e-12) -> float:
    """Scaling constant ``c0 = 4 * int_0^1 sqrt(alpha_hat(beta)) dbeta``.

    Either ``xi`` (standard quadratic geometric function) or an explicit
    ``alpha_hat`` callable may be given; the callable hook exists so tests can
    feed the classical linear/quadratic crack functions.
    """
    if alpha_hat is None:
        if xi is None:
            raise ValueError("either xi or alpha_hat must be given")
        x = float(xi)

        def alpha_hat(beta: float) -> float:
            return x * beta + (1.0 - x) * beta * beta

    val, _err = quad(lambda b: math.sqrt(max(alpha_hat(b), 0.0)), 0.0, 1.0,
                     epsabs=rel_tol, epsrel=rel_tol, limit=200)
    return 4.0 * val


def derive_coefficients(params: MaterialParams) -> DerivedCoefficients:
    """Derive the degradation coefficients and fatigue/history constants.

    ``c0`` is integrated numerically (relative error below 1e-10 for any
    admissible ``xi``), then

    * ``a1 = (2 E0 Gf / ft^2) * xi / (c0 * ell)``
    * ``a2 = (1/xi) * [(-(4 pi xi^2 / c0) * (Gf/ft^2) * k0)^(2/3) + 1] - (p+1)``
    * ``a3 = 0`` (admissible since ``p > 2`` is enforced)

    with ``k0 = -ft^2 / Gf``.  For ``xi = 2`` these reduce to
    ``a1 = 4 E0 Gf / (pi ell ft^2)`` and, at the default ``p = 2.5``,
    ``a2 = 2^(5/3) - 3``.
    """
    params.validate()
    c0 = scaling_constant(xi=params.xi)
    k0 = -params.ft ** 2 / params.Gf
    a1 = (2.0 * params.E0 * params.Gf / params.ft ** 2) * params.xi / (c0 * params.ell)
    base = -(4.0 * math.pi * params.xi ** 2 / c0) * (params.Gf / params.ft ** 2) * k0
    a2 = (base ** (2.0 / 3.0) + 1.0) / params.xi - (params.p + 1.0)
    a3 = 0.0
    # g(1) = 0 requires Q(1) > 0; guard against inadmissible (xi, p) pairs.
    if 1.0 + a2 + a2 * a3 <= 0.0:
        raise ValueError(
            f"inadmissible degradation coefficients (a2={a2:.6g}): "
            "Q(1) <= 0, pick a smaller p or larger xi"
        )
    alphaT = params.Gf / (params.kf * params.ell) if params.kf > 0.0 else math.inf
    Hmin = params.ft ** 2 / (2.0 * params.E0)
    return DerivedCoefficients(c0=c0, a1=a1, a2=a2, a3=a3, k0=k0,
                               alphaT=alphaT, Hmin=Hmin)


# -----------------------------
# Pointwise functions
# -----------------------------

def geometric_function(phi: ArrayLike, xi: float) -> Tuple[np.ndarray, np.ndarray]:
    """Crack geometric function ``alpha_hat`` and its derivative.

    ``alpha_hat(phi) = xi*phi + (1 - xi)*phi^2`` satisfies
    ``alpha_hat(0) = 0`` and ``alpha_hat(1) = 1`` for any ``xi``.
    """
    phi = np.asarray(phi, dtype=float)
    value = xi * phi + (1.0 - xi) * phi * phi
    deriv = xi + 2.0 * (1.0 - xi) * phi
    return value, deriv


def degradation(phi: ArrayLike, coeffs: DerivedCoefficients,
                p: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Energetic degradation ``g`` with analytic first and second derivatives.

    ``g = u / (u + Q)`` with ``u = (1-phi)^p`` and
    ``Q = a1*phi + a1*a2*phi^2 + a1*a2*a3*phi^3``.  The second derivative is
    returned analytically because it enters the phase-field Newton tangent,
    where finite differencing would degrade convergence.
    """
    phi = np.asarray(phi, dtype=float)
    a1, a2, a3 = coeffs.a1, coeffs.a2, coeffs.a3
    one = 1.0 - phi
    u = one ** p
    du = -p * one ** (p - 1.0)
    ddu = p * (p - 1.0) * one ** (p - 2.0)
    q = a1 * phi + a1 * a2 * phi ** 2 + a1 * a2 * a3 * phi ** 3
    dq = a1 + 2.0 * a1 * a2 * phi + 3.0 * a1 * a2 * a3 * phi ** 2
    ddq = 2.0 * a1 * a2 + 6.0 * a1 * a2 * a3 * phi
    v = u + q
    dv = du + dq
    ddv = ddu + ddq
    g = u / v
    gp = (du * v - u * dv) / v ** 2
    gpp = ((ddu * v - u * ddv) * v - 2.0 * dv * (du * v - u * dv)) / v ** 3
    return g, gp, gpp


def reference_cohesive_stress(w: ArrayLike, params: MaterialParams) -> np.ndarray:
    """Target traction-separation envelope ``sigma(w) = ft * exp(-ft/Gf * w)``.

    Verification helper only (the regularized model never evaluates it);
    ``sigma(0) = ft`` and the initial slope equals ``k0 = -ft^2/Gf``.
    """
    w = np.asarray(w, dtype=float)
    return params.ft * np.exp(-params.ft / params.Gf * w)


def elastic_matrix(params: MaterialParams, dim: int) -> np.ndarray:
    """Isotropic elasticity matrix in engineering Voigt notation.

    2D uses plane stress ([xx, yy, xy]); 3D uses [xx, yy, zz, yz, xz, xy].
    """
    E, nu = params.E0, params.nu
    if dim == 2:
        if params.plane_assumption != "plane-stress":
            raise ValueError("2D analyses are plane stress; set plane_assumption='plane-stress'")
        f = E / (1.0 - nu * nu)
        return f * np.array([[1.0, nu, 0.0],
                             [nu, 1.0, 0.0],
                             [0.0, 0.0, 0.5 * (1.0 - nu)]])
    if dim == 3:
        lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
        mu = E / (2.0 * (1.0 + nu))
        D = np.zeros((6, 6))
        D[:3, :3] = lam
        D[0, 0] = D[1, 1] = D[2, 2] = lam + 2.0 * mu
        D[3, 3] = D[4, 4] = D[5, 5] = mu
        return D
    raise ValueError(f"dim must be 2 or 3, got {dim}")


def elastic_response(strain: np.ndarray,
                     params: MaterialParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Undamaged stress, strain energy density and largest principal stress.

    ``strain`` holds engineering Voigt components in the trailing axis
    (3 entries for plane stress, 6 for 3D); any number of leading axes is
    allowed.  Returns ``(stress, psi0, sigma1)`` where ``psi0 >= 0`` is
    ``0.5 * strain : C : strain`` and ``sigma1`` the largest (in-plane for 2D)
    eigenvalue of the effective stress tensor.
    """
    strain = np.asarray(strain, dtype=float)
    nv = strain.shape[-1]
    dim = 2 if nv == 3 else 3
    D = elastic_matrix(params, dim)
    stress = strain @ D.T
    psi0 = 0.5 * np.sum(stress * strain, axis=-1)
    if dim == 2:
        sxx, syy, sxy = stress[..., 0], stress[..., 1], stress[..., 2]
        center = 0.5 * (sxx + syy)
        radius = np.sqrt((0.5 * (sxx - syy)) ** 2 + sxy ** 2)
        sigma1 = center + radius
    else:
        T = np.zeros(stress.shape[:-1] + (3, 3))
        T[..., 0, 0] = stress[..., 0]
        T[..., 1, 1] = stress[..., 1]
        T[..., 2, 2] = stress[..., 2]
        T[..., 1, 2] = T[..., 2, 1] = stress[..., 3]
        T[..., 0, 2] = T[..., 2, 0] = stress[..., 4]
        T[..., 0, 1] = T[..., 1, 0] = stress[..., 5]
        sigma1 = np.linalg.eigvalsh(T)[..., -1]
    return stress, psi0, sigma1


def driving_force(sigma1: ArrayLike, params: MaterialParams) -> np.ndarray:
    """Tension-only crack driving force ``<sigma1>^2 / (2 E0)``."""
    s = np.maximum(np.asarray(sigma1, dtype=float), 0.0)
    return s * s / (2.0 * params.E0)


def fatigue_degradation(alpha_bar: ArrayLike, alphaT: float) -> np.ndarray:
    """Fracture-energy reduction factor ``f(abar)``.

    Equals 1 up to and including the threshold, then decays as
    ``(2 aT / (abar + aT))^2``; with ``alphaT = inf`` (fatigue disabled) it is
    identically 1.
    """
    ab = np.asarray(alpha_bar, dtype=float)
    if math.isinf(alphaT):
        return np.ones_like(ab)
    f = np.ones_like(ab)
    over = ab > alphaT
    f = np.where(over, (2.0 * alphaT / (ab + alphaT)) ** 2, f)
    return f


# -----------------------------
# Per-point state
# -----------------------------

@dataclass
class QuadPointState:
    """History record per quadrature point (parallel arrays over all points).

    ``H`` is the running maximum of the driving force (never below ``Hmin``),
    ``alpha_bar`` the accumulated fatigue measure, ``alpha_prev`` the
    accumulation variable of the previous committed increment and ``f_fat``
    the current fracture-energy reduction factor.
    """

    H: np.ndarray
    alpha_bar: np.ndarray
    alpha_prev: np.ndarray
    f_fat: np.ndarray

    @classmethod
    def initial(cls, n_points: int, coeffs: DerivedCoefficients) -> "QuadPointState":
        return cls(H=np.full(n_points, coeffs.Hmin),
                   alpha_bar=np.zeros(n_points),
                   alpha_prev=np.zeros(n_points),
                   f_fat=np.ones(n_points))

    def copy(self) -> "QuadPointState":
        return QuadPointState(self.H.copy(), self.alpha_bar.copy(),
                              self.alpha_prev.copy(), self.f_fat.copy())


def update_history(state: QuadPointState, Y: ArrayLike,
                   coeffs: DerivedCoefficients) -> np.ndarray:
    """Raise the history field to ``max(H, Y, Hmin)`` (in place) and return it.

    Idempotent under repeated identical inputs; unloading leaves H frozen.
    """
    state.H = np.maximum(np.maximum(state.H, np.asarray(Y, dtype=float)), coeffs.Hmin)
    return state.H


def update_fatigue(state: QuadPointState, phi: ArrayLike, psi0: ArrayLike,
                   coeffs: DerivedCoefficients) -> Tuple[np.ndarray, np.ndarray]:
    """Accumulate fatigue from end-of-increment fields and refresh ``f_fat``.

    The accumulation variable is ``a = (1 - phi)^2 * psi0``; only increments
    where ``a`` did not decrease (loading stages) add ``a - a_prev`` to
    ``alpha_bar``, while ``alpha_prev`` tracks ``a`` in both branches.
    Called once per converged increment.
    """
    phi = np.asarray(phi, dtype=float)
    psi0 = np.asarray(psi0, dtype=float)
    a_new = (1.0 - phi) ** 2 * psi0
    grew = a_new >= state.alpha_prev
    state.alpha_bar = state.alpha_bar + np.where(grew, a_new - state.alpha_prev, 0.0)
    state.alpha_prev = a_new + 0.0
    state.f_fat = fatigue_degradation(state.alpha_bar, coeffs.alphaT)
    return state.alpha_bar, state.f_fat
