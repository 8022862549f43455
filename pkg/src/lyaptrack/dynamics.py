"""Rigid-body plant models: inertia, Coriolis/centrifugal, gravity, friction.

The plant is the standard mechanical form

    M(q) qdd + C(q, qd) qd + G(q) + F(t, qd) = tau

with M symmetric positive definite and C built from Christoffel symbols of M,
which makes Mdot - 2C skew-symmetric and gives the identity Mdot = C + C^T.
Two closed-form models ship with the library (1-DOF pendulum, planar two-link
with point masses at the link ends); arbitrary models can be assembled from a
user-supplied inertia matrix and potential energy, from which C, G and Mdot
are derived by finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import ContractViolationError, InputError, ModelDefinitenessError

# Step for the finite-difference Christoffel construction of custom models.
FD_STEP = 1e-6

# Velocity scale of the smoothed Coulomb friction tanh(qd / eps).
COULOMB_SMOOTHING = 1e-3


class ModelKind(Enum):
    PENDULUM_1DOF = "pendulum_1dof"
    TWO_LINK_PLANAR = "two_link_planar"
    CUSTOM = "custom"


class FrictionKind(Enum):
    ZERO = "zero"
    VISCOUS = "viscous"
    SMOOTH_COULOMB = "smooth_coulomb"


@dataclass(frozen=True)
class FrictionConfig:
    """Plant-side friction; the controller never reads it."""

    kind: FrictionKind = FrictionKind.ZERO
    coefficient: float = 0.0
    epsilon: float = COULOMB_SMOOTHING

    def force(self, t: float, qdot: np.ndarray) -> np.ndarray:
        if self.kind is FrictionKind.ZERO:
            return np.zeros_like(qdot)
        if self.kind is FrictionKind.VISCOUS:
            return self.coefficient * qdot
        return self.coefficient * np.tanh(qdot / self.epsilon)


@dataclass(frozen=True)
class JointState:
    """Generalized positions and velocities of an n-DOF mechanism."""

    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        qdot = np.atleast_1d(np.asarray(self.qdot, dtype=float))
        if q.ndim != 1 or qdot.ndim != 1 or q.size != qdot.size or q.size < 1:
            raise ContractViolationError(
                f"q and qdot must be 1-D vectors of equal length >= 1, "
                f"got shapes {q.shape} and {qdot.shape}"
            )
        if not (np.isfinite(q).all() and np.isfinite(qdot).all()):
            raise InputError("joint state entries must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qdot)

    @property
    def n(self) -> int:
        return self.q.size


@dataclass(frozen=True)
class RobotModel:
    """Evaluation interface for one mechanism.

    ``coriolis`` is what the plant and controller use. ``christoffel`` is the
    Christoffel-consistent Coriolis matrix derived from the inertia matrix;
    it backs the Mdot = C + C^T identity. For the built-in models and for
    customs without an override the two coincide, so Mdot - 2C is
    skew-symmetric by construction. A deliberately wrong ``coriolis``
    override (test hook) is caught because ``christoffel`` stays true to M.
    """

    kind: ModelKind
    n: int
    mass_matrix: Callable[[np.ndarray], np.ndarray]
    coriolis: Callable[[np.ndarray, np.ndarray], np.ndarray]
    gravity: Callable[[np.ndarray], np.ndarray]
    potential_energy: Callable[[np.ndarray], float]
    christoffel: Callable[[np.ndarray, np.ndarray], np.ndarray]
    friction_config: FrictionConfig = field(default_factory=FrictionConfig)
    parameters: dict = field(default_factory=dict)

    def with_friction(self, friction: FrictionConfig) -> "RobotModel":
        """Copy of this model with a different plant friction."""
        return RobotModel(
            kind=self.kind,
            n=self.n,
            mass_matrix=self.mass_matrix,
            coriolis=self.coriolis,
            gravity=self.gravity,
            potential_energy=self.potential_energy,
            christoffel=self.christoffel,
            friction_config=friction,
            parameters=self.parameters,
        )


def _check_vector(model: RobotModel, v, name: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (model.n,):
        raise ContractViolationError(
            f"{name} must have shape ({model.n},), got {v.shape}"
        )
    if not np.isfinite(v).all():
        raise InputError(f"{name} contains non-finite entries")
    return v


# ---------------------------------------------------------------------------
# built-in closed-form models
# ---------------------------------------------------------------------------

def pendulum_1dof(
    m: float = 1.0,
    l: float = 1.0,
    gravity: float = 9.81,
    friction: FrictionConfig = FrictionConfig(),
) -> RobotModel:
    """Point mass m on a rigid rod of length l.

    The joint angle is measured from the positive x-axis, so the potential
    energy is m*g*l*sin(q) and the gravity torque m*g*l*cos(q).
    """
    if m <= 0 or l <= 0:
        raise ContractViolationError("pendulum mass and length must be positive")
    ml2 = m * l * l
    mgl = m * gravity * l

    def mass(q):
        return np.array([[ml2]])

    def coriolis(q, qdot):
        return np.zeros((1, 1))

    def grav(q):
        return np.array([mgl * np.cos(q[0])])

    def potential(q):
        return mgl * np.sin(q[0])

    return RobotModel(
        kind=ModelKind.PENDULUM_1DOF,
        n=1,
        mass_matrix=mass,
        coriolis=coriolis,
        gravity=grav,
        potential_energy=potential,
        christoffel=coriolis,
        friction_config=friction,
        parameters={"m": m, "l": l, "g": gravity},
    )


def two_link_planar(
    m1: float = 1.0,
    m2: float = 1.0,
    l1: float = 1.0,
    l2: float = 1.0,
    gravity: float = 9.81,
    friction: FrictionConfig = FrictionConfig(),
) -> RobotModel:
    """Planar two-link arm with point masses at the link ends.

    q[0] is the shoulder angle from the positive x-axis, q[1] the relative
    elbow angle; gravity acts along -y. C comes from the Christoffel symbols
    of M, so Mdot - 2C is skew-symmetric.
    """
    if min(m1, m2, l1, l2) <= 0:
        raise ContractViolationError("two-link masses and lengths must be positive")
    a = (m1 + m2) * l1 * l1
    b = m2 * l2 * l2
    c = m2 * l1 * l2

    def mass(q):
        cos2 = np.cos(q[1])
        return np.array(
            [
                [a + b + 2.0 * c * cos2, b + c * cos2],
                [b + c * cos2, b],
            ]
        )

    def coriolis(q, qdot):
        h = c * np.sin(q[1])
        return np.array(
            [
                [-h * qdot[1], -h * (qdot[0] + qdot[1])],
                [h * qdot[0], 0.0],
            ]
        )

    def grav(q):
        g1 = gravity * ((m1 + m2) * l1 * np.cos(q[0]) + m2 * l2 * np.cos(q[0] + q[1]))
        g2 = gravity * m2 * l2 * np.cos(q[0] + q[1])
        return np.array([g1, g2])

    def potential(q):
        return gravity * (
            (m1 + m2) * l1 * np.sin(q[0]) + m2 * l2 * np.sin(q[0] + q[1])
        )

    return RobotModel(
        kind=ModelKind.TWO_LINK_PLANAR,
        n=2,
        mass_matrix=mass,
        coriolis=coriolis,
        gravity=grav,
        potential_energy=potential,
        christoffel=coriolis,
        friction_config=friction,
        parameters={"m1": m1, "m2": m2, "l1": l1, "l2": l2, "g": gravity},
    )


# ---------------------------------------------------------------------------
# custom models: C, G, Mdot derived from M and the potential energy
# ---------------------------------------------------------------------------

def _mass_partials(mass: Callable, q: np.ndarray, h: float) -> np.ndarray:
    """dM[k, i, j] = d M_ij / d q_k by central differences."""
    n = q.size
    dM = np.empty((n, n, n))
    for k in range(n):
        dq = np.zeros(n)
        dq[k] = h
        dM[k] = (np.asarray(mass(q + dq)) - np.asarray(mass(q - dq))) / (2.0 * h)
    return dM


def christoffel_coriolis(
    mass: Callable, q: np.ndarray, qdot: np.ndarray, h: float = FD_STEP
) -> np.ndarray:
    """Coriolis matrix from Christoffel symbols of the inertia matrix.

    C_ij = sum_k 0.5 * (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i) * qdot_k
    """
    dM = _mass_partials(mass, q, h)
    term1 = np.einsum("kij,k->ij", dM, qdot)
    term2 = np.einsum("jik,k->ij", dM, qdot)
    term3 = np.einsum("ijk,k->ij", dM, qdot)
    return 0.5 * (term1 + term2 - term3)


def custom_model(
    n: int,
    mass_matrix: Callable[[np.ndarray], np.ndarray],
    potential_energy: Callable[[np.ndarray], float],
    friction: FrictionConfig = FrictionConfig(),
    coriolis_override: Optional[Callable] = None,
    parameters: Optional[dict] = None,
    fd_step: float = FD_STEP,
) -> RobotModel:
    """Assemble a model from an inertia matrix and a potential energy.

    C is derived from finite-difference Christoffel symbols of M and G from
    the finite-difference gradient of the potential, so the skew-symmetry
    property holds without the caller hand-writing a consistent C.
    ``coriolis_override`` replaces the plant/controller C only; the Mdot
    construction keeps the derived C, which is what lets
    ``check_skew_symmetry`` expose an inconsistent override.
    """
    if n < 1:
        raise ContractViolationError("custom model needs n >= 1")

    def derived_coriolis(q, qdot):
        return christoffel_coriolis(mass_matrix, q, qdot, fd_step)

    def grav(q):
        g = np.empty(n)
        for k in range(n):
            dq = np.zeros(n)
            dq[k] = fd_step
            g[k] = (potential_energy(q + dq) - potential_energy(q - dq)) / (2.0 * fd_step)
        return g

    return RobotModel(
        kind=ModelKind.CUSTOM,
        n=n,
        mass_matrix=mass_matrix,
        coriolis=coriolis_override if coriolis_override is not None else derived_coriolis,
        gravity=grav,
        potential_energy=potential_energy,
        christoffel=derived_coriolis,
        friction_config=friction,
        parameters=parameters or {},
    )


# ---------------------------------------------------------------------------
# evaluators
# ---------------------------------------------------------------------------

def mass_matrix(model: RobotModel, q) -> np.ndarray:
    """Inertia matrix M(q); symmetric positive definite."""
    q = _check_vector(model, q, "q")
    M = np.asarray(model.mass_matrix(q), dtype=float)
    if M.shape != (model.n, model.n):
        raise ContractViolationError(
            f"mass matrix must be {model.n}x{model.n}, got {M.shape}"
        )
    if np.abs(M - M.T).max() > 1e-12:
        raise ModelDefinitenessError(
            f"mass matrix asymmetric at q={q}: |M - M^T| = {np.abs(M - M.T).max():.3e}"
        )
    return M


def coriolis_matrix(model: RobotModel, q, qdot) -> np.ndarray:
    """Coriolis/centrifugal matrix C(q, qdot); linear in qdot."""
    q = _check_vector(model, q, "q")
    qdot = _check_vector(model, qdot, "qdot")
    C = np.asarray(model.coriolis(q, qdot), dtype=float)
    if C.shape != (model.n, model.n):
        raise ContractViolationError(
            f"coriolis matrix must be {model.n}x{model.n}, got {C.shape}"
        )
    return C


def gravity_vector(model: RobotModel, q) -> np.ndarray:
    """Gravity torque G(q) = gradient of the potential energy."""
    q = _check_vector(model, q, "q")
    return np.asarray(model.gravity(q), dtype=float)


def friction_vector(model: RobotModel, t: float, qdot) -> np.ndarray:
    """Plant friction torque F(t, qdot); identically zero in the ZERO config."""
    qdot = _check_vector(model, qdot, "qdot")
    if t < 0:
        raise ContractViolationError("t must be >= 0")
    return model.friction_config.force(t, qdot)


def mass_matrix_rate(model: RobotModel, q, qdot) -> np.ndarray:
    """Mdot(q) along qdot, computed algebraically as C + C^T.

    Uses the Christoffel-consistent C, never finite differences of M.
    """
    q = _check_vector(model, q, "q")
    qdot = _check_vector(model, qdot, "qdot")
    C = np.asarray(model.christoffel(q, qdot), dtype=float)
    return C + C.T


def check_skew_symmetry(model: RobotModel, q, qdot) -> float:
    """Residual ||S + S^T||_inf for S = Mdot - 2C; ~0 for a consistent model."""
    C = coriolis_matrix(model, q, qdot)
    S = mass_matrix_rate(model, q, qdot) - 2.0 * C
    return float(np.abs(S + S.T).max())


def kinetic_energy(model: RobotModel, q, qdot) -> float:
    q = _check_vector(model, q, "q")
    qdot = _check_vector(model, qdot, "qdot")
    M = mass_matrix(model, q)
    return float(0.5 * qdot @ M @ qdot)


def total_energy(model: RobotModel, q, qdot) -> float:
    """Kinetic plus potential energy; conserved by the unforced frictionless plant."""
    q = _check_vector(model, q, "q")
    return kinetic_energy(model, q, qdot) + float(model.potential_energy(q))


def mass_cholesky(model: RobotModel, q) -> tuple:
    """Cholesky factorization of M(q); raises if M is not positive definite."""
    M = mass_matrix(model, q)
    try:
        return cho_factor(M, lower=True)
    except LinAlgError as exc:
        raise ModelDefinitenessError(
            f"mass matrix not positive definite at q={q}"
        ) from exc


def solve_mass(model: RobotModel, q, rhs: np.ndarray) -> np.ndarray:
    """Solve M(q) x = rhs through the Cholesky factors (no explicit inverse)."""
    return cho_solve(mass_cholesky(model, q), rhs)


def validate_spd(model: RobotModel, q) -> None:
    """Raise ModelDefinitenessError unless M(q) is symmetric positive definite."""
    mass_cholesky(model, q)
