"""Tracking errors, backstepped virtual input, and the torque law.

The torque law cancels the model terms and injects filtered-error dynamics:

    tau = M(q) (qdd_d + lam*qtd + q_r) + C(q, qd) (qd + q_r) + G(q)

with q_r = qtd + lam*qt the filtered velocity tracking error. Substituted
into the frictionless plant this yields M qr_dot = -(M + C) q_r, whose
weighted norm decays at exactly rate 2 (see the lyapunov module). The gain
matrix P appears only in the certificates, never in the torque.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .dynamics import JointState, RobotModel, _check_vector, mass_cholesky, mass_matrix_rate
from .errors import ContractViolationError, GainValidationError, InputError


@dataclass(frozen=True)
class Reference:
    """Desired trajectory sample (q_d, qd_dot, qd_ddot) at time t."""

    t: float
    q_d: np.ndarray
    qd_dot: np.ndarray
    qd_ddot: np.ndarray

    def __post_init__(self):
        q_d = np.atleast_1d(np.asarray(self.q_d, dtype=float))
        qd_dot = np.atleast_1d(np.asarray(self.qd_dot, dtype=float))
        qd_ddot = np.atleast_1d(np.asarray(self.qd_ddot, dtype=float))
        if not (q_d.shape == qd_dot.shape == qd_ddot.shape) or q_d.ndim != 1:
            raise ContractViolationError("reference vectors must share one length")
        for name, v in (("q_d", q_d), ("qd_dot", qd_dot), ("qd_ddot", qd_ddot)):
            if not np.isfinite(v).all():
                raise InputError(f"{name} contains non-finite entries")
        object.__setattr__(self, "q_d", q_d)
        object.__setattr__(self, "qd_dot", qd_dot)
        object.__setattr__(self, "qd_ddot", qd_ddot)

    @property
    def n(self) -> int:
        return self.q_d.size


@dataclass(frozen=True)
class Gains:
    """Controller parameters: lam > 0 and an SPD certificate weight P.

    P defaults to the identity (p_scalar = 1). Give either p_scalar or an
    explicit P, not both. P never enters the torque law.
    """

    lam: float
    p_scalar: Optional[float] = None
    P: Optional[np.ndarray] = None

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise GainValidationError(f"lambda must be > 0, got {self.lam}")
        if self.p_scalar is not None and self.P is not None:
            raise GainValidationError("give p_scalar or P, not both")
        if self.p_scalar is None and self.P is None:
            object.__setattr__(self, "p_scalar", 1.0)
        if self.p_scalar is not None:
            if not np.isfinite(self.p_scalar) or self.p_scalar <= 0:
                raise GainValidationError(f"p_scalar must be > 0, got {self.p_scalar}")
        if self.P is not None:
            P = np.asarray(self.P, dtype=float)
            if P.ndim != 2 or P.shape[0] != P.shape[1]:
                raise GainValidationError("P must be a square matrix")
            if not np.isfinite(P).all():
                raise GainValidationError("P contains non-finite entries")
            if np.abs(P - P.T).max() > 1e-12:
                raise GainValidationError("P must be symmetric")
            try:
                cho_factor(P, lower=True)
            except LinAlgError as exc:
                raise GainValidationError("P must be positive definite") from exc
            object.__setattr__(self, "P", P)

    def p_matrix(self, n: int) -> np.ndarray:
        if self.P is not None:
            if self.P.shape != (n, n):
                raise GainValidationError(
                    f"P has shape {self.P.shape}, expected ({n}, {n})"
                )
            return self.P
        return self.p_scalar * np.eye(n)


@dataclass(frozen=True)
class ErrorState:
    """Position, velocity, and filtered tracking errors."""

    q_tilde: np.ndarray
    q_tilde_dot: np.ndarray
    q_r: np.ndarray


@dataclass(frozen=True)
class ControlOutput:
    """Actuator torque vector."""

    tau: np.ndarray

    def __post_init__(self):
        tau = np.atleast_1d(np.asarray(self.tau, dtype=float))
        if not np.isfinite(tau).all():
            raise InputError("torque contains non-finite entries")
        object.__setattr__(self, "tau", tau)


def position_error(q_d, q) -> np.ndarray:
    """q_d - q."""
    q_d = np.atleast_1d(np.asarray(q_d, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q_d.shape != q.shape:
        raise ContractViolationError(
            f"q_d and q must have equal shapes, got {q_d.shape} and {q.shape}"
        )
    return q_d - q


def filtered_error(q_tilde, q_tilde_dot, lam: float) -> np.ndarray:
    """q_tilde_dot + lam * q_tilde; q_r = 0 is the sliding manifold."""
    q_tilde = np.atleast_1d(np.asarray(q_tilde, dtype=float))
    q_tilde_dot = np.atleast_1d(np.asarray(q_tilde_dot, dtype=float))
    if q_tilde.shape != q_tilde_dot.shape:
        raise ContractViolationError("q_tilde and q_tilde_dot must have equal shapes")
    if not np.isfinite(lam) or lam <= 0:
        raise GainValidationError(f"lambda must be > 0, got {lam}")
    return q_tilde_dot + lam * q_tilde


def error_state(ref: Reference, state: JointState, lam: float) -> ErrorState:
    """Errors of a state against a reference; velocity error from measured qdot."""
    q_tilde = position_error(ref.q_d, state.q)
    q_tilde_dot = position_error(ref.qd_dot, state.qdot)
    return ErrorState(q_tilde, q_tilde_dot, filtered_error(q_tilde, q_tilde_dot, lam))


def virtual_input(model: RobotModel, q, qdot, q_tilde, qd_dot) -> np.ndarray:
    """Backstepped virtual velocity input.

    eta = qd_dot - q_tilde - 0.5 * M^-1(q) Mdot(q, qdot) q_tilde, computed by
    solving M eta = M (qd_dot - q_tilde) - 0.5 * Mdot q_tilde with the
    Cholesky factors of M.
    """
    q = _check_vector(model, q, "q")
    qdot = _check_vector(model, qdot, "qdot")
    q_tilde = _check_vector(model, q_tilde, "q_tilde")
    qd_dot = _check_vector(model, qd_dot, "qd_dot")
    factors = mass_cholesky(model, q)
    Mdot = mass_matrix_rate(model, q, qdot)
    M = np.asarray(model.mass_matrix(q), dtype=float)
    rhs = M @ (qd_dot - q_tilde) - 0.5 * (Mdot @ q_tilde)
    return cho_solve(factors, rhs)


def _torque(model, q, qdot, q_d, qd_dot, qd_ddot, lam) -> np.ndarray:
    # hot path shared with the simulator; inputs assumed validated
    q_tilde = q_d - q
    q_tilde_dot = qd_dot - qdot
    q_r = q_tilde_dot + lam * q_tilde
    M = np.asarray(model.mass_matrix(q), dtype=float)
    C = np.asarray(model.coriolis(q, qdot), dtype=float)
    G = np.asarray(model.gravity(q), dtype=float)
    # lam * q_tilde_dot kept as its own term rather than folded into q_r
    return M @ (qd_ddot + lam * q_tilde_dot + q_r) + C @ (qdot + q_r) + G


def control_torque(
    model: RobotModel, state: JointState, ref: Reference, gains: Gains
) -> ControlOutput:
    """Exponentially stabilizing torque; reads neither friction nor P."""
    if state.n != model.n or ref.n != model.n:
        raise ContractViolationError(
            f"state/reference dimension must equal model.n = {model.n}"
        )
    tau = _torque(
        model, state.q, state.qdot, ref.q_d, ref.qd_dot, ref.qd_ddot, gains.lam
    )
    return ControlOutput(tau)
