"""Fixed-step simulation of the kinematic subsystem and the full closed loop.

All loops integrate with classical RK4 at a fixed dt, log every step, and are
bitwise deterministic for a given config. The kinematic loop realizes the
virtual velocity input directly as the commanded joint velocity; the closed
loop drives the second-order plant with the torque law evaluated at every
RK4 stage (continuous-control assumption).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .dynamics import FrictionKind, JointState, RobotModel
from .errors import (
    ConfigError,
    ContractViolationError,
    DivergenceError,
    ModelDefinitenessError,
)
from .lyapunov import _certificates_fast
from .tracking import Gains, _torque
from .trajgen import ReferenceSpec, _reference_arrays

# Any state norm beyond this aborts the run.
DIVERGENCE_NORM = 1e9

MAX_STEPS = 10_000_000


class LoopKind(Enum):
    KINEMATIC = "kinematic"
    CLOSED_LOOP = "closed_loop"
    OPEN_LOOP_PASSIVE = "open_loop_passive"


@dataclass(frozen=True)
class SimConfig:
    """One simulation run: model, gains, reference, grid, and loop kind."""

    model: RobotModel
    gains: Gains
    reference: ReferenceSpec
    dt: float
    t_final: float
    initial_state: JointState
    loop_kind: LoopKind = LoopKind.CLOSED_LOOP
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if not np.isfinite(self.t_final) or self.t_final < self.dt:
            raise ConfigError(
                f"t_final must satisfy 0 < dt <= t_final, got dt={self.dt}, "
                f"t_final={self.t_final}"
            )
        if self.t_final / self.dt > MAX_STEPS:
            raise ConfigError(
                f"t_final/dt = {self.t_final / self.dt:.3g} exceeds the "
                f"{MAX_STEPS:.0e} log-size guard"
            )
        if self.initial_state.n != self.model.n:
            raise ConfigError(
                f"initial state has {self.initial_state.n} joints, "
                f"model has {self.model.n}"
            )

    @property
    def steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def describe(self) -> dict:
        """JSON-friendly echo of this config (log/report metadata)."""
        g = self.gains
        return {
            "model": {
                "kind": self.model.kind.value,
                "parameters": dict(self.model.parameters),
                "friction": {
                    "kind": self.model.friction_config.kind.value,
                    "coefficient": self.model.friction_config.coefficient,
                    "epsilon": self.model.friction_config.epsilon,
                },
            },
            "gains": {
                "lambda": g.lam,
                "p_scalar": g.p_scalar,
                "P": None if g.P is None else g.P.tolist(),
            },
            "reference": {
                "kind": self.reference.kind.value,
            },
            "sim": {
                "dt": self.dt,
                "t_final": self.t_final,
                "initial_q": self.initial_state.q.tolist(),
                "initial_qdot": self.initial_state.qdot.tolist(),
                "loop": self.loop_kind.value,
                "seed": self.seed,
            },
        }


@dataclass
class TrajectoryLog:
    """Uniformly sampled record of one run; first sample at t = 0."""

    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    q_d: np.ndarray
    q_tilde: np.ndarray
    q_tilde_dot: np.ndarray
    q_r: np.ndarray
    tau: np.ndarray
    v1: np.ndarray
    q_cert: np.ndarray
    v_total: np.ndarray
    w: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.q.shape[1]

    @property
    def n_samples(self) -> int:
        return self.t.size

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])


def rk4_step(
    derivative: Callable[[float, np.ndarray], np.ndarray],
    t: float,
    state: np.ndarray,
    dt: float,
) -> np.ndarray:
    """One classical 4th-order Runge-Kutta update."""
    k1 = np.asarray(derivative(t, state))
    k2 = np.asarray(derivative(t + 0.5 * dt, state + 0.5 * dt * k1))
    k3 = np.asarray(derivative(t + 0.5 * dt, state + 0.5 * dt * k2))
    k4 = np.asarray(derivative(t + dt, state + dt * k3))
    if not (
        np.isfinite(k1).all()
        and np.isfinite(k2).all()
        and np.isfinite(k3).all()
        and np.isfinite(k4).all()
    ):
        raise DivergenceError(f"non-finite derivative at t = {t:.6g}", t=t)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def resolve_virtual_input(model: RobotModel, q, q_tilde, qd_dot) -> np.ndarray:
    """Virtual input with its own value as the velocity inside Mdot.

    The commanded velocity appears inside its defining formula through
    Mdot(q, qdot). Mdot is linear in the velocity argument, so the fixed
    point solves the linear system

        (M + 0.5 * K) eta = M (qd_dot - q_tilde),   K[:, j] = Mdot(q, e_j) q_tilde.

    Exact for constant-M models (K = 0).
    """
    n = model.n
    M = np.asarray(model.mass_matrix(q), dtype=float)
    A = M.copy()
    basis = np.zeros(n)
    for j in range(n):
        basis[j] = 1.0
        Cj = np.asarray(model.christoffel(q, basis), dtype=float)
        A[:, j] += 0.5 * ((Cj + Cj.T) @ q_tilde)
        basis[j] = 0.0
    return np.linalg.solve(A, M @ (qd_dot - q_tilde))


def _empty_log(n: int, m: int) -> dict:
    return {
        "t": np.empty(m),
        "q": np.empty((m, n)),
        "qdot": np.empty((m, n)),
        "q_d": np.empty((m, n)),
        "q_tilde": np.empty((m, n)),
        "q_tilde_dot": np.empty((m, n)),
        "q_r": np.empty((m, n)),
        "tau": np.empty((m, n)),
        "v1": np.empty(m),
        "q_cert": np.empty(m),
        "v_total": np.empty(m),
        "w": np.empty(m),
    }


def _guard_state(state: np.ndarray, t: float) -> None:
    if not np.isfinite(state).all() or np.linalg.norm(state) > DIVERGENCE_NORM:
        raise DivergenceError(f"state diverged at t = {t:.6g}", t=t)


def _log_sample(cols, k, model, P, lam, t, q, qdot, q_d, qd_dot, tau):
    q_tilde = q_d - q
    q_tilde_dot = qd_dot - qdot
    q_r = q_tilde_dot + lam * q_tilde
    M = np.asarray(model.mass_matrix(q), dtype=float)
    certs = _certificates_fast(M, q_tilde, q_r, P)
    cols["t"][k] = t
    cols["q"][k] = q
    cols["qdot"][k] = qdot
    cols["q_d"][k] = q_d
    cols["q_tilde"][k] = q_tilde
    cols["q_tilde_dot"][k] = q_tilde_dot
    cols["q_r"][k] = q_r
    cols["tau"][k] = tau
    cols["v1"][k] = certs["v1"]
    cols["q_cert"][k] = certs["q_cert"]
    cols["v_total"][k] = certs["v_total"]
    cols["w"][k] = certs["w"]


def kinematic_loop(config: SimConfig) -> TrajectoryLog:
    """Integrate the velocity-level subsystem q_dot = eta.

    The error fed to the virtual input is q - q_d, the sign under which the
    commanded velocity contracts the error; along the resulting motion
    d(v1)/dt = -2 v1 holds identically, so v1 decays as exp(-2t).
    """
    if config.loop_kind is not LoopKind.KINEMATIC:
        raise ContractViolationError("config.loop_kind must be KINEMATIC")
    model, spec = config.model, config.reference
    n, dt, m = model.n, config.dt, config.steps + 1
    lam = config.gains.lam
    P = config.gains.p_matrix(n)
    cols = _empty_log(n, m)

    def eta_at(t: float, q: np.ndarray) -> np.ndarray:
        q_d, qd_dot, _ = _reference_arrays(spec, t, n)
        try:
            return resolve_virtual_input(model, q, q - q_d, qd_dot)
        except LinAlgError as exc:
            raise DivergenceError(
                f"virtual-input solve failed at t = {t:.6g}", t=t
            ) from exc

    q = config.initial_state.q.copy()
    zeros = np.zeros(n)
    for k in range(m):
        t = k * dt
        q_d, qd_dot, _ = _reference_arrays(spec, t, n)
        eta = eta_at(t, q)
        _log_sample(cols, k, model, P, lam, t, q, eta, q_d, qd_dot, zeros)
        if k < m - 1:
            q = rk4_step(eta_at, t, q, dt)
            _guard_state(q, (k + 1) * dt)
    return TrajectoryLog(**cols, meta=config.describe())


def closed_loop(config: SimConfig) -> TrajectoryLog:
    """Integrate the torque-driven plant M qdd + C qd + G + F = tau."""
    if config.loop_kind is not LoopKind.CLOSED_LOOP:
        raise ContractViolationError("config.loop_kind must be CLOSED_LOOP")
    model, spec = config.model, config.reference
    n, dt, m = model.n, config.dt, config.steps + 1
    lam = config.gains.lam
    P = config.gains.p_matrix(n)
    friction = model.friction_config
    cols = _empty_log(n, m)

    def deriv(t: float, y: np.ndarray) -> np.ndarray:
        q, qd = y[:n], y[n:]
        q_d, qd_dot, qd_ddot = _reference_arrays(spec, t, n)
        M = np.asarray(model.mass_matrix(q), dtype=float)
        C = np.asarray(model.coriolis(q, qd), dtype=float)
        G = np.asarray(model.gravity(q), dtype=float)
        q_tilde = q_d - q
        q_tilde_dot = qd_dot - qd
        q_r = q_tilde_dot + lam * q_tilde
        tau = M @ (qd_ddot + lam * q_tilde_dot + q_r) + C @ (qd + q_r) + G
        rhs = tau - C @ qd - G - friction.force(t, qd)
        try:
            acc = cho_solve(cho_factor(M, lower=True), rhs)
        except LinAlgError as exc:
            raise ModelDefinitenessError(
                f"mass matrix not positive definite at t = {t:.6g}"
            ) from exc
        return np.concatenate([qd, acc])

    y = np.concatenate([config.initial_state.q, config.initial_state.qdot])
    for k in range(m):
        t = k * dt
        q, qd = y[:n], y[n:]
        q_d, qd_dot, qd_ddot = _reference_arrays(spec, t, n)
        tau = _torque(model, q, qd, q_d, qd_dot, qd_ddot, lam)
        _log_sample(cols, k, model, P, lam, t, q, qd, q_d, qd_dot, tau)
        if k < m - 1:
            y = rk4_step(deriv, t, y, dt)
            _guard_state(y, (k + 1) * dt)
    return TrajectoryLog(**cols, meta=config.describe())


def open_loop_passive(config: SimConfig) -> TrajectoryLog:
    """Integrate the unforced plant (tau = 0); requires zero friction.

    With no input and no dissipation the total energy along the run is an
    integrator-quality diagnostic.
    """
    if config.loop_kind is not LoopKind.OPEN_LOOP_PASSIVE:
        raise ContractViolationError("config.loop_kind must be OPEN_LOOP_PASSIVE")
    if config.model.friction_config.kind is not FrictionKind.ZERO:
        raise ContractViolationError("open-loop passive runs require zero friction")
    model, spec = config.model, config.reference
    n, dt, m = model.n, config.dt, config.steps + 1
    lam = config.gains.lam
    P = config.gains.p_matrix(n)
    cols = _empty_log(n, m)

    def deriv(t: float, y: np.ndarray) -> np.ndarray:
        q, qd = y[:n], y[n:]
        M = np.asarray(model.mass_matrix(q), dtype=float)
        C = np.asarray(model.coriolis(q, qd), dtype=float)
        G = np.asarray(model.gravity(q), dtype=float)
        try:
            acc = cho_solve(cho_factor(M, lower=True), -(C @ qd) - G)
        except LinAlgError as exc:
            raise ModelDefinitenessError(
                f"mass matrix not positive definite at t = {t:.6g}"
            ) from exc
        return np.concatenate([qd, acc])

    y = np.concatenate([config.initial_state.q, config.initial_state.qdot])
    zeros = np.zeros(n)
    for k in range(m):
        t = k * dt
        q, qd = y[:n], y[n:]
        q_d, qd_dot, _ = _reference_arrays(spec, t, n)
        _log_sample(cols, k, model, P, lam, t, q, qd, q_d, qd_dot, zeros)
        if k < m - 1:
            y = rk4_step(deriv, t, y, dt)
            _guard_state(y, (k + 1) * dt)
    return TrajectoryLog(**cols, meta=config.describe())


_RUNNERS = {
    LoopKind.KINEMATIC: kinematic_loop,
    LoopKind.CLOSED_LOOP: closed_loop,
    LoopKind.OPEN_LOOP_PASSIVE: open_loop_passive,
}


def run(config: SimConfig) -> TrajectoryLog:
    """Dispatch on config.loop_kind."""
    return _RUNNERS[config.loop_kind](config)
