"""Reference trajectory generators with analytic derivatives.

Three kinds: constant setpoint, per-joint sinusoid, and quintic rest-to-rest
motion that holds its end value once finished. All return consistent
(q_d, qd_dot, qd_ddot) triples so the torque law's feedforward term is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import SpecValidationError
from .tracking import Reference


class ReferenceKind(Enum):
    SETPOINT = "setpoint"
    SINUSOID = "sinusoid"
    POLY5 = "poly5"


def _as_joint_array(value, n: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(n, arr[0])
    if arr.shape != (n,):
        raise SpecValidationError(
            f"{name} must be a scalar or length-{n} list, got shape {arr.shape}"
        )
    if not np.isfinite(arr).all():
        raise SpecValidationError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class ReferenceSpec:
    """Parameters of one reference trajectory.

    SETPOINT uses ``value``; SINUSOID uses ``amplitude``, ``omega``,
    ``phase``, ``offset``; POLY5 uses ``start``, ``end``, ``duration``.
    Per-joint parameters accept scalars (broadcast) or length-n lists.
    """

    kind: ReferenceKind
    value: Optional[object] = None
    amplitude: Optional[object] = None
    omega: Optional[object] = None
    phase: Optional[object] = None
    offset: Optional[object] = None
    start: Optional[object] = None
    end: Optional[object] = None
    duration: Optional[float] = None

    def __post_init__(self):
        if self.kind is ReferenceKind.SETPOINT:
            if self.value is None:
                raise SpecValidationError("setpoint reference needs 'value'")
        elif self.kind is ReferenceKind.SINUSOID:
            if self.amplitude is None or self.omega is None:
                raise SpecValidationError(
                    "sinusoid reference needs 'amplitude' and 'omega'"
                )
            if np.any(np.atleast_1d(np.asarray(self.omega, dtype=float)) < 0):
                raise SpecValidationError("sinusoid omega must be >= 0")
        elif self.kind is ReferenceKind.POLY5:
            if self.start is None or self.end is None or self.duration is None:
                raise SpecValidationError(
                    "poly5 reference needs 'start', 'end' and 'duration'"
                )
            if not np.isfinite(self.duration) or self.duration <= 0:
                raise SpecValidationError("poly5 duration must be > 0")


def _reference_arrays(spec: ReferenceSpec, t: float, n: int):
    """(q_d, qd_dot, qd_ddot) triple; shared fast path for the simulators."""
    if spec.kind is ReferenceKind.SETPOINT:
        c = _as_joint_array(spec.value, n, "value")
        zero = np.zeros(n)
        return c, zero, zero.copy()

    if spec.kind is ReferenceKind.SINUSOID:
        a = _as_joint_array(spec.amplitude, n, "amplitude")
        w = _as_joint_array(spec.omega, n, "omega")
        phi = _as_joint_array(spec.phase if spec.phase is not None else 0.0, n, "phase")
        b = _as_joint_array(spec.offset if spec.offset is not None else 0.0, n, "offset")
        arg = w * t + phi
        s, c = np.sin(arg), np.cos(arg)
        return a * s + b, a * w * c, -a * w * w * s

    start = _as_joint_array(spec.start, n, "start")
    end = _as_joint_array(spec.end, n, "end")
    T = float(spec.duration)
    if t >= T:
        zero = np.zeros(n)
        return end.copy(), zero, zero.copy()
    u = t / T
    s = u**3 * (10.0 + u * (-15.0 + 6.0 * u))
    ds = 30.0 * u**2 * (1.0 - u) ** 2 / T
    dds = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) / (T * T)
    delta = end - start
    return start + delta * s, delta * ds, delta * dds


def reference_at(spec: ReferenceSpec, t: float, n: int) -> Reference:
    """Evaluate the reference and its first two derivatives at time t >= 0."""
    if t < 0:
        raise SpecValidationError(f"t must be >= 0, got {t}")
    q_d, qd_dot, qd_ddot = _reference_arrays(spec, t, n)
    return Reference(t=t, q_d=q_d, qd_dot=qd_dot, qd_ddot=qd_ddot)
