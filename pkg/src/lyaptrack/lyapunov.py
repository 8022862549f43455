"""Certificate functions and empirical decay-rate estimation.

Three non-negative certificates are evaluated along trajectories:

    v1      = 0.5 * qt^T M(q) qt
    q_cert  = 0.5 * qr^T M(q) qr + 0.5 * qt^T P qt
    v_total = v1 + 0.5 * qr^T P M(q) qr        (P M symmetrized; must be
                                                symmetric for the composite
                                                certificate to be valid)

plus w = 0.5 * qr^T M qr, the filtered-error energy whose closed-loop decay
rate is exactly 2. Derivatives along a log are taken by central differences;
exponential rates are fitted by least squares on log(value).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor

from .dynamics import RobotModel, _check_vector, mass_matrix, validate_spd
from .errors import (
    CertificateValidityError,
    ContractViolationError,
    GainValidationError,
    InsufficientDataError,
)

# |P M - (P M)^T| above this invalidates the composite certificate.
PM_SYMMETRY_TOL = 1e-8

CERTIFICATE_NAMES = ("v1", "q_cert", "v_total", "w")


@dataclass(frozen=True)
class RateEstimate:
    """Fitted exponential decay rate of a positive series."""

    rate: float
    r_squared: float
    window: Tuple[float, float]
    n_points: int


def _check_spd(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise GainValidationError("P must be a square matrix")
    if np.abs(P - P.T).max() > 1e-12:
        raise GainValidationError("P must be symmetric")
    try:
        cho_factor(P, lower=True)
    except LinAlgError as exc:
        raise GainValidationError("P must be positive definite") from exc
    return P


def v1(model: RobotModel, q, q_tilde) -> float:
    """Position-error certificate 0.5 * qt^T M(q) qt."""
    q = _check_vector(model, q, "q")
    q_tilde = _check_vector(model, q_tilde, "q_tilde")
    validate_spd(model, q)
    M = mass_matrix(model, q)
    return float(0.5 * q_tilde @ M @ q_tilde)


def q_function(model: RobotModel, q, q_r, q_tilde, P) -> float:
    """Reference certificate 0.5 * qr^T M qr + 0.5 * qt^T P qt."""
    q = _check_vector(model, q, "q")
    q_r = _check_vector(model, q_r, "q_r")
    q_tilde = _check_vector(model, q_tilde, "q_tilde")
    P = _check_spd(P)
    M = mass_matrix(model, q)
    return float(0.5 * q_r @ M @ q_r + 0.5 * q_tilde @ P @ q_tilde)


def _symmetrized_pm(M: np.ndarray, P: np.ndarray) -> np.ndarray:
    PM = P @ M
    asym = np.abs(PM - PM.T).max()
    if asym > PM_SYMMETRY_TOL:
        raise CertificateValidityError(
            f"P*M is asymmetric (|PM - (PM)^T| = {asym:.3e} > {PM_SYMMETRY_TOL:.0e}); "
            "the composite certificate is only valid for P commuting with M "
            "(e.g. P = p*I)"
        )
    return 0.5 * (PM + PM.T)


def v_total(model: RobotModel, q, q_tilde, q_r, P) -> float:
    """Composite certificate v1 + 0.5 * qr^T P M qr (PM symmetrized)."""
    q = _check_vector(model, q, "q")
    q_tilde = _check_vector(model, q_tilde, "q_tilde")
    q_r = _check_vector(model, q_r, "q_r")
    P = _check_spd(P)
    M = mass_matrix(model, q)
    PM = _symmetrized_pm(M, P)
    return float(0.5 * q_tilde @ M @ q_tilde + 0.5 * q_r @ PM @ q_r)


def certificate_values(model: RobotModel, q, q_tilde, q_r, P) -> dict:
    """All four certificates at one sample, with a single M evaluation."""
    q = _check_vector(model, q, "q")
    q_tilde = _check_vector(model, q_tilde, "q_tilde")
    q_r = _check_vector(model, q_r, "q_r")
    P = _check_spd(P)
    M = mass_matrix(model, q)
    return _certificates_fast(M, q_tilde, q_r, P)


def _certificates_fast(M: np.ndarray, q_tilde, q_r, P) -> dict:
    # hot path for the simulators; M and P assumed validated
    v1_val = 0.5 * q_tilde @ M @ q_tilde
    w_val = 0.5 * q_r @ M @ q_r
    PM = _symmetrized_pm(M, P)
    return {
        "v1": float(v1_val),
        "q_cert": float(w_val + 0.5 * q_tilde @ P @ q_tilde),
        "v_total": float(v1_val + 0.5 * q_r @ PM @ q_r),
        "w": float(w_val),
    }


def vdot_along_trajectory(log, which: str) -> np.ndarray:
    """Finite-difference time derivative of one logged certificate series.

    Central differences inside, second-order one-sided stencils at the ends.
    """
    if which not in CERTIFICATE_NAMES:
        raise ContractViolationError(
            f"unknown certificate {which!r}; choose from {CERTIFICATE_NAMES}"
        )
    values = np.asarray(getattr(log, which), dtype=float)
    t = np.asarray(log.t, dtype=float)
    if values.size < 3:
        raise InsufficientDataError("need at least 3 samples for derivatives")
    dt = t[1] - t[0]
    d = np.empty_like(values)
    d[1:-1] = (values[2:] - values[:-2]) / (2.0 * dt)
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt)
    d[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * dt)
    return d


def estimate_rate(
    t, values, window: Tuple[float, float] = (1.0, 5.0), floor: float = 1e-12
) -> RateEstimate:
    """Exponential rate from a least-squares fit of log(value) against t.

    Uses samples inside the window with value > floor; rate is the negated
    slope. r_squared is reported as fitted, never clamped.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if t.shape != values.shape or t.ndim != 1:
        raise ContractViolationError("t and values must be 1-D arrays of equal length")
    if not np.isfinite(floor) or floor <= 0:
        raise ContractViolationError(f"floor must be > 0, got {floor}")
    t0, t1 = float(window[0]), float(window[1])
    if t1 <= t0:
        raise ContractViolationError(f"window must satisfy t0 < t1, got {window}")
    mask = (t >= t0) & (t <= t1) & (values > floor)
    n_points = int(mask.sum())
    if n_points < 10:
        raise InsufficientDataError(
            f"only {n_points} usable samples in window [{t0}, {t1}] "
            f"above floor {floor:g}; need >= 10"
        )
    ts = t[mask]
    ln_v = np.log(values[mask])
    A = np.column_stack([ts, np.ones_like(ts)])
    coef, *_ = np.linalg.lstsq(A, ln_v, rcond=None)
    slope, intercept = coef
    resid = ln_v - (slope * ts + intercept)
    ss_res = float(resid @ resid)
    centered = ln_v - ln_v.mean()
    ss_tot = float(centered @ centered)
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateEstimate(
        rate=float(-slope), r_squared=r_squared, window=(t0, t1), n_points=n_points
    )
