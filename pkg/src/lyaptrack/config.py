"""Experiment config files: strict nested key-value blocks (YAML surface).

Every block and key is validated; unknown keys are rejected with the
offending name so typos cannot silently change a run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import yaml

from .dynamics import (
    FrictionConfig,
    FrictionKind,
    JointState,
    RobotModel,
    pendulum_1dof,
    two_link_planar,
)
from .errors import ConfigError, GainValidationError, LyaptrackError
from .simulate import LoopKind, SimConfig
from .tracking import Gains
from .trajgen import ReferenceKind, ReferenceSpec

_TOP_KEYS = {"model", "gains", "reference", "sim", "output"}
_MODEL_KEYS = {"kind", "parameters", "friction"}
_FRICTION_KEYS = {"kind", "coefficient", "epsilon"}
_GAINS_KEYS = {"lambda", "p_scalar", "P"}
_REFERENCE_KEYS = {
    "kind",
    "value",
    "amplitude",
    "omega",
    "phase",
    "offset",
    "start",
    "end",
    "duration",
}
_SIM_KEYS = {"dt", "t_final", "initial_q", "initial_qdot", "loop", "seed"}
_OUTPUT_KEYS = {"path", "precision"}

_PENDULUM_PARAMS = {"m", "l", "g"}
_TWO_LINK_PARAMS = {"m1", "m2", "l1", "l2", "g"}


@dataclass(frozen=True)
class OutputConfig:
    path: Optional[str] = None
    precision: int = 17


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated contents of one config file."""

    sim: SimConfig
    output: OutputConfig


def _require_mapping(obj, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"'{where}' must be a mapping of keys to values")
    return obj


def _reject_unknown(block: dict, allowed: set, where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key '{key}' in '{where}' block")


def _require(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"missing key '{key}' in '{where}' block")
    return block[key]


def _float(block: dict, key: str, where: str) -> float:
    value = _require(block, key, where)
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{where}.{key}' must be a number, got {value!r}")
    if not np.isfinite(out):
        raise ConfigError(f"'{where}.{key}' must be finite")
    return out


def _build_friction(block) -> FrictionConfig:
    if block is None:
        return FrictionConfig()
    block = _require_mapping(block, "model.friction")
    _reject_unknown(block, _FRICTION_KEYS, "model.friction")
    kind_name = str(_require(block, "kind", "model.friction"))
    try:
        kind = FrictionKind(kind_name)
    except ValueError:
        raise ConfigError(
            f"'model.friction.kind' must be one of "
            f"{[k.value for k in FrictionKind]}, got '{kind_name}'"
        )
    coefficient = float(block.get("coefficient", 0.0))
    epsilon = float(block.get("epsilon", 1e-3))
    if kind is not FrictionKind.ZERO and coefficient < 0:
        raise ConfigError("'model.friction.coefficient' must be >= 0")
    if epsilon <= 0:
        raise ConfigError("'model.friction.epsilon' must be > 0")
    return FrictionConfig(kind=kind, coefficient=coefficient, epsilon=epsilon)


def build_model(block: dict) -> RobotModel:
    block = _require_mapping(block, "model")
    _reject_unknown(block, _MODEL_KEYS, "model")
    kind = str(_require(block, "kind", "model"))
    params = _require_mapping(block.get("parameters", {}), "model.parameters")
    friction = _build_friction(block.get("friction"))
    try:
        if kind == "pendulum_1dof":
            _reject_unknown(params, _PENDULUM_PARAMS, "model.parameters")
            return pendulum_1dof(
                m=float(params.get("m", 1.0)),
                l=float(params.get("l", 1.0)),
                gravity=float(params.get("g", 9.81)),
                friction=friction,
            )
        if kind == "two_link_planar":
            _reject_unknown(params, _TWO_LINK_PARAMS, "model.parameters")
            return two_link_planar(
                m1=float(params.get("m1", 1.0)),
                m2=float(params.get("m2", 1.0)),
                l1=float(params.get("l1", 1.0)),
                l2=float(params.get("l2", 1.0)),
                gravity=float(params.get("g", 9.81)),
                friction=friction,
            )
    except LyaptrackError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad model parameters: {exc}")
    if kind == "custom":
        raise ConfigError(
            "custom models need programmatic construction (dynamics.custom_model); "
            "config files support 'pendulum_1dof' and 'two_link_planar'"
        )
    raise ConfigError(
        f"'model.kind' must be 'pendulum_1dof' or 'two_link_planar', got '{kind}'"
    )


def build_gains(block: dict) -> Gains:
    block = _require_mapping(block, "gains")
    _reject_unknown(block, _GAINS_KEYS, "gains")
    lam = _float(block, "lambda", "gains")
    p_scalar = block.get("p_scalar")
    P = block.get("P")
    try:
        return Gains(
            lam=lam,
            p_scalar=None if p_scalar is None else float(p_scalar),
            P=None if P is None else np.asarray(P, dtype=float),
        )
    except GainValidationError as exc:
        raise ConfigError(f"invalid 'gains' block: {exc}")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid 'gains' block: {exc}")


def build_reference(block: dict) -> ReferenceSpec:
    block = _require_mapping(block, "reference")
    _reject_unknown(block, _REFERENCE_KEYS, "reference")
    kind_name = str(_require(block, "kind", "reference"))
    try:
        kind = ReferenceKind(kind_name)
    except ValueError:
        raise ConfigError(
            f"'reference.kind' must be one of {[k.value for k in ReferenceKind]}, "
            f"got '{kind_name}'"
        )
    try:
        return ReferenceSpec(
            kind=kind,
            value=block.get("value"),
            amplitude=block.get("amplitude"),
            omega=block.get("omega"),
            phase=block.get("phase"),
            offset=block.get("offset"),
            start=block.get("start"),
            end=block.get("end"),
            duration=(
                None if block.get("duration") is None else float(block["duration"])
            ),
        )
    except LyaptrackError as exc:
        raise ConfigError(f"invalid 'reference' block: {exc}")


def _build_sim(block: dict, model: RobotModel, gains: Gains,
               reference: ReferenceSpec) -> SimConfig:
    block = _require_mapping(block, "sim")
    _reject_unknown(block, _SIM_KEYS, "sim")
    dt = _float(block, "dt", "sim")
    t_final = _float(block, "t_final", "sim")
    loop_name = str(block.get("loop", "closed_loop"))
    try:
        loop = LoopKind(loop_name)
    except ValueError:
        raise ConfigError(
            f"'sim.loop' must be one of {[k.value for k in LoopKind]}, "
            f"got '{loop_name}'"
        )
    seed = block.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError(f"'sim.seed' must be an integer, got {seed!r}")
    try:
        initial = JointState(
            q=np.asarray(_require(block, "initial_q", "sim"), dtype=float),
            qdot=np.asarray(_require(block, "initial_qdot", "sim"), dtype=float),
        )
    except LyaptrackError as exc:
        raise ConfigError(f"invalid initial state: {exc}")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid initial state: {exc}")
    try:
        return SimConfig(
            model=model,
            gains=gains,
            reference=reference,
            dt=dt,
            t_final=t_final,
            initial_state=initial,
            loop_kind=loop,
            seed=seed,
        )
    except LyaptrackError as exc:
        raise ConfigError(str(exc))


def _build_output(block) -> OutputConfig:
    if block is None:
        return OutputConfig()
    block = _require_mapping(block, "output")
    _reject_unknown(block, _OUTPUT_KEYS, "output")
    precision = block.get("precision", 17)
    if not isinstance(precision, int) or not 1 <= precision <= 17:
        raise ConfigError(f"'output.precision' must be an integer in [1, 17]")
    path = block.get("path")
    return OutputConfig(path=None if path is None else str(path),
                        precision=precision)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config document."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}")
    if raw is None:
        raise ConfigError("config file is empty")
    raw = _require_mapping(raw, "config")
    _reject_unknown(raw, _TOP_KEYS, "config")
    for key in ("model", "gains", "reference", "sim"):
        if key not in raw:
            raise ConfigError(f"missing '{key}' block")
    model = build_model(raw["model"])
    gains = build_gains(raw["gains"])
    reference = build_reference(raw["reference"])
    sim = _build_sim(raw["sim"], model, gains, reference)
    # surface per-joint shape errors now rather than mid-run
    from .trajgen import reference_at

    try:
        reference_at(reference, 0.0, model.n)
    except LyaptrackError as exc:
        raise ConfigError(f"invalid 'reference' block: {exc}")
    try:
        gains.p_matrix(model.n)
    except LyaptrackError as exc:
        raise ConfigError(f"invalid 'gains' block: {exc}")
    return ExperimentConfig(sim=sim, output=_build_output(raw.get("output")))


def load_config(path) -> ExperimentConfig:
    """Read and parse a config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc}")
    return parse_config(text)
