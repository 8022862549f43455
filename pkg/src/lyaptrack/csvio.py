"""Trajectory CSV schema: lossless, round-trippable column layout.

Header: t,q_0..q_{n-1},qdot_0..,qd_0..,qtilde_0..,qr_0..,tau_0..,v1,q_cert,v_total,w
Values are written with 17 significant digits by default so a re-read
reproduces the run bit for bit.
"""

from __future__ import annotations

from typing import Dict

import numpy as np

from .errors import ConfigError
from .simulate import TrajectoryLog

_VECTOR_GROUPS = ("q", "qdot", "qd", "qtilde", "qr", "tau")
_SCALAR_COLUMNS = ("v1", "q_cert", "v_total", "w")


def csv_header(n: int) -> list:
    cols = ["t"]
    for group in _VECTOR_GROUPS:
        cols.extend(f"{group}_{i}" for i in range(n))
    cols.extend(_SCALAR_COLUMNS)
    return cols


def write_log_csv(log: TrajectoryLog, path, precision: int = 17) -> None:
    """Write a trajectory log to `path` in the column schema above."""
    if not 1 <= precision <= 17:
        raise ConfigError(f"precision must be in [1, 17], got {precision}")
    n = log.n
    fmt = f"%.{precision}g"
    matrix = np.column_stack(
        [
            log.t,
            log.q,
            log.qdot,
            log.q_d,
            log.q_tilde,
            log.q_r,
            log.tau,
            log.v1,
            log.q_cert,
            log.v_total,
            log.w,
        ]
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(csv_header(n)) + "\n")
        for row in matrix:
            fh.write(",".join(fmt % v for v in row) + "\n")


def read_columns(path) -> Dict[str, np.ndarray]:
    """Read a trajectory CSV back as {column name: 1-D array}."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise ConfigError(f"{path}: empty CSV")
        names = header.split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0 or data.shape[1] != len(names):
        raise ConfigError(
            f"{path}: expected {len(names)} columns of data matching the header"
        )
    return {name: data[:, i] for i, name in enumerate(names)}
