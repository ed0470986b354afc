"""Trajectory CSV and JSON report files.

Numbers are written with 17 significant digits, which round-trips every
IEEE double exactly. Files are written to a temporary sibling and renamed into
place, so readers never observe a half-written file.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from fracrothe.stepper import Trajectory


def format_number(x: float) -> str:
    return "%.17g" % x


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def trajectory_csv(traj: Trajectory, extra: dict[str, Sequence[float]] | None = None) -> str:
    """CSV text: header ``t,x_1,...,x_N`` then one row per node up to ``last_index``.

    ``extra`` adds named columns after the state (one value per emitted row).
    """
    extra = extra or {}
    dim = traj.spec.dimension
    header = ["t"] + [f"x_{i}" for i in range(1, dim + 1)] + list(extra)
    rows = traj.grid.n + traj.last_index + 1
    times = traj.grid.nodes()[:rows]
    lines = [",".join(header)]
    columns = [np.asarray(v, dtype=np.float64)[:rows] for v in extra.values()]
    for r in range(rows):
        values = [times[r], *traj.states[r], *(c[r] for c in columns)]
        lines.append(",".join(format_number(v) for v in values))
    return "\n".join(lines) + "\n"


def write_trajectory_csv(path, traj: Trajectory, extra=None) -> Path:
    return atomic_write_text(path, trajectory_csv(traj, extra))


def read_trajectory_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and a ``(rows, columns)`` array of the values."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:] if line])
    return header, data


def _clean(value):
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    return value


def json_text(payload: dict) -> str:
    return json.dumps(_clean(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, payload: dict) -> Path:
    return atomic_write_text(path, json_text(payload))


def write_table_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
            return str(int(v))
        return format_number(float(v))

    lines = [",".join(header)] + [",".join(cell(v) for v in row) for row in rows]
    return atomic_write_text(path, "\n".join(lines) + "\n")
