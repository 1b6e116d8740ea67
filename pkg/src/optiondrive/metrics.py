"""Schema-versioned CSV logging.

Every file starts with a ``# schema=<name>-v<N>`` comment line followed by a
header row; readers refuse files whose schema tag or header does not match.
Floats are written with 17 significant digits so that runs with identical
seeds produce byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class SchemaMismatch(Exception):
    """File schema tag or header differs from the expected one."""


OPTION_COLUMNS = ("f_emergency", "f_maintain", "f_vel_dec", "f_vel_inc",
                  "f_lane_left", "f_lane_right")

SCHEMAS: dict[str, tuple[str, ...]] = {
    # one row per training episode (phase=train) and per evaluation episode
    # (phase=eval); the f_* columns hold active-time fractions
    "training-v1": ("step", "episode", "phase", "return", "collisions",
                    "lane_changes", "mean_speed") + OPTION_COLUMNS,
    # per-step trace of a scripted benchmark episode
    "trace-v1": ("t", "v", "d", "option_v", "option_d", "dv", "dd", "dv_lo",
                 "dv_hi", "dd_lo", "dd_hi", "reward"),
    # aggregate of the density test sweep, one row per (agent, density)
    "summary-v1": ("agent", "density", "episodes", "return_mean",
                   "return_min", "return_max", "speed_mean",
                   "lane_change_duration_mean", "following_distance_mean",
                   "right_lane_fraction", "center_abs_dev_mean", "collisions"),
    # per-axis option active-time fractions over the evaluation episodes
    "activity-v1": ("axis", "option", "fraction"),
    # plot-ready training curves: one row per (episode, input series)
    "curve-v1": ("episode", "series", "return"),
}


def fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, str):
        if "," in value or "\n" in value:
            raise ValueError(f"CSV value may not contain separators: {value!r}")
        return value
    if isinstance(value, (int, np.integer)):
        return str(value)
    x = float(value)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


class CsvLogger:
    """Row-at-a-time writer that stamps and enforces one schema."""

    def __init__(self, path: str | Path, schema: str):
        if schema not in SCHEMAS:
            raise SchemaMismatch(f"unknown schema {schema!r}")
        self.schema = schema
        self.columns = SCHEMAS[schema]
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8", newline="\n")
        self._fh.write(f"# schema={schema}\n")
        self._fh.write(",".join(self.columns) + "\n")
        self._fh.flush()

    def write(self, row: dict | Sequence) -> None:
        if isinstance(row, dict):
            missing = set(self.columns) - set(row)
            if missing:
                raise SchemaMismatch(f"row missing columns {sorted(missing)}")
            values = [row[c] for c in self.columns]
        else:
            if len(row) != len(self.columns):
                raise SchemaMismatch(
                    f"row has {len(row)} values, schema {self.schema} "
                    f"wants {len(self.columns)}")
            values = list(row)
        self._fh.write(",".join(fmt(v) for v in values) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "CsvLogger":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_csv(path: str | Path, schema: str, rows: Iterable) -> None:
    with CsvLogger(path, schema) as log:
        for row in rows:
            log.write(row)


def read_csv(path: str | Path) -> tuple[str, list[dict]]:
    """Read a schema-stamped CSV back into (schema, rows of parsed values)."""
    with open(path, encoding="utf-8") as fh:
        tag = fh.readline().strip()
        if not tag.startswith("# schema="):
            raise SchemaMismatch(f"{path}: missing schema comment line")
        schema = tag[len("# schema="):]
        if schema not in SCHEMAS:
            raise SchemaMismatch(f"{path}: unknown schema {schema!r}")
        header = fh.readline().strip().split(",")
        if tuple(header) != SCHEMAS[schema]:
            raise SchemaMismatch(f"{path}: header {header} does not match "
                                 f"schema {schema}")
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise SchemaMismatch(f"{path}: ragged row {line!r}")
            row = {}
            for key, raw in zip(header, parts):
                try:
                    row[key] = int(raw)
                except ValueError:
                    try:
                        row[key] = float(raw)
                    except ValueError:
                        row[key] = raw
            rows.append(row)
    return schema, rows
