"""Waypoint documents (JSON in) and trajectory tables (CSV out).

A waypoint document looks like::

    {
      "times": [0, 1, 2],
      "channels": {
        "x":   {"positions": [0, 1, 0]},
        "yaw": {"positions": [0, 0.5, 0], "s": 3},
        "z":   {"s": 4, "constraints": [{"boundary": 0, "order": 0, "value": 1.0}, ...]}
      }
    }

``positions`` fixes order 0 at every knot and, unless ``"rest_ends": false``,
orders ``1..s-1`` to zero at the first and last knot. Explicit ``constraints``
records may override those end defaults but not each other or the positions.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .model import ConstraintSet, ProblemSpec, TimeGrid, evaluate

YAW_NAMES = ("yaw", "psi")
DEFAULT_S = 5
DEFAULT_YAW_S = 3
CSV_DIGITS = 12


class DocumentError(ValidationError):
    """Waypoint document could not be parsed or is inconsistent."""


def _fmt(x: float) -> str:
    return f"{x:.{CSV_DIGITS}g}"


@dataclass
class ChannelDoc:
    name: str
    s: int
    n: int
    records: list  # (boundary, order, value)


@dataclass
class WaypointDocument:
    times: list
    channels: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.times) - 1

    def problem(self, name: str) -> ProblemSpec:
        ch = self.channels[name]
        return ProblemSpec(TimeGrid(self.times), ConstraintSet.from_records(ch.records), ch.s, ch.n)

    def problems(self) -> dict:
        return {name: self.problem(name) for name in self.channels}

    def to_json(self) -> dict:
        chans = {}
        for name, ch in self.channels.items():
            chans[name] = {
                "s": ch.s,
                "n": ch.n,
                "constraints": [{"boundary": j, "order": r, "value": v} for j, r, v in ch.records],
            }
        return {"times": list(self.times), "channels": chans}


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise DocumentError(f"{where}: expected a finite number, got {value!r}")
    return float(value)


def _integer(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise DocumentError(f"{where}: expected an integer, got {value!r}")
    return value


def _parse_channel(name, raw, k) -> ChannelDoc:
    where = f"channels.{name}"
    if not isinstance(raw, dict):
        raise DocumentError(f"{where}: expected an object")
    unknown = set(raw) - {"s", "n", "positions", "constraints", "rest_ends"}
    if unknown:
        raise DocumentError(f"{where}: unknown keys {sorted(unknown)}")
    s = _integer(raw.get("s", DEFAULT_YAW_S if name.lower() in YAW_NAMES else DEFAULT_S), f"{where}.s")
    if s < 1:
        raise DocumentError(f"{where}.s: must be >= 1")
    n = _integer(raw.get("n", 2 * s), f"{where}.n")
    if n != 2 * s:
        raise DocumentError(f"{where}.n: must equal 2*s = {2 * s}, got {n}")

    explicit = {}
    for q, rec in enumerate(raw.get("constraints", [])):
        loc = f"{where}.constraints[{q}]"
        if not isinstance(rec, dict) or set(rec) != {"boundary", "order", "value"}:
            raise DocumentError(f"{loc}: expected {{boundary, order, value}}")
        j = _integer(rec["boundary"], f"{loc}.boundary")
        r = _integer(rec["order"], f"{loc}.order")
        if not 0 <= j <= k:
            raise DocumentError(f"{loc}.boundary: {j} outside 0..{k}")
        if not 0 <= r < s:
            raise DocumentError(f"{loc}.order: {r} outside 0..{s - 1}")
        if (j, r) in explicit:
            raise DocumentError(f"{loc}: boundary {j} order {r} is constrained twice")
        explicit[(j, r)] = _number(rec["value"], f"{loc}.value")

    fixed = {}
    if "positions" in raw:
        pos = raw["positions"]
        if not isinstance(pos, list) or len(pos) != k + 1:
            raise DocumentError(f"{where}.positions: expected {k + 1} values")
        for j, x in enumerate(pos):
            fixed[(j, 0)] = _number(x, f"{where}.positions[{j}]")
        if raw.get("rest_ends", True):
            for r in range(1, s):
                fixed[(0, r)] = 0.0
                fixed[(k, r)] = 0.0
        for (j, r) in explicit:
            if r == 0:
                raise DocumentError(f"{where}: boundary {j} position given by both positions and constraints")
    fixed.update(explicit)
    records = [(j, r, v) for (j, r), v in sorted(fixed.items())]
    return ChannelDoc(name, s, n, records)


def parse_document(data: dict) -> WaypointDocument:
    if not isinstance(data, dict):
        raise DocumentError("document: expected a JSON object")
    times = data.get("times")
    if not isinstance(times, list) or len(times) < 2:
        raise DocumentError("times: expected a list of at least two knots")
    times = [_number(t, f"times[{j}]") for j, t in enumerate(times)]
    for j in range(1, len(times)):
        if not times[j] > times[j - 1]:
            raise DocumentError(f"times[{j}]: knots must be strictly increasing")
    channels = data.get("channels")
    if not isinstance(channels, dict) or not channels:
        raise DocumentError("channels: expected a non-empty object")
    k = len(times) - 1
    return WaypointDocument(times, {name: _parse_channel(name, raw, k) for name, raw in channels.items()})


def load_document(path) -> WaypointDocument:
    """Read and validate a waypoint file.

    Raises:
        DocumentError: with ``file:line:col`` for JSON syntax errors and a
            field path for schema errors.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DocumentError(f"{path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return parse_document(data)
    except DocumentError as exc:
        raise DocumentError(f"{path}: {exc}") from exc


def random_walk_positions(k: int, seed: int) -> np.ndarray:
    """Start at 0 and take ``k`` steps uniform in ``[-1, 1]``."""
    rng = np.random.default_rng(seed)
    return np.concatenate([[0.0], np.cumsum(rng.uniform(-1.0, 1.0, k))])


def random_walk_document(k: int, seed: int, s: int = DEFAULT_S, channel: str = "x") -> dict:
    """Waypoint document with one knot per second and random-walk positions."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    return {
        "times": [float(j) for j in range(k + 1)],
        "channels": {channel: {"s": s, "positions": random_walk_positions(k, seed).tolist()}},
    }


def write_document(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def sample_times(t0: float, t1: float, rate: float) -> np.ndarray:
    """Uniform samples at ``rate`` Hz from ``t0``, always ending exactly at ``t1``."""
    if not rate > 0:
        raise ValidationError(f"sample rate must be positive, got {rate}")
    count = int(math.floor((t1 - t0) * rate + 1e-9))
    ts = t0 + np.arange(count + 1) / rate
    if t1 - ts[-1] > 1e-9 / rate:
        return np.append(ts, t1)
    ts[-1] = t1
    return ts


@dataclass
class TrajectoryTable:
    """Sampled trajectory; ``columns`` maps header name to values."""

    times: np.ndarray
    columns: dict
    period: float

    @classmethod
    def sample(cls, splines: dict, rate: float, derivatives: int = 2) -> "TrajectoryTable":
        grid = next(iter(splines.values())).grid
        ts = sample_times(grid.times[0], grid.times[-1], rate)
        columns = {}
        for name, spline in splines.items():
            columns[name] = evaluate(spline, ts, 0)
            for r in range(1, derivatives + 1):
                columns[f"{name}_d{r}"] = evaluate(spline, ts, r)
        return cls(ts, columns, 1.0 / rate)

    @property
    def header(self) -> list:
        return ["t", *self.columns]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header)
            cols = list(self.columns.values())
            for q, t in enumerate(self.times):
                w.writerow([_fmt(t), *(_fmt(c[q]) for c in cols)])


def read_trajectory_csv(path) -> tuple[list, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)
