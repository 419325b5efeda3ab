"""Problem and spline types, plus evaluation and cost of piecewise polynomials.

Coefficients are stored in ascending monomial order. A spline lives in one of
two frames: ``DIMENSIONAL`` (coefficients act on raw time ``t``) or
``NONDIMENSIONAL`` (each segment acts on the local variable
``tau = (t - t_{i-1}) / delta_i - 1`` in ``[-1, 1]``, with
``delta_i = (t_i - t_{i-1}) / 2``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from .basis import build_A, build_Q
from .errors import DomainError, GridError, ValidationError


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def falling_factorial(a, r: int):
    """``a! / (a - r)!`` elementwise, zero where ``a < r``."""
    a = np.asarray(a)
    out = np.ones(a.shape, dtype=float)
    for q in range(r):
        out = out * (a - q)
    return np.where(a >= r, out, 0.0)


class Frame(enum.Enum):
    DIMENSIONAL = "dimensional"
    NONDIMENSIONAL = "nondimensional"


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing knot vector ``t_0 < ... < t_k``."""

    times: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise GridError("a time grid needs at least two knots")
        if not np.all(np.isfinite(t)):
            raise GridError("knot times must be finite")
        bad = np.flatnonzero(np.diff(t) <= 0)
        if bad.size:
            i = int(bad[0])
            raise GridError(
                f"segment {i} has non-positive length: t[{i}]={t[i]!r}, t[{i + 1}]={t[i + 1]!r}"
            )
        object.__setattr__(self, "times", _frozen(t))
        object.__setattr__(self, "_widths", _frozen(np.diff(t) / 2.0))

    @property
    def widths(self) -> np.ndarray:
        """Segment half-widths ``delta_i``."""
        return self._widths

    @property
    def segment_count(self) -> int:
        return self.times.size - 1

    def locate(self, t):
        """Segment index for each ``t``; half-open segments, last one closed."""
        t = np.asarray(t, dtype=float)
        t0, tk = self.times[0], self.times[-1]
        if np.any((t < t0) | (t > tk)) or np.any(np.isnan(t)):
            raise DomainError(f"time outside spline domain [{t0}, {tk}]")
        idx = np.searchsorted(self.times, t, side="right") - 1
        return np.clip(idx, 0, self.segment_count - 1)

    def shifted(self, offset: float) -> "TimeGrid":
        return TimeGrid(self.times + offset)


@dataclass(frozen=True)
class SegmentPolynomial:
    """One polynomial piece. ``domain`` is the physical interval ``[t0, t1)``."""

    coefficients: np.ndarray
    domain: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _frozen(self.coefficients))


class Spline:
    """``k`` polynomial segments over a :class:`TimeGrid`.

    Coefficients are kept as a ``(k, n)`` array; :attr:`segments` exposes them
    as :class:`SegmentPolynomial` objects on demand.
    """

    def __init__(self, coefficients, grid: TimeGrid, frame: Frame = Frame.DIMENSIONAL):
        coefficients = np.atleast_2d(np.asarray(coefficients, dtype=float))
        if coefficients.shape[0] != grid.segment_count:
            raise ValidationError(
                f"{coefficients.shape[0]} coefficient rows for {grid.segment_count} segments"
            )
        self.coefficients = _frozen(coefficients)
        self.grid = grid
        self.frame = Frame(frame)

    @property
    def n(self) -> int:
        return self.coefficients.shape[1]

    @property
    def segments(self) -> tuple[SegmentPolynomial, ...]:
        t = self.grid.times
        return tuple(
            SegmentPolynomial(p, (float(t[i]), float(t[i + 1])))
            for i, p in enumerate(self.coefficients)
        )

    def __call__(self, t, r: int = 0):
        return evaluate(self, t, r)

    def __repr__(self):
        return f"Spline(k={self.grid.segment_count}, n={self.n}, frame={self.frame.value})"


class ConstraintSet:
    """Fixed derivative values ``(boundary, order) -> value``.

    Constraints are attached to knots, so an interior constraint applies to
    both the left segment's end and the right segment's start.
    """

    def __init__(self, fixed: Mapping[tuple[int, int], float] | None = None):
        self._fixed = {}
        for (j, r), v in (fixed or {}).items():
            self._fixed[(int(j), int(r))] = float(v)

    @classmethod
    def from_records(cls, records: Iterable) -> "ConstraintSet":
        """Build from ``(boundary, order, value)`` triples, rejecting duplicates."""
        fixed = {}
        for rec in records:
            j, r, v = rec
            key = (int(j), int(r))
            if key in fixed:
                if fixed[key] != float(v):
                    raise ValidationError(
                        f"boundary {key[0]} derivative {key[1]} fixed to both {fixed[key]} and {float(v)}"
                    )
                raise ValidationError(f"duplicate constraint on boundary {key[0]} derivative {key[1]}")
            fixed[key] = float(v)
        return cls(fixed)

    @classmethod
    def waypoints(cls, positions, s: int, end_values: float = 0.0) -> "ConstraintSet":
        """Positions fixed at every knot, derivatives ``1..s-1`` fixed at both ends."""
        positions = np.asarray(positions, dtype=float)
        fixed = {(j, 0): float(x) for j, x in enumerate(positions)}
        last = positions.size - 1
        for r in range(1, s):
            fixed[(0, r)] = end_values
            fixed[(last, r)] = end_values
        return cls(fixed)

    @property
    def fixed(self) -> list[tuple[int, int, float]]:
        return [(j, r, v) for (j, r), v in sorted(self._fixed.items())]

    def __len__(self):
        return len(self._fixed)

    def __contains__(self, key):
        return key in self._fixed

    def value(self, boundary: int, order: int) -> float:
        return self._fixed[(boundary, order)]

    def tables(self, k: int, s: int) -> tuple[np.ndarray, np.ndarray]:
        """``(mask, values)`` arrays of shape ``(k+1, s)``; values are 0 where free."""
        mask = np.zeros((k + 1, s), dtype=bool)
        values = np.zeros((k + 1, s))
        for (j, r), v in self._fixed.items():
            if not (0 <= j <= k):
                raise ValidationError(f"constraint references boundary {j}, grid has 0..{k}")
            if not (0 <= r < s):
                raise ValidationError(f"constraint derivative order {r} outside 0..{s - 1}")
            mask[j, r] = True
            values[j, r] = v
        return mask, values

    def free_counts(self, k: int, s: int) -> np.ndarray:
        """Free dimension ``m`` per segment endpoint, shape ``(k, 2)``."""
        mask, _ = self.tables(k, s)
        free = s - mask.sum(axis=1)
        return np.stack([free[:-1], free[1:]], axis=1)

    def endpoint_constraint_count(self, k: int, s: int) -> int:
        """Constraint count with interior knots counted once per adjacent segment."""
        return int(2 * s * k - self.free_counts(k, s).sum())


@dataclass(frozen=True)
class ProblemSpec:
    """Full description of one channel's minimum-derivative problem.

    ``s`` is the continuity depth: derivatives ``0..s-1`` are continuous and
    constrainable, derivative ``s-1`` is penalized, and ``n = 2s``.
    """

    grid: TimeGrid
    constraints: ConstraintSet
    s: int
    n: int | None = None

    def __post_init__(self):
        if not isinstance(self.grid, TimeGrid):
            object.__setattr__(self, "grid", TimeGrid(self.grid))
        if self.s < 1:
            raise ValidationError(f"continuity depth s must be >= 1, got {self.s}")
        n = 2 * self.s if self.n is None else int(self.n)
        if n != 2 * self.s:
            raise ValidationError(f"n must equal 2s (got n={n}, s={self.s})")
        object.__setattr__(self, "n", n)
        mask, values = self.constraints.tables(self.k, self.s)
        object.__setattr__(self, "_mask", mask)
        object.__setattr__(self, "_values", values)

    @classmethod
    def waypoints(cls, times, positions, s: int = 5) -> "ProblemSpec":
        positions = np.asarray(positions, dtype=float)
        if positions.size != len(times):
            raise ValidationError(f"{positions.size} positions for {len(times)} knots")
        return cls(TimeGrid(times), ConstraintSet.waypoints(positions, s), s)

    @property
    def k(self) -> int:
        return self.grid.segment_count

    @property
    def r(self) -> int:
        """Penalized derivative order."""
        return self.s - 1

    @property
    def fixed_mask(self) -> np.ndarray:
        return self._mask

    @property
    def fixed_values(self) -> np.ndarray:
        return self._values

    def with_grid(self, grid: TimeGrid) -> "ProblemSpec":
        return ProblemSpec(grid, self.constraints, self.s, self.n)


@dataclass
class SolveReport:
    cost: float
    max_continuity_residual: float
    max_constraint_residual: float
    kkt_residual: float
    wall_time: float
    condition_estimate: float
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "cost": self.cost,
            "max_continuity_residual": self.max_continuity_residual,
            "max_constraint_residual": self.max_constraint_residual,
            "kkt_residual": self.kkt_residual,
            "wall_time": self.wall_time,
            "condition_estimate": self.condition_estimate,
        }
        out.update(self.extra)
        return out


def _horner_derivative(coefficients, x, r: int):
    """r-th derivative of rows of ``coefficients`` at ``x`` (broadcast over rows)."""
    coefficients = np.asarray(coefficients, dtype=float)
    n = coefficients.shape[-1]
    x = np.asarray(x, dtype=float)
    if r >= n:
        return np.zeros(np.broadcast_shapes(coefficients.shape[:-1], x.shape))
    c = coefficients[..., r:] * falling_factorial(np.arange(r, n), r)
    out = c[..., -1] * np.ones_like(x)
    for q in range(c.shape[-1] - 2, -1, -1):
        out = out * x + c[..., q]
    return out


def eval_derivative(seg: SegmentPolynomial, t: float, r: int = 0) -> float:
    """Evaluate the r-th derivative of a raw monomial polynomial at ``t``."""
    if r < 0:
        raise ValueError("derivative order must be non-negative")
    return float(_horner_derivative(seg.coefficients, t, r))


def evaluate(spline: Spline, t, r: int = 0):
    """Vectorized :func:`eval_spline`; returns an array shaped like ``t``."""
    if r < 0:
        raise ValueError("derivative order must be non-negative")
    t = np.asarray(t, dtype=float)
    idx = spline.grid.locate(t)
    coeffs = spline.coefficients[idx]
    if spline.frame is Frame.DIMENSIONAL:
        return _horner_derivative(coeffs, t, r)
    delta = spline.grid.widths[idx]
    tau = (t - spline.grid.times[idx]) / delta - 1.0
    return _horner_derivative(coeffs, tau, r) * delta ** (-r)


def eval_spline(spline: Spline, t: float, r: int = 0) -> float:
    """Dimensional r-th derivative of the spline at physical time ``t``.

    Raises:
        DomainError: if ``t`` is outside ``[t_0, t_k]``.
    """
    return float(evaluate(spline, t, r))


@lru_cache(maxsize=None)
def _unit_endpoint_rows(n: int, s: int) -> np.ndarray:
    A = build_A(-1.0, 1.0, n, s)
    A.flags.writeable = False
    return A


def endpoint_derivatives(spline: Spline, s: int) -> np.ndarray:
    """Dimensional derivatives ``0..s-1`` at both ends of every segment.

    Returns a ``(k, 2s)`` array laid out like the rows of the basis matrix:
    start derivatives then end derivatives. Each segment is evaluated on its
    own closed interval.
    """
    if spline.frame is Frame.NONDIMENSIONAL:
        # tau = -1 and tau = 1 rows of the unit basis, then the chain rule
        scale = spline.grid.widths[:, None] ** (-np.arange(s))[None, :]
        return (spline.coefficients @ _unit_endpoint_rows(spline.n, s).T) * np.tile(scale, 2)
    t = spline.grid.times
    out = np.empty((spline.grid.segment_count, 2 * s))
    for h, x in enumerate((t[:-1], t[1:])):
        for r in range(s):
            out[:, h * s + r] = _horner_derivative(spline.coefficients, x, r)
    return out


def snap_cost(spline: Spline, r: int) -> float:
    """Integral over the whole spline of the squared r-th time derivative."""
    P = spline.coefficients
    n = spline.n
    if r >= n:
        return 0.0
    if spline.frame is Frame.NONDIMENSIONAL:
        Q = build_Q(-1.0, 1.0, n, r)
        w = spline.grid.widths ** (1 - 2 * r)
        return float(np.sum(w * np.einsum("ia,ab,ib->i", P, Q, P)))
    t = spline.grid.times
    return float(sum(p @ build_Q(t[i], t[i + 1], n, r) @ p for i, p in enumerate(P)))


def _jumps(d: np.ndarray, s: int) -> np.ndarray:
    return np.abs(d[:-1, s:] - d[1:, :s]).ravel()


def _misses(d: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    s = spec.s
    mask, values = spec.fixed_mask, spec.fixed_values
    start = np.abs(d[:, :s] - values[:-1])[mask[:-1]]
    end = np.abs(d[:, s:] - values[1:])[mask[1:]]
    return np.concatenate([start, end])


def continuity_residuals(spline: Spline, s: int) -> np.ndarray:
    """``|jump|`` of derivatives ``0..s-1`` at each interior knot, shape ``((k-1)*s,)``.

    Ordered knot-major, derivative-minor. Empty for a single segment.
    """
    if spline.grid.segment_count < 2:
        return np.zeros(0)
    return _jumps(endpoint_derivatives(spline, s), s)


def constraint_residuals(spline: Spline, spec: ProblemSpec) -> np.ndarray:
    """``|value - beta|`` for every fixed derivative, checked on each adjacent segment."""
    return _misses(endpoint_derivatives(spline, spec.s), spec)


def to_dimensional(spline: Spline) -> Spline:
    """Re-expand a nondimensional spline into raw-time monomial coefficients.

    Only numerically sensible when the knots are small in magnitude; the
    expansion multiplies by powers of ``t_{i-1} / delta_i``.
    """
    if spline.frame is Frame.DIMENSIONAL:
        return spline
    n = spline.n
    t0 = spline.grid.times[:-1]
    delta = spline.grid.widths
    alpha = 1.0 / delta
    beta = -t0 / delta - 1.0
    out = np.zeros_like(spline.coefficients)
    for a in range(n):
        pa = spline.coefficients[:, a]
        for c in range(a + 1):
            out[:, c] += pa * math.comb(a, c) * alpha ** c * beta ** (a - c)
    return Spline(out, spline.grid, Frame.DIMENSIONAL)
