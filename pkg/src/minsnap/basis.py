"""Matrices of the minimum-derivative QP.

Rows of the basis matrix ``A`` are the derivatives ``0..s-1`` at the segment
start followed by the same derivatives at the segment end; that ordering is
shared by ``Gamma``, the selection matrices and every derivative vector.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import GridError


def _falling(a: int, r: int) -> float:
    out = 1.0
    for q in range(r):
        out *= a - q
    return out


def build_A(t0: float, t1: float, n: int, s: int) -> np.ndarray:
    """Transposed confluent Vandermonde matrix of shape ``(2s, n)``.

    Row ``h*s + r`` holds the r-th derivative of ``[1, t, ..., t^(n-1)]``
    evaluated at ``t0`` (h=0) or ``t1`` (h=1).
    """
    A = np.zeros((2 * s, n))
    for h, t in enumerate((t0, t1)):
        for r in range(s):
            for a in range(r, n):
                A[h * s + r, a] = _falling(a, r) * t ** (a - r)
    return A


def build_Q(t0: float, t1: float, n: int, r: int) -> np.ndarray:
    """Hessian of ``integral_{t0}^{t1} (d^r/dt^r [1, t, ..., t^(n-1)] p)^2 dt``.

    Closed-form monomial integration; zero matrix when ``r >= n``.
    """
    Q = np.zeros((n, n))
    for a in range(r, n):
        for b in range(r, n):
            e = a + b - 2 * r + 1
            Q[a, b] = _falling(a, r) * _falling(b, r) * (t1 ** e - t0 ** e) / e
    return Q


def build_Gamma(delta: float, n: int, s: int) -> np.ndarray:
    """Row scaling ``diag(delta^0 .. delta^-(s-1), delta^0 .. delta^-(s-1))``."""
    if not delta > 0:
        raise GridError(f"segment half-width must be positive, got {delta}")
    if n != 2 * s:
        raise ValueError(f"Gamma is defined for n = 2s, got n={n}, s={s}")
    return np.diag(np.tile(float(delta) ** -np.arange(s, dtype=float), 2))


def condition_number(M) -> float:
    """2-norm condition number ``sigma_max / sigma_min``.

    Returns ``inf`` when the smallest singular value is exactly zero. Values
    beyond ``1/eps`` are returned as computed; they only say the matrix is
    numerically singular (see :func:`numerically_singular`).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"condition number needs a square matrix, got shape {M.shape}")
    if M.size == 0:
        return 1.0
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] == 0.0:
        return float("inf")
    with np.errstate(over="ignore"):
        return float(sv[0] / sv[-1])


def numerically_singular(kappa: float) -> bool:
    return not kappa * np.finfo(float).eps < 1.0


@dataclass(frozen=True)
class EndpointSelection:
    """Free/fixed split of one segment endpoint.

    ``sigma`` (s x m) has one unit column per free derivative order, ``b``
    holds the fixed values and zeros at the free orders.
    """

    sigma: np.ndarray
    b: np.ndarray
    free: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.free)


def _endpoint_selection(mask_row, value_row) -> EndpointSelection:
    s = len(mask_row)
    free = tuple(int(j) for j in np.flatnonzero(~mask_row))
    sigma = np.zeros((s, len(free)))
    sigma[list(free), np.arange(len(free))] = 1.0
    b = np.where(mask_row, value_row, 0.0)
    return EndpointSelection(sigma, b, free)


def build_selection(spec) -> list[tuple[EndpointSelection, EndpointSelection]]:
    """Per-segment ``(start, end)`` selections for a :class:`ProblemSpec`.

    Constraints live on knots, so the end of segment i and the start of
    segment i+1 always share one free structure.
    """
    mask, values = spec.fixed_mask, spec.fixed_values
    per_knot = [_endpoint_selection(mask[j], values[j]) for j in range(spec.k + 1)]
    return [(per_knot[i], per_knot[i + 1]) for i in range(spec.k)]


@dataclass(frozen=True)
class EndpointBlocks:
    A: np.ndarray
    Q: np.ndarray
    Gamma: np.ndarray
    start: EndpointSelection
    end: EndpointSelection


def segment_blocks(spec, i: int, nondimensional: bool = True) -> EndpointBlocks:
    """All matrices for segment ``i`` (0-based).

    In the nondimensional frame ``A`` is ``Gamma @ A(-1, 1)`` and ``Q`` is the
    unit-interval Hessian; in the dimensional frame ``A`` and ``Q`` use the raw
    knots and ``Gamma`` is the identity.
    """
    n, s = spec.n, spec.s
    t0, t1 = spec.grid.times[i], spec.grid.times[i + 1]
    mask, values = spec.fixed_mask, spec.fixed_values
    start = _endpoint_selection(mask[i], values[i])
    end = _endpoint_selection(mask[i + 1], values[i + 1])
    if nondimensional:
        G = build_Gamma(spec.grid.widths[i], n, s)
        return EndpointBlocks(G @ unit_blocks(n, s).A, unit_blocks(n, s).Q, G, start, end)
    return EndpointBlocks(build_A(t0, t1, n, s), build_Q(t0, t1, n, s - 1), np.eye(n), start, end)


@dataclass(frozen=True)
class UnitBlocks:
    """Shared unit-interval quantities for one ``(n, s)``.

    ``K = A^-T Q A^-1`` maps nondimensional endpoint derivatives to cost.
    """

    A: np.ndarray
    Q: np.ndarray
    lu: tuple
    K: np.ndarray
    kappa: float


@functools.lru_cache(maxsize=32)
def unit_blocks(n: int, s: int) -> UnitBlocks:
    A = build_A(-1.0, 1.0, n, s)
    Q = build_Q(-1.0, 1.0, n, s - 1)
    lu = scipy.linalg.lu_factor(A)
    Ainv = scipy.linalg.lu_solve(lu, np.eye(n))
    K = Ainv.T @ Q @ Ainv
    K = 0.5 * (K + K.T)
    for a in (A, Q, K):
        a.setflags(write=False)
    return UnitBlocks(A, Q, lu, K, condition_number(A))
