"""Linear-time structured solver for the minimum-derivative QP.

Every segment is mapped to ``tau in [-1, 1]``, so all segments share one basis
matrix ``A(-1, 1)`` (factored once per ``(n, s)``) and differ only through the
row scaling ``Gamma_i`` and the cost weight ``delta_i^(3-2s)``.

Free derivatives are stored once per knot. Eliminating the junction
multipliers leaves a block-tridiagonal system in those knot variables, which
is swept with a block-Thomas recursion:

    Bbar_1 = B_1
    Bbar_i = B_i + D_{i-1} - C_{i-1}^T Bbar_{i-1}^-1 C_{i-1}
    gbar_i = g_i,start + g_{i-1},end - C_{i-1}^T Bbar_{i-1}^-1 gbar_{i-1}

followed by back-substitution from the last knot.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.linalg.lapack import dpotrf, dpotrs

from .basis import condition_number, build_Gamma, segment_blocks, unit_blocks
from .errors import IllPosedError
from .model import (
    Frame,
    ProblemSpec,
    SolveReport,
    Spline,
    _jumps,
    _misses,
    endpoint_derivatives,
    snap_cost,
)

# pivot threshold relative to the largest diagonal entry
PIVOT_RTOL = 1e-12


@dataclass
class SegmentTerms:
    """Reduced cost blocks of one segment in its free derivatives.

    ``[[B, C], [C^T, D]]`` is ``Sigma^T A^-T Q A^-1 Sigma`` and
    ``(g_start, g_end) = -Sigma^T A^-T Q A^-1 b``.
    """

    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    g_start: np.ndarray
    g_end: np.ndarray


@dataclass
class EliminationState:
    Bbar: list
    gbar: list
    chol: list  # lower Cholesky factors of Bbar
    W: list  # Bbar^-1 C
    v: list  # Bbar^-1 gbar


@dataclass
class FreeDerivatives:
    """Optimal free derivative values, one vector per knot.

    ``knots[j]`` holds the free orders of knot ``j`` in ascending order, in
    physical units. ``multipliers[i]`` couples segment ``i``'s end to segment
    ``i+1``'s start.
    """

    knots: list
    multipliers: list

    def endpoint(self, i: int, end: bool) -> np.ndarray:
        return self.knots[i + 1] if end else self.knots[i]

    def endpoint_vector(self) -> np.ndarray:
        """Per-endpoint copies stacked segment by segment (start, end)."""
        parts = []
        for i in range(len(self.knots) - 1):
            parts += [self.knots[i], self.knots[i + 1]]
        return np.concatenate(parts) if parts else np.zeros(0)

    def multiplier_vector(self) -> np.ndarray:
        return np.concatenate(self.multipliers) if self.multipliers else np.zeros(0)

    def perturbed(self, knot: int, slot: int, delta: float) -> "FreeDerivatives":
        knots = [x.copy() for x in self.knots]
        knots[knot][slot] += delta
        return FreeDerivatives(knots, self.multipliers)


def segment_weights(spec: ProblemSpec, weighted: bool = True) -> np.ndarray:
    """Cost factor per segment that turns the unit-interval cost into physical cost.

    With ``weighted=False`` every segment gets weight 1, which minimizes the
    sum of unit-interval costs instead of the physical integral.
    """
    if not weighted:
        return np.ones(spec.k)
    return spec.grid.widths ** (3.0 - 2.0 * spec.s)


def segment_terms(spec: ProblemSpec, i: int, weighted: bool = True) -> SegmentTerms:
    """Terms for segment ``i`` formed from explicit per-segment matrices.

    This is the direct (unbatched) construction; :func:`build_terms` produces
    the same blocks for all segments at once.
    """
    blk = segment_blocks(spec, i, nondimensional=True)
    w = segment_weights(spec, weighted)[i]
    ub = unit_blocks(spec.n, spec.s)
    # (Gamma A1)^-1 = A1^-1 Gamma^-1
    Ainv = scipy.linalg.lu_solve(ub.lu, np.diag(1.0 / np.diag(blk.Gamma)))
    M = w * (Ainv.T @ blk.Q @ Ainv)
    M = 0.5 * (M + M.T)
    sigma = scipy.linalg.block_diag(blk.start.sigma, blk.end.sigma)
    b = np.concatenate([blk.start.b, blk.end.b])
    H = sigma.T @ M @ sigma
    g = -sigma.T @ (M @ b)
    ms = blk.start.m
    return SegmentTerms(H[:ms, :ms], H[:ms, ms:], H[ms:, ms:], g[:ms], g[ms:])


def build_terms(spec: ProblemSpec, weighted: bool = True) -> list[SegmentTerms]:
    """Terms for every segment, batched over segments sharing a free pattern."""
    k, s = spec.k, spec.s
    K = unit_blocks(spec.n, s).K
    w = segment_weights(spec, weighted)
    gv = np.tile(spec.grid.widths[:, None] ** np.arange(s)[None, :], 2)
    mask, values = spec.fixed_mask, spec.fixed_values
    fixed = np.concatenate([mask[:-1], mask[1:]], axis=1)
    bvec = np.concatenate([values[:-1], values[1:]], axis=1) * gv
    keys = fixed @ (1 << np.arange(2 * s))
    patterns, inverse = np.unique(keys, return_inverse=True)
    terms: list = [None] * k
    for g, key in enumerate(patterns):
        idx = np.flatnonzero(inverse == g)
        free = np.flatnonzero(~fixed[idx[0]])
        ms = int(np.count_nonzero(free < s))
        sc = gv[idx][:, free] * np.sqrt(w[idx])[:, None]
        H = sc[:, :, None] * K[np.ix_(free, free)][None] * sc[:, None, :]
        load = -sc * (bvec[idx] @ K[free, :].T) * np.sqrt(w[idx])[:, None]
        for q, i in enumerate(idx):
            Hq = H[q]
            terms[i] = SegmentTerms(Hq[:ms, :ms], Hq[:ms, ms:], Hq[ms:, ms:], load[q, :ms], load[q, ms:])
    return terms


def _cholesky(M: np.ndarray, segment: int) -> np.ndarray:
    if M.shape[0] == 0:
        return M
    L, info = dpotrf(M, lower=1, clean=1)
    if info != 0:
        raise IllPosedError(f"reduced block of segment {segment} is not positive definite", segment)
    piv = L.diagonal()
    if (piv * piv).min() < PIVOT_RTOL * M.diagonal().max():
        raise IllPosedError(f"reduced block of segment {segment} is numerically singular", segment)
    return L


def _cho_solve(L: np.ndarray, X: np.ndarray) -> np.ndarray:
    if L.shape[0] == 0 or X.size == 0:
        return np.zeros(X.shape)
    out, info = dpotrs(L, X, lower=1)
    return out


def forward_elimination(terms: list[SegmentTerms]) -> EliminationState:
    """Forward sweep; raises :class:`IllPosedError` naming the failing segment."""
    state = EliminationState([], [], [], [], [])
    Bbar, gbar = terms[0].B, terms[0].g_start
    for i, t in enumerate(terms):
        if i > 0:
            prev = terms[i - 1]
            Bbar = t.B + prev.D - prev.C.T @ state.W[-1]
            gbar = t.g_start + prev.g_end - prev.C.T @ state.v[-1]
        L = _cholesky(Bbar, i)
        m = t.C.shape[1]
        X = _cho_solve(L, np.concatenate((t.C, gbar[:, None]), axis=1))
        state.Bbar.append(Bbar)
        state.gbar.append(gbar)
        state.chol.append(L)
        state.W.append(X[:, :m])
        state.v.append(X[:, m])
    return state


def backward_substitution(state: EliminationState, terms: list[SegmentTerms]) -> FreeDerivatives:
    """Back-substitute knot values from the last knot; recover junction multipliers."""
    k = len(terms)
    last = terms[-1]
    S = last.D - last.C.T @ state.W[-1]
    rhs = last.g_end - last.C.T @ state.v[-1]
    L = _cholesky(S, k - 1)
    knots: list = [None] * (k + 1)
    knots[k] = _cho_solve(L, rhs[:, None])[:, 0] if S.shape[0] else np.zeros(0)
    for i in range(k - 1, -1, -1):
        knots[i] = state.v[i] - state.W[i] @ knots[i + 1]
    multipliers = [
        terms[i].g_end - terms[i].C.T @ knots[i] - terms[i].D @ knots[i + 1] for i in range(k - 1)
    ]
    return FreeDerivatives(knots, multipliers)


def boundary_derivatives(spec: ProblemSpec, free: FreeDerivatives) -> np.ndarray:
    """Knot derivative table ``(k+1, s)``: fixed values merged with free ones."""
    X = spec.fixed_values.copy()
    mask = spec.fixed_mask
    for j, x in enumerate(free.knots):
        X[j, ~mask[j]] = x
    return X


def recover_spline(spec: ProblemSpec, free: FreeDerivatives) -> Spline:
    """Nondimensional coefficients from ``Gamma_i A(-1,1) p_i = d_i``."""
    s = spec.s
    X = boundary_derivatives(spec, free)
    d = np.concatenate([X[:-1], X[1:]], axis=1)
    gv = np.tile(spec.grid.widths[:, None] ** np.arange(s)[None, :], 2)
    P = scipy.linalg.lu_solve(unit_blocks(spec.n, s).lu, (d * gv).T).T
    return Spline(P, spec.grid, Frame.NONDIMENSIONAL)


def structured_kkt_residual(terms: list[SegmentTerms], free: FreeDerivatives) -> float:
    """Max-norm residual of the KKT equations evaluated block by block."""
    k = len(terms)
    parts = []
    for i, t in enumerate(terms):
        a, b = free.knots[i], free.knots[i + 1]
        r_start = t.B @ a + t.C @ b - t.g_start
        r_end = t.C.T @ a + t.D @ b - t.g_end
        if i > 0:
            r_start = r_start - free.multipliers[i - 1]
        if i < k - 1:
            r_end = r_end + free.multipliers[i]
        parts += (r_start, r_end)
    res = np.concatenate(parts)
    return float(np.abs(res).max()) if res.size else 0.0


def kkt_residual(spec: ProblemSpec, free: FreeDerivatives, weighted: bool = True) -> float:
    """Residual of the dense KKT system assembled by :mod:`minsnap.oracle`.

    Dense assembly is cubic in ``k``; meant for validating small instances.
    """
    from .oracle import assemble_kkt

    system = assemble_kkt(spec, "nondimensional", weighted=weighted)
    z = np.concatenate([free.endpoint_vector(), free.multiplier_vector()])
    if z.size == 0:
        return 0.0
    return float(np.max(np.abs(system.matrix @ z - system.rhs)))


@lru_cache(maxsize=256)
def _scaled_kappa(delta: float, n: int, s: int) -> float:
    return condition_number(build_Gamma(delta, n, s) @ unit_blocks(n, s).A)


def _condition_estimate(spec: ProblemSpec) -> float:
    widths = spec.grid.widths
    return max(_scaled_kappa(float(d), spec.n, spec.s) for d in (widths.min(), widths.max()))


def solve_minimum_snap(
    spec: ProblemSpec,
    weighted: bool = True,
    rtol: float = 1e-6,
    return_free: bool = False,
):
    """Solve one channel in linear time.

    Args:
        spec: the problem.
        weighted: scale each segment's unit-interval cost by
            ``delta_i^(3-2s)`` so the physical integral is minimized. ``False``
            reproduces the unweighted nondimensional program, which differs
            from the physical optimum on non-uniform grids.
        rtol: continuity and constraint residuals must stay below
            ``rtol * (1 + max|d|)``; otherwise :class:`IllPosedError` is raised.
        return_free: also return the :class:`FreeDerivatives`.

    Returns:
        ``(spline, report)`` with the spline in the nondimensional frame, or
        ``(spline, report, free)`` when ``return_free`` is set.
    """
    start = time.perf_counter()
    terms = build_terms(spec, weighted)
    state = forward_elimination(terms)
    free = backward_substitution(state, terms)
    spline = recover_spline(spec, free)
    elapsed = time.perf_counter() - start

    report = _report(spec, spline, free, terms, elapsed)
    X = boundary_derivatives(spec, free)
    bound = rtol * (1.0 + float(np.max(np.abs(X))))
    if max(report.max_continuity_residual, report.max_constraint_residual) > bound:
        raise IllPosedError(
            f"recovered spline misses its constraints by {max(report.max_continuity_residual, report.max_constraint_residual):.3g}"
            f" (bound {bound:.3g})"
        )
    if return_free:
        return spline, report, free
    return spline, report


def _report(spec, spline, free, terms, elapsed) -> SolveReport:
    d = endpoint_derivatives(spline, spec.s)
    cont = _jumps(d, spec.s)
    cons = _misses(d, spec)
    return SolveReport(
        cost=snap_cost(spline, spec.r),
        max_continuity_residual=float(cont.max()) if cont.size else 0.0,
        max_constraint_residual=float(cons.max()) if cons.size else 0.0,
        kkt_residual=structured_kkt_residual(terms, free),
        wall_time=elapsed,
        condition_estimate=_condition_estimate(spec),
    )
