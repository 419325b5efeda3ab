"""Dense reference solvers used to check the structured solver.

Two independent formulations:

* :func:`solve_dense` eliminates ``p = A^-1 d`` and ``d = b + Sigma f`` and
  solves the saddle-point system in ``(f, lambda)`` with explicit coupling
  rows, one copy of the free variables per segment endpoint.
* :func:`solve_full_qp` never inverts ``A``; it solves the stationarity system
  over ``(p, d)`` with ``A p = d``, continuity and fixed-value rows as
  constraints.

Both build full dense matrices and cost ``O(k^3)``.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .basis import build_A, build_Gamma, build_Q, build_selection, condition_number
from .errors import ConditioningError, IllPosedError, ValidationError
from .model import (
    Frame,
    ProblemSpec,
    SolveReport,
    Spline,
    constraint_residuals,
    continuity_residuals,
    snap_cost,
)

KAPPA_MAX = 1e12
FRAMES = ("dimensional", "nondimensional")


@dataclass
class DenseKktSystem:
    """``[[H, E^T], [E, 0]] [f; lam] = [g; 0]`` plus what is needed to map back.

    ``f_index[q] = (segment, endpoint, order)`` names free slot ``q``
    (endpoint 0 = start, 1 = end); ``lam_index[q] = (knot, order)`` names
    coupling row ``q``.
    """

    H: np.ndarray
    E: np.ndarray
    g: np.ndarray
    A: np.ndarray
    sigma: np.ndarray
    b: np.ndarray
    f_index: list
    lam_index: list
    frame: str
    kappa: float

    @property
    def matrix(self) -> np.ndarray:
        m, c = self.H.shape[0], self.E.shape[0]
        K = np.zeros((m + c, m + c))
        K[:m, :m] = self.H
        K[m:, :m] = self.E
        K[:m, m:] = self.E.T
        return K

    @property
    def rhs(self) -> np.ndarray:
        return np.concatenate([self.g, np.zeros(self.E.shape[0])])

    @property
    def dimension(self) -> int:
        return self.H.shape[0] + self.E.shape[0]


def _check_frame(frame):
    if frame not in FRAMES:
        raise ValueError(f"frame must be one of {FRAMES}, got {frame!r}")


def _segment_matrices(spec: ProblemSpec, frame: str, weighted: bool, kappa_max: float):
    """Per-segment ``A_i`` and ``Q_i`` plus the worst basis condition number."""
    n, s, t = spec.n, spec.s, spec.grid.times
    As, Qs, kappa = [], [], 0.0
    if frame == "nondimensional":
        A1 = build_A(-1.0, 1.0, n, s)
        Q1 = build_Q(-1.0, 1.0, n, s - 1)
        for delta in spec.grid.widths:
            As.append(build_Gamma(delta, n, s) @ A1)
            Qs.append((delta ** (3.0 - 2.0 * s) if weighted else 1.0) * Q1)
        kappa = max(condition_number(build_Gamma(d, n, s) @ A1) for d in np.unique(spec.grid.widths))
        return As, Qs, kappa
    if not weighted:
        raise ValueError("the unweighted variant only exists in the nondimensional frame")
    for i in range(spec.k):
        A = build_A(t[i], t[i + 1], n, s)
        kap = condition_number(A)
        if not kap < kappa_max:
            raise ConditioningError(
                f"segment {i} on [{t[i]}, {t[i + 1]}] has basis condition number {kap:.3g} >= {kappa_max:.0e}",
                kap,
            )
        kappa = max(kappa, kap)
        As.append(A)
        Qs.append(build_Q(t[i], t[i + 1], n, s - 1))
    return As, Qs, kappa


def assemble_kkt(
    spec: ProblemSpec,
    frame: str = "nondimensional",
    weighted: bool = True,
    kappa_max: float = KAPPA_MAX,
) -> DenseKktSystem:
    """Assemble the reduced saddle-point system.

    Coupling rows are emitted only for free derivative orders at interior
    knots; rows for fixed orders would be identically zero.

    Raises:
        ConditioningError: in the dimensional frame, when a segment's basis
            matrix has condition number ``>= kappa_max``.
    """
    _check_frame(frame)
    k, s = spec.k, spec.s
    As, Qs, kappa = _segment_matrices(spec, frame, weighted, kappa_max)
    A = scipy.linalg.block_diag(*As)
    Q = scipy.linalg.block_diag(*Qs)

    sel = build_selection(spec)
    sigma_blocks, b_parts, f_index = [], [], []
    for i, (start, end) in enumerate(sel):
        for h, ep in enumerate((start, end)):
            sigma_blocks.append(ep.sigma)
            b_parts.append(ep.b)
            f_index += [(i, h, r) for r in ep.free]
    sigma = scipy.linalg.block_diag(*sigma_blocks)
    if sigma.ndim != 2 or sigma.shape[0] != 2 * s * k:
        sigma = np.zeros((2 * s * k, len(f_index)))
    b = np.concatenate(b_parts)

    pos = {key: q for q, key in enumerate(f_index)}
    lam_index, rows = [], []
    for j in range(1, k):
        for r in sel[j][0].free:
            row = np.zeros(len(f_index))
            row[pos[(j - 1, 1, r)]] = 1.0
            row[pos[(j, 0, r)]] = -1.0
            rows.append(row)
            lam_index.append((j, r))
    E = np.array(rows).reshape(len(rows), len(f_index))

    # A^-1 [Sigma, b] by dense LU on the whole block-diagonal matrix
    X = scipy.linalg.solve(A, np.column_stack([sigma, b]))
    Xs, xb = X[:, :-1], X[:, -1]
    H = Xs.T @ Q @ Xs
    H = 0.5 * (H + H.T)
    g = -Xs.T @ (Q @ xb)
    return DenseKktSystem(H, E, g, A, sigma, b, f_index, lam_index, frame, kappa)


def _lu_solve(K: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Pivoted LU of a symmetric saddle-point matrix after symmetric equilibration.

    Scaling rows and columns by ``1/sqrt(max|K_ij|)`` makes the pivot test
    below independent of how differently the blocks are scaled.
    """
    if K.shape[0] == 0:
        return np.zeros(0)
    row_max = np.max(np.abs(K), axis=1)
    if not row_max.all():
        raise IllPosedError(f"dense KKT system is singular (zero row {int(np.argmin(row_max))})")
    D = 1.0 / np.sqrt(row_max)
    Ks = D[:, None] * K * D[None, :]
    with warnings.catch_warnings():
        # exact zero pivots are reported below as IllPosedError
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(Ks, check_finite=False)
    diag = np.abs(np.diag(lu))
    if diag.min() <= np.finfo(float).eps * diag.max() * K.shape[0]:
        raise IllPosedError(f"dense KKT system is singular (pivot {int(np.argmin(diag))})")
    return D * scipy.linalg.lu_solve((lu, piv), D * rhs, check_finite=False)


def _spline_from_p(spec, P, frame):
    return Spline(P.reshape(spec.k, spec.n), spec.grid, Frame(frame))


def _dense_report(spec, spline, kkt_res, elapsed, kappa):
    cont = continuity_residuals(spline, spec.s)
    cons = constraint_residuals(spline, spec)
    return SolveReport(
        cost=snap_cost(spline, spec.r),
        max_continuity_residual=float(cont.max()) if cont.size else 0.0,
        max_constraint_residual=float(cons.max()) if cons.size else 0.0,
        kkt_residual=kkt_res,
        wall_time=elapsed,
        condition_estimate=kappa,
    )


def solve_dense_system(system: DenseKktSystem) -> tuple[np.ndarray, np.ndarray]:
    """Pivoted LU solve of the saddle-point system; returns ``(f, lam)``."""
    z = _lu_solve(system.matrix, system.rhs)
    m = system.H.shape[0]
    return z[:m], z[m:]


def solve_dense(spec: ProblemSpec, frame: str = "nondimensional", weighted: bool = True):
    """Dense reduced-KKT reference solve; returns ``(spline, report)``.

    The spline's frame matches ``frame``.
    """
    start = time.perf_counter()
    system = assemble_kkt(spec, frame, weighted)
    f, lam = solve_dense_system(system)
    d = system.b + system.sigma @ f
    P = scipy.linalg.solve(system.A, d)
    elapsed = time.perf_counter() - start
    spline = _spline_from_p(spec, P, frame)
    z = np.concatenate([f, lam])
    res = float(np.max(np.abs(system.matrix @ z - system.rhs))) if z.size else 0.0
    return spline, _dense_report(spec, spline, res, elapsed, system.kappa)


def solve_full_qp(
    spec: ProblemSpec,
    frame: str = "nondimensional",
    weighted: bool = True,
    kappa_max: float = KAPPA_MAX,
    return_d: bool = False,
):
    """Solve the QP over ``(p, d)`` directly from its stationarity conditions.

    Fixed values are imposed on one endpoint copy per knot (the right-hand
    segment's start, or the last segment's end at the final knot); continuity
    rows tie the copies together.

    Returns the spline, plus the solved endpoint derivatives as a ``(k, 2s)``
    array when ``return_d`` is set.
    """
    _check_frame(frame)
    k, n, s = spec.k, spec.n, spec.s
    if k > 10:
        raise ValidationError(f"full-QP oracle is limited to k <= 10, got {k}")
    As, Qs, _ = _segment_matrices(spec, frame, weighted, kappa_max)
    Q = scipy.linalg.block_diag(*Qs)
    np_, nd = n * k, 2 * s * k

    def d_col(seg, h, r):
        return np_ + seg * 2 * s + h * s + r

    rows, rhs = [], []
    for i in range(k):
        for q in range(2 * s):
            row = np.zeros(np_ + nd)
            row[i * n:(i + 1) * n] = As[i][q]
            row[np_ + i * 2 * s + q] = -1.0
            rows.append(row)
            rhs.append(0.0)
    for j in range(1, k):
        for r in range(s):
            row = np.zeros(np_ + nd)
            row[d_col(j - 1, 1, r)] = 1.0
            row[d_col(j, 0, r)] = -1.0
            rows.append(row)
            rhs.append(0.0)
    for j, r, value in spec.constraints.fixed:
        row = np.zeros(np_ + nd)
        row[d_col(j, 0, r) if j < k else d_col(k - 1, 1, r)] = 1.0
        rows.append(row)
        rhs.append(value)
    E = np.array(rows)
    nz, nc = np_ + nd, E.shape[0]
    K = np.zeros((nz + nc, nz + nc))
    K[:np_, :np_] = 2.0 * Q
    K[nz:, :nz] = E
    K[:nz, nz:] = E.T
    sol = _lu_solve(K, np.concatenate([np.zeros(nz), rhs]))
    spline = _spline_from_p(spec, sol[:np_], frame)
    if return_d:
        return spline, sol[np_:nz].reshape(k, 2 * s)
    return spline
