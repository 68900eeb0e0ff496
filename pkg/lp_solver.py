"""
lp_solver.py — Bounded-variable primal revised simplex.

Every row r becomes an equality with its own slack column s_r:

    rowᵣ·x + s_r = rhs_r,   s_r ∈ [0, inf) for <=, (-inf, 0] for >=, [0, 0] for =

so variable bounds, slack bounds and free variables all go through the same
bound machinery and the basis stays m x m.

Phases:
  1. Nonbasic columns start at the supplied point (clipped into their bounds)
     or at the bound closest to 0. Rows whose slack cannot absorb the residual
     get an artificial column; phase 1 minimises the artificial sum.
  2. Artificials are fixed at 0 and the true objective is minimised.

Nonbasic columns may sit strictly between their bounds (e.g. after a warm
start); pricing lets those move in either direction.

Pricing is Dantzig (largest |reduced cost|, lowest index on ties). After
`bland_after` consecutive degenerate pivots Bland's rule takes over until the
next step with positive length. The basis is held as a sparse LU (splu) plus
product-form eta updates and refactorised every `refactor_every` pivots or
when the row residual drifts.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import TextIO

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from lp_build import EQ, GE, LE, LpProblem, LpSolution, LpStatus, count_active_trust_bounds

logger = logging.getLogger(__name__)

_RATIO_TIE_TOL = 1e-12
_DEGENERATE_STEP = 1e-12
_DRIFT_CHECK_EVERY = 10


@dataclass(frozen=True)
class SolverConfig:
    feasibility_tol: float = 1e-7
    optimality_tol: float = 1e-7
    max_pivots: int = 200_000
    anti_cycling: bool = True
    bland_after: int = 50
    refactor_every: int = 100
    drift_tol: float = 1e-9
    pivot_tol: float = 1e-9
    time_limit_secs: float | None = None
    pivot_log: TextIO | None = None

    def __post_init__(self) -> None:
        if not (self.feasibility_tol > 0 and self.optimality_tol > 0):
            raise ValueError("solver tolerances must be positive")
        if self.max_pivots < 0:
            raise ValueError("max_pivots must be non-negative")


# ---------------------------------------------------------------------------
# Basis factorisation
# ---------------------------------------------------------------------------

class _Basis:
    """
    B = B0 · E1 · ... · Ek with B0 factorised by splu and each Ei an eta
    matrix (identity with column r replaced by alpha).
    """

    def __init__(self, columns: sp.csc_matrix, head: np.ndarray) -> None:
        self.columns = columns
        self.head = head
        self.m = columns.shape[0]
        self._lu = None
        self._etas: list[tuple[int, np.ndarray]] = []

    @property
    def eta_count(self) -> int:
        return len(self._etas)

    def refactor(self) -> None:
        self._etas = []
        if self.m == 0:
            self._lu = None
            return
        B = self.columns[:, self.head].tocsc()
        try:
            self._lu = splu(B)
        except RuntimeError as exc:
            raise RuntimeError(f"basis factorisation failed: {exc}") from exc

    def ftran(self, v: np.ndarray) -> np.ndarray:
        """Solve B x = v."""
        if self.m == 0:
            return np.zeros(0)
        x = self._lu.solve(np.asarray(v, dtype=float))
        for r, alpha in self._etas:
            xr = x[r] / alpha[r]
            x -= alpha * xr
            x[r] = xr
        return x

    def btran(self, v: np.ndarray) -> np.ndarray:
        """Solve Bᵀ x = v."""
        if self.m == 0:
            return np.zeros(0)
        x = np.array(v, dtype=float, copy=True)
        for r, alpha in reversed(self._etas):
            x[r] = (x[r] - (alpha @ x - alpha[r] * x[r])) / alpha[r]
        return self._lu.solve(x, trans="T")

    def update(self, r: int, alpha: np.ndarray) -> None:
        self._etas.append((r, alpha.copy()))


# ---------------------------------------------------------------------------
# Simplex
# ---------------------------------------------------------------------------

class _BoundedSimplex:
    def __init__(self, lp: LpProblem, cfg: SolverConfig, x0: np.ndarray | None) -> None:
        self.lp = lp
        self.cfg = cfg
        self.n = lp.num_vars
        self.pivots = 0
        self.phase1_pivots = 0
        self.ray: np.ndarray | None = None
        self.deadline = (
            time.monotonic() + cfg.time_limit_secs if cfg.time_limit_secs is not None else None
        )
        self._setup(x0)

    # ---------------------------------------------------------------- setup

    def _setup(self, x0: np.ndarray | None) -> None:
        lp, cfg = self.lp, self.cfg
        A = lp.matrix
        m, n = A.shape

        # Empty rows: drop when satisfied by 0, remember the first violated one.
        row_nnz = np.diff(A.indptr)
        empty = row_nnz == 0
        self.empty_violation: int | None = None
        for r in np.flatnonzero(empty):
            rel, b = lp.relations[r], lp.rhs[r]
            ok = (rel == LE and b >= -cfg.feasibility_tol) or (rel == GE and b <= cfg.feasibility_tol) or (
                rel == EQ and abs(b) <= cfg.feasibility_tol
            )
            if not ok and self.empty_violation is None:
                self.empty_violation = int(r)
        keep = np.flatnonzero(~empty)
        self.row_map = keep
        A = A[keep]
        rel = lp.relations[keep]
        b = lp.rhs[keep]
        m = A.shape[0]
        self.m = m
        self.b = b

        s_lo = np.where(rel == GE, -np.inf, 0.0)
        s_hi = np.where(rel == LE, np.inf, 0.0)

        if x0 is None:
            start = np.clip(np.zeros(n), lp.lower, lp.upper)
        else:
            start = np.clip(np.asarray(x0, dtype=float).reshape(-1), lp.lower, lp.upper)
        residual = b - A @ start
        s_val = np.clip(residual, s_lo, s_hi)
        gap = residual - s_val
        needs_art = np.abs(gap) > cfg.feasibility_tol * (1.0 + np.abs(b))
        art_rows = np.flatnonzero(needs_art)
        k = art_rows.shape[0]
        self.num_art = k
        self.art_rows = art_rows

        art_cols = sp.csc_matrix(
            (np.sign(gap[art_rows]), (art_rows, np.arange(k))), shape=(m, k)
        )
        self.columns = sp.hstack([A.tocsc(), sp.identity(m, format="csc"), art_cols], format="csc")
        self.columns_T = self.columns.T.tocsr()
        total = n + m + k

        self.lower = np.concatenate([lp.lower, s_lo, np.zeros(k)])
        self.upper = np.concatenate([lp.upper, s_hi, np.full(k, np.inf)])
        self.x = np.concatenate([start, np.where(needs_art, s_val, residual), np.abs(gap[art_rows])])

        head = n + np.arange(m)
        head[art_rows] = n + m + np.arange(k)
        self.is_basic = np.zeros(total, dtype=bool)
        self.is_basic[head] = True
        self.basis = _Basis(self.columns, head)
        self.basis.refactor()
        self.cost = np.concatenate([lp.objective, np.zeros(m + k)])

    # -------------------------------------------------------------- helpers

    def _column(self, q: int) -> np.ndarray:
        start, end = self.columns.indptr[q], self.columns.indptr[q + 1]
        col = np.zeros(self.m)
        col[self.columns.indices[start:end]] = self.columns.data[start:end]
        return col

    def _recompute_basics(self) -> None:
        head = self.basis.head
        x = self.x.copy()
        x[head] = 0.0
        self.x[head] = self.basis.ftran(self.b - self.columns @ x)

    def _refactor(self) -> None:
        self.basis.refactor()
        self._recompute_basics()

    def _drifted(self) -> bool:
        if self.m == 0:
            return False
        res = self.columns @ self.x - self.b
        scale = 1.0 + (np.max(np.abs(self.b)) if self.m else 0.0)
        return float(np.max(np.abs(res))) > self.cfg.drift_tol * scale

    def _price(self, d: np.ndarray, bland: bool) -> tuple[int, int]:
        tol = self.cfg.optimality_tol
        free_to_rise = (~self.is_basic) & (self.x < self.upper)
        free_to_fall = (~self.is_basic) & (self.x > self.lower)
        rise = free_to_rise & (d < -tol)
        fall = free_to_fall & (d > tol)
        eligible = rise | fall
        if not eligible.any():
            return -1, 0
        if bland:
            q = int(np.flatnonzero(eligible)[0])
        else:
            q = int(np.argmax(np.where(eligible, np.abs(d), -1.0)))
        return q, (1 if rise[q] else -1)

    def _ratio_test(
        self, q: int, direction: int, alpha: np.ndarray, bland: bool
    ) -> tuple[float, int]:
        """Step length and leaving basis position (-1 for a bound flip of q)."""
        head = self.basis.head
        delta = -direction * alpha
        xb = self.x[head]
        lb, ub = self.lower[head], self.upper[head]
        ptol = self.cfg.pivot_tol

        ratios = np.full(self.m, np.inf)
        falling = delta < -ptol
        rising = delta > ptol
        with np.errstate(invalid="ignore", divide="ignore"):
            fall_r = (xb - lb) / -delta
            rise_r = (ub - xb) / delta
        ratios[falling] = fall_r[falling]
        ratios[rising] = rise_r[rising]
        ratios = np.maximum(ratios, 0.0)

        own = (self.upper[q] - self.x[q]) if direction > 0 else (self.x[q] - self.lower[q])
        t_min = float(ratios.min()) if self.m else np.inf
        if own <= t_min:
            return own, -1
        if not np.isfinite(t_min):
            return np.inf, -1

        ties = np.flatnonzero(ratios <= t_min + _RATIO_TIE_TOL)
        if bland:
            pos = int(ties[np.argmin(head[ties])])
        else:
            mags = np.abs(delta[ties])
            best = ties[mags >= mags.max() - 1e-15]
            pos = int(best[np.argmin(head[best])])
        return float(ratios[pos]), pos

    def _log_pivot(self, phase: int, q: int, leaving: int, step: float, obj: float) -> None:
        if self.cfg.pivot_log is not None:
            self.cfg.pivot_log.write(f"{phase}\t{self.pivots}\t{q}\t{leaving}\t{step:.6g}\t{obj:.12g}\n")

    # ----------------------------------------------------------------- loop

    def _iterate(self, cost: np.ndarray, phase: int) -> LpStatus:
        cfg = self.cfg
        degenerate_run = 0
        bland = False
        head = self.basis.head

        while True:
            if self.pivots >= cfg.max_pivots:
                return LpStatus.ITER_LIMIT
            if self.deadline is not None and time.monotonic() > self.deadline:
                return LpStatus.ITER_LIMIT

            pi = self.basis.btran(cost[head])
            d = cost - self.columns_T @ pi
            d[head] = 0.0
            q, direction = self._price(d, bland)
            if q < 0:
                return LpStatus.OPTIMAL

            alpha = self.basis.ftran(self._column(q))
            step, pos = self._ratio_test(q, direction, alpha, bland)
            if not np.isfinite(step):
                ray = np.zeros(self.x.shape[0])
                ray[q] = direction
                ray[head] = -direction * alpha
                self.ray = ray[: self.n]
                return LpStatus.UNBOUNDED

            self.x[q] += direction * step
            self.x[head] -= direction * step * alpha
            leaving = -1
            if pos < 0:
                self.x[q] = self.upper[q] if direction > 0 else self.lower[q]
            else:
                leaving = int(head[pos])
                fell = -direction * alpha[pos] < 0
                self.x[leaving] = self.lower[leaving] if fell else self.upper[leaving]
                head[pos] = q
                self.is_basic[leaving] = False
                self.is_basic[q] = True
                self.basis.update(pos, alpha)

            self.pivots += 1
            if phase == 1:
                self.phase1_pivots += 1
            self._log_pivot(phase, q, leaving, step, float(cost @ self.x))

            if step <= _DEGENERATE_STEP:
                degenerate_run += 1
                if cfg.anti_cycling and degenerate_run >= cfg.bland_after:
                    bland = True
            else:
                degenerate_run = 0
                bland = False

            if self.basis.eta_count >= cfg.refactor_every:
                self._refactor()
            elif self.pivots % _DRIFT_CHECK_EVERY == 0 and self._drifted():
                logger.debug("residual drift after %d pivots; refactorising", self.pivots)
                self._refactor()

    # ------------------------------------------------------------------ run

    def _solution(self, status: LpStatus, **extra) -> LpSolution:
        x = self.x[: self.n].copy()
        value = float(self.lp.objective @ x) if status is not LpStatus.INFEASIBLE else float("nan")
        return LpSolution(
            status=status,
            objective_value=value,
            x=x,
            active_trust_bounds=count_active_trust_bounds(self.lp, x),
            pivots=self.pivots,
            phase1_pivots=self.phase1_pivots,
            **extra,
        )

    def run(self) -> LpSolution:
        lp, n, m, k = self.lp, self.n, self.m, self.num_art

        if self.empty_violation is not None:
            return self._solution(LpStatus.INFEASIBLE, infeasible_row=self.empty_violation)

        if k:
            logger.debug("phase 1: %d artificial columns over %d rows", k, m)
            phase1_cost = np.zeros(n + m + k)
            phase1_cost[n + m:] = 1.0
            status = self._iterate(phase1_cost, phase=1)
            self._refactor()
            if status is LpStatus.ITER_LIMIT:
                return self._solution(status)
            arts = self.x[n + m:]
            infeas = float(arts.sum())
            if infeas > self.cfg.feasibility_tol * (1.0 + float(np.max(np.abs(self.b)))):
                worst = int(self.art_rows[int(np.argmax(arts))])
                row = int(self.row_map[worst])
                logger.debug("phase 1 ended infeasible (sum %.3g, row %d)", infeas, row)
                return self._solution(LpStatus.INFEASIBLE, infeasible_row=row)
            self.upper[n + m:] = 0.0
            logger.debug("phase 1 feasible after %d pivots", self.phase1_pivots)
        else:
            logger.debug("phase 1 skipped: starting point is feasible")

        status = self._iterate(self.cost, phase=2)
        if status is LpStatus.UNBOUNDED:
            logger.debug("phase 2 unbounded after %d pivots", self.pivots)
            return self._solution(status, ray=self.ray)
        self._refactor()
        logger.debug("phase 2 %s after %d pivots (%d in phase 1)", status.value, self.pivots, self.phase1_pivots)
        return self._solution(status)


def solve(lp: LpProblem, cfg: SolverConfig | None = None, x0: np.ndarray | None = None) -> LpSolution:
    """
    Solve `lp`. Deterministic: identical inputs give identical outputs.

    :param lp: Problem in row form with variable bounds.
    :param cfg: Tolerances, pivot budget and anti-cycling switches.
    :param x0: Optional starting point; it is clipped into the variable bounds.
    """
    return _BoundedSimplex(lp, cfg or SolverConfig(), x0).run()
