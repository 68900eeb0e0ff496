"""
dca.py — Generic DCA driver.

    repeat:
        y_k     ∈ ∂h(w_k)                        (dc_core.subgrad_h)
        w_{k+1} = argmin g(w) − y_kᵀw  over the trust box   (lp_build + lp_solver)
    until the objective stops decreasing, the iteration cap, or the time budget.

Each LP is warm-started from the substitution point of w_k, which is feasible,
so the simplex never needs its feasibility phase and the LP value can only go
down from the surrogate value at w_k.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from dataset import Dataset
from dc_core import subgrad_h
from lp_build import (
    DEFAULT_TRUST_RADIUS,
    LpSolution,
    LpStatus,
    build_step2_lp,
    extract_weights,
    substitution_point,
)
from lp_solver import SolverConfig, solve
from model import Activation, Norm, Weights, loss, random_weights

logger = logging.getLogger(__name__)

TRACE_HEADER = ("iter", "p", "lp_value", "lp_status", "wall_ms", "active_trust_bounds")


class DcaStatus(str, enum.Enum):
    CONVERGED = "Converged"
    ITER_LIMIT = "IterLimit"
    TIME_BUDGET = "TimeBudget"
    LP_FAILURE = "LpFailure"


@dataclass(frozen=True)
class DcaConfig:
    max_iters: int = 200
    eps_objective: float = 1e-6
    relative_eps: bool = False
    time_budget_secs: float = 1800.0
    trust_radius: float = DEFAULT_TRUST_RADIUS
    seed: int = 0
    init_scale: float = 0.5

    def __post_init__(self) -> None:
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.eps_objective < 0:
            raise ValueError(f"eps_objective must be >= 0, got {self.eps_objective}")
        if not self.time_budget_secs > 0:
            raise ValueError(f"time_budget_secs must be positive, got {self.time_budget_secs}")
        if not self.trust_radius > 0:
            raise ValueError(f"trust_radius must be positive, got {self.trust_radius}")
        if self.init_scale < 0:
            raise ValueError(f"init_scale must be >= 0, got {self.init_scale}")
        if self.init_scale > self.trust_radius:
            raise ValueError("init_scale must not exceed trust_radius")


@dataclass(frozen=True)
class IterRecord:
    iter: int
    p_value: float
    lp_value: float
    lp_status: str
    wall_ms: float
    active_trust_bounds: int


@dataclass
class DcaTrace:
    records: list[IterRecord] = field(default_factory=list)
    status: DcaStatus = DcaStatus.ITER_LIMIT
    best_weights: Weights | None = None
    best_p: float = math.inf
    reason: str = ""

    @property
    def p_values(self) -> list[float]:
        return [r.p_value for r in self.records]

    @property
    def iterations(self) -> int:
        return len(self.records) - 1

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_HEADER)
            for r in self.records:
                writer.writerow([
                    r.iter, repr(r.p_value), repr(r.lp_value), r.lp_status,
                    f"{r.wall_ms:.3f}", r.active_trust_bounds,
                ])


def init_weights(n: int, d: int, cfg: DcaConfig) -> Weights:
    return random_weights(n, d, cfg.init_scale, np.random.default_rng(cfg.seed))


def _stop_threshold(cfg: DcaConfig, p_prev: float) -> float:
    if cfg.relative_eps:
        return cfg.eps_objective * max(1.0, abs(p_prev))
    return cfg.eps_objective


def _solve_step(lp, solver_cfg: SolverConfig, x0: np.ndarray, deadline: float) -> LpSolution:
    """Solve once; on pivot exhaustion (not the clock) retry once with twice the pivots."""
    remaining = max(deadline - time.monotonic(), 1e-3)
    cfg = dataclasses.replace(solver_cfg, time_limit_secs=remaining)
    sol = solve(lp, cfg, x0=x0)
    if sol.status is LpStatus.ITER_LIMIT and time.monotonic() < deadline:
        logger.warning(
            "LP hit its pivot budget (%d); retrying with %d", cfg.max_pivots, 2 * cfg.max_pivots
        )
        remaining = max(deadline - time.monotonic(), 1e-3)
        retry_cfg = dataclasses.replace(cfg, max_pivots=2 * cfg.max_pivots, time_limit_secs=remaining)
        sol = solve(lp, retry_cfg, x0=x0)
        sol.notes.append("retried with doubled pivot budget")
    return sol


def run_dca(
    data: Dataset,
    n: int,
    act: Activation,
    norm: Norm,
    cfg: DcaConfig,
    solver_cfg: SolverConfig | None = None,
    init: Weights | None = None,
    on_iteration: Callable[[IterRecord, Weights], None] | None = None,
) -> DcaTrace:
    """
    Run DCA from `init` (or init_weights(n, d, cfg)). Never raises on LP trouble:
    a non-optimal LP ends the run with status LpFailure and a reason.

    :param on_iteration: Optional callback receiving each accepted iteration's
        record and the weights w_{k+1} it produced.
    """
    if n < 1:
        raise ValueError(f"need at least one pair, got n={n}")
    norm = Norm(norm)
    solver_cfg = solver_cfg or SolverConfig()
    w = init if init is not None else init_weights(n, data.d, cfg)
    if w.n != n or w.d != data.d:
        raise ValueError(f"initial weights are {w.n}x{w.d}, expected {n}x{data.d}")

    started = time.monotonic()
    deadline = started + cfg.time_budget_secs
    p = loss(w, act, norm, data)
    trace = DcaTrace(best_weights=w, best_p=p)
    trace.records.append(IterRecord(0, p, math.nan, "init", 0.0, 0))
    logger.info("DCA start: %s %s n=%d N=%d d=%d p=%.10g", norm.value, act.label, n, data.N, data.d, p)

    trace.status = DcaStatus.ITER_LIMIT
    trace.reason = f"reached max_iters={cfg.max_iters}"
    for k in range(1, cfg.max_iters + 1):
        if time.monotonic() >= deadline:
            trace.status = DcaStatus.TIME_BUDGET
            trace.reason = f"time budget of {cfg.time_budget_secs:g}s exhausted before iteration {k}"
            break

        t0 = time.monotonic()
        y = subgrad_h(w, act, norm, data)
        lp = build_step2_lp(w, y, act, norm, data, trust_radius=cfg.trust_radius, with_names=False)
        sol = _solve_step(lp, solver_cfg, substitution_point(w, y, act, norm, data), deadline)
        wall_ms = (time.monotonic() - t0) * 1000.0

        if sol.status is not LpStatus.OPTIMAL:
            trace.records.append(IterRecord(k, p, sol.objective_value, sol.status.value, wall_ms, 0))
            if sol.status is LpStatus.ITER_LIMIT and time.monotonic() >= deadline:
                trace.status = DcaStatus.TIME_BUDGET
                trace.reason = f"time budget of {cfg.time_budget_secs:g}s exhausted inside iteration {k}"
            else:
                trace.status = DcaStatus.LP_FAILURE
                trace.reason = (
                    f"iteration {k}: LP returned {sol.status.value} after {sol.pivots} pivots"
                    + (f" (row {sol.infeasible_row})" if sol.infeasible_row is not None else "")
                )
                logger.error("DCA stopped: %s", trace.reason)
            break

        w_next = extract_weights(sol, n, data.d)
        p_next = loss(w_next, act, norm, data)
        record = IterRecord(k, p_next, sol.objective_value, sol.status.value, wall_ms, sol.active_trust_bounds)
        trace.records.append(record)
        if on_iteration is not None:
            on_iteration(record, w_next)
        logger.info(
            "DCA iter %d: p=%.10g lp=%.10g pivots=%d (%.1f ms)",
            k, p_next, sol.objective_value, sol.pivots, wall_ms,
        )
        if sol.active_trust_bounds:
            logger.warning(
                "iteration %d: %d weight(s) at the trust bound %g",
                k, sol.active_trust_bounds, cfg.trust_radius,
            )

        decrease = p - p_next
        threshold = _stop_threshold(cfg, p)
        w, p = w_next, p_next
        if p < trace.best_p:
            trace.best_p = p
            trace.best_weights = w
        if decrease <= threshold:
            trace.status = DcaStatus.CONVERGED
            trace.reason = f"objective decrease {decrease:.3g} <= {threshold:.3g}"
            break

    logger.info(
        "DCA done: %s after %d iteration(s), best p=%.10g (%s)",
        trace.status.value, trace.iterations, trace.best_p, trace.reason,
    )
    return trace
