"""
verify.py — Brute-force oracles for tests and acceptance checks.

Nothing here calls model / dc_core / lp_solver code: the loss and the
surrogate are re-derived from their formulas so a shared bug cannot hide.
Only the plain data containers (Dataset, Activation, Norm, LpProblem) are
imported.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from dataset import Dataset
from lp_build import EQ, GE, LE, LpProblem
from model import Activation, ActivationKind, Norm

logger = logging.getLogger(__name__)

MAX_SURROGATE_DIMS = 4
MAX_VERTEX_VARS = 8
MAX_VERTEX_ROWS = 12
MAX_VERTEX_BASES = 2_000_000
_CHUNK = 50_000


@dataclass(frozen=True)
class OracleRecord:
    quantity: str
    oracle: float
    candidate: float
    abs_gap: float
    rel_gap: float

    def line(self) -> str:
        return (
            f"{self.quantity}: oracle={self.oracle:.12g} candidate={self.candidate:.12g} "
            f"abs_gap={self.abs_gap:.3g} rel_gap={self.rel_gap:.3g}"
        )


@dataclass
class OracleReport:
    """Append-only list of oracle comparisons. rel_gap = abs_gap / max(1, |oracle|)."""

    records: list[OracleRecord] = field(default_factory=list)

    def add(self, quantity: str, oracle: float, candidate: float) -> OracleRecord:
        gap = abs(float(oracle) - float(candidate))
        rec = OracleRecord(quantity, float(oracle), float(candidate), gap, gap / max(1.0, abs(float(oracle))))
        self.records.append(rec)
        logger.info("%s", rec.line())
        return rec

    def lines(self) -> list[str]:
        return [r.line() for r in self.records]

    @property
    def worst_abs_gap(self) -> float:
        return max((r.abs_gap for r in self.records), default=0.0)


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def _sigma(act: Activation, x: float) -> float:
    if x > 0:
        return x
    return act.alpha * x if act.kind is ActivationKind.LEAKY else 0.0


def oracle_loss(w, act: Activation, norm: Norm, data: Dataset) -> float:
    """Scalar loops straight from the formula."""
    A, B = np.asarray(w.A, dtype=float), np.asarray(w.B, dtype=float)
    residuals = []
    for i in range(data.N):
        t = [float(v) for v in data.features[i]]
        out = 0.0
        for j in range(A.shape[0]):
            out += _sigma(act, sum(float(A[j, k]) * t[k] for k in range(len(t))))
            out -= _sigma(act, sum(float(B[j, k]) * t[k] for k in range(len(t))))
        residuals.append(abs(float(data.targets[i]) - out))
    if Norm(norm) is Norm.UNIFORM:
        return max(residuals)
    return math.fsum(residuals)


# ---------------------------------------------------------------------------
# Surrogate grid search
# ---------------------------------------------------------------------------

def _surrogate_batch(W: np.ndarray, y: np.ndarray, act: Activation, norm: Norm, X, f, n: int, d: int) -> np.ndarray:
    """g(w) − yᵀw for each row of W (M x 2nd)."""
    M = W.shape[0]
    Wa = W[:, : n * d].reshape(M, n, d)
    Wb = W[:, n * d:].reshape(M, n, d)
    ia = np.einsum("mjk,ik->mij", Wa, X)
    ib = np.einsum("mjk,ik->mij", Wb, X)
    left = act.alpha if act.kind is ActivationKind.LEAKY else 0.0
    s_a = np.where(ia > 0, ia, left * ia).sum(axis=2)
    s_b = np.where(ib > 0, ib, left * ib).sum(axis=2)
    g_i = np.maximum(f[None, :] + 2.0 * s_b, 2.0 * s_a - f[None, :])
    h_i = s_a + s_b
    if Norm(norm) is Norm.UNIFORM:
        g = (g_i - h_i).max(axis=1) + h_i.sum(axis=1)
    else:
        g = g_i.sum(axis=1)
    return g - W @ y


def default_grid_schedule(dims: int) -> tuple[int, int]:
    """(points per dimension, zoom rounds) for a search in `dims` dimensions."""
    if dims <= 2:
        return 201, 8
    if dims == 3:
        return 31, 10
    return 15, 10


def _distinct_best(vals: np.ndarray, pts: np.ndarray, cell: np.ndarray, beam: int) -> np.ndarray:
    """Up to `beam` lowest points, each more than 1.5 cells from the ones kept before it."""
    kept: list[int] = []
    for k in np.argsort(vals, kind="stable"):
        if all(np.max(np.abs(pts[k] - pts[j]) / cell) > 1.5 for j in kept):
            kept.append(int(k))
            if len(kept) == beam:
                break
    return pts[kept]


def _polish(fun, x0: np.ndarray, box: float, scales: tuple[float, ...]) -> float:
    """Powell then Nelder–Mead restarts from the incumbent, one per simplex scale."""
    dims = x0.shape[0]
    bounds = [(-box, box)] * dims
    best_x, best_val = x0, fun(x0)

    def keep(res) -> None:
        nonlocal best_x, best_val
        x = np.clip(res.x, -box, box)
        val = fun(x)
        if val < best_val:
            best_x, best_val = x, val

    keep(minimize(fun, best_x, method="Powell", bounds=bounds, options={"xtol": 1e-10, "ftol": 1e-14, "maxfev": 4_000}))
    for scale in scales:
        step = np.where(best_x + scale <= box, scale, -scale)
        simplex = np.vstack([best_x, best_x + np.diag(step)])
        keep(minimize(
            fun, best_x, method="Nelder-Mead", bounds=bounds,
            options={"initial_simplex": simplex, "xatol": 1e-11, "fatol": 1e-14, "maxfev": 4_000, "adaptive": True},
        ))
    return best_val


def oracle_min_surrogate(
    y,
    act: Activation,
    norm: Norm,
    tiny_data: Dataset,
    box: float,
    points: int | None = None,
    rounds: int | None = None,
    zoom: float = 4.0,
    beam: int = 4,
    polish: bool = True,
) -> float:
    """
    Minimum of g(w) − yᵀw over |w_c| ≤ box.

    Nested grid search that keeps the `beam` best well-separated points of
    each round and zooms a window around each of them, followed by a
    bounded Powell / Nelder–Mead polish of the survivors. Every returned
    value is the surrogate at an actual point of the box, so the result
    never undershoots the true minimum.

    :param y: Subgradient object or flat vector of length 2nd.
    :param box: Half-width of the search box.
    """
    y = np.asarray(getattr(y, "y", y), dtype=float).reshape(-1)
    d = tiny_data.d
    dims = y.shape[0]
    if dims % (2 * d) != 0:
        raise ValueError(f"subgradient length {dims} is not a multiple of 2d={2 * d}")
    if dims > MAX_SURROGATE_DIMS:
        raise ValueError(f"grid search supports at most {MAX_SURROGATE_DIMS} weights, got {dims}")
    if not box > 0:
        raise ValueError("box must be positive")
    if beam < 1:
        raise ValueError("beam must be at least 1")
    n = dims // (2 * d)
    default_points, default_rounds = default_grid_schedule(dims)
    points = points or default_points
    rounds = default_rounds if rounds is None else rounds
    X, f = tiny_data.features, tiny_data.targets
    box = float(box)

    def fun(v: np.ndarray) -> float:
        return float(_surrogate_batch(np.asarray(v, dtype=float)[None, :], y, act, norm, X, f, n, d)[0])

    width = np.full(dims, 2.0 * box)
    windows = [np.full(dims, -box)]
    best_val, best_w = math.inf, np.zeros(dims)
    survivors = np.zeros((0, dims))
    for _ in range(rounds + 1):
        cell = width / (points - 1)
        cand_vals, cand_pts = [], []
        for lo in windows:
            axes = [np.linspace(lo[c], lo[c] + width[c], points) for c in range(dims)]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dims)
            for start in range(0, grid.shape[0], _CHUNK):
                chunk = grid[start:start + _CHUNK]
                vals = _surrogate_batch(chunk, y, act, norm, X, f, n, d)
                top = np.argsort(vals, kind="stable")[: 4 * beam]
                cand_vals.append(vals[top])
                cand_pts.append(chunk[top])
        vals, pts = np.concatenate(cand_vals), np.concatenate(cand_pts)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_w = float(vals[k]), pts[k].copy()
        survivors = _distinct_best(vals, pts, cell, beam)

        half = np.maximum(width / (2.0 * zoom), 2.0 * cell)
        width = np.minimum(2.0 * half, 2.0 * box)
        # re-centre on each survivor, sliding the window back inside the box
        windows = [np.clip(s - width / 2.0, -box, box - width) for s in survivors]

    if polish:
        scales = tuple(box * 10.0 ** -e for e in range(1, 5))
        for start in np.vstack([best_w[None, :], survivors[:2]]):
            best_val = min(best_val, _polish(fun, start, box, scales))
    logger.debug("surrogate grid minimum %.12g after %d rounds", best_val, rounds)
    return best_val


# ---------------------------------------------------------------------------
# Vertex enumeration
# ---------------------------------------------------------------------------

def _hyperplanes(lp: LpProblem) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(normals, offsets, is_equality) for every row and every finite bound."""
    dense = lp.matrix.toarray()
    normals, offsets, equal = [], [], []
    for r in range(lp.num_rows):
        if not np.any(dense[r]):
            continue
        normals.append(dense[r])
        offsets.append(lp.rhs[r])
        equal.append(lp.relations[r] == EQ)
    eye = np.eye(lp.num_vars)
    for c in range(lp.num_vars):
        fixed = lp.lower[c] == lp.upper[c]
        for bound in (lp.lower[c],) if fixed else (lp.lower[c], lp.upper[c]):
            if np.isfinite(bound):
                normals.append(eye[c])
                offsets.append(bound)
                equal.append(fixed)
    return np.asarray(normals), np.asarray(offsets, dtype=float), np.asarray(equal, dtype=bool)


def _feasible(lp: LpProblem, pts: np.ndarray, tol: float) -> np.ndarray:
    act = pts @ lp.matrix.toarray().T
    ok = np.ones(pts.shape[0], dtype=bool)
    for r in range(lp.num_rows):
        scale = tol * (1.0 + abs(lp.rhs[r]))
        rel = lp.relations[r]
        if rel == LE:
            ok &= act[:, r] <= lp.rhs[r] + scale
        elif rel == GE:
            ok &= act[:, r] >= lp.rhs[r] - scale
        else:
            ok &= np.abs(act[:, r] - lp.rhs[r]) <= scale
    ok &= np.all(pts >= lp.lower - tol * (1.0 + np.abs(np.nan_to_num(lp.lower, posinf=0, neginf=0))), axis=1)
    ok &= np.all(pts <= lp.upper + tol * (1.0 + np.abs(np.nan_to_num(lp.upper, posinf=0, neginf=0))), axis=1)
    return ok


def vertex_hyperplane_count(lp: LpProblem) -> int:
    """Rows plus finite bounds; a fixed variable counts once."""
    finite_lo = np.isfinite(lp.lower)
    finite_hi = np.isfinite(lp.upper)
    fixed = finite_lo & (lp.lower == lp.upper)
    return int(lp.num_rows + finite_lo.sum() + finite_hi.sum() - fixed.sum())


def vertex_oracle_applies(lp: LpProblem) -> bool:
    return lp.num_vars <= MAX_VERTEX_VARS and vertex_hyperplane_count(lp) <= MAX_VERTEX_ROWS


def oracle_vertex_lp(lp: LpProblem, tol: float = 1e-7) -> float:
    """
    Exact optimum of a bounded LP by enumerating basic points: every choice
    of num_vars linearly independent hyperplanes (rows and finite bounds,
    equalities always included) is solved and kept if feasible.
    Returns +inf when no feasible vertex exists.
    """
    nv = lp.num_vars
    if not vertex_oracle_applies(lp):
        raise ValueError(
            f"vertex enumeration is capped at {MAX_VERTEX_VARS} variables and {MAX_VERTEX_ROWS} rows plus bounds, "
            f"got {nv} and {vertex_hyperplane_count(lp)}"
        )
    normals, offsets, equal = _hyperplanes(lp)
    # dependent equalities are still checked by _feasible
    forced_list: list[int] = []
    for e in np.flatnonzero(equal):
        if np.linalg.matrix_rank(normals[forced_list + [int(e)]]) > len(forced_list):
            forced_list.append(int(e))
    forced = np.asarray(forced_list, dtype=int)
    optional = np.flatnonzero(~equal)
    free_slots = nv - forced.shape[0]
    if math.comb(optional.shape[0], free_slots) > MAX_VERTEX_BASES:
        raise ValueError("too many candidate bases for vertex enumeration")

    combos = np.array(list(itertools.combinations(optional, free_slots)), dtype=int)
    if free_slots == 0 or combos.size == 0:
        combos = combos.reshape(len(combos), free_slots)
    if combos.shape[0] == 0:
        return math.inf
    idx = np.hstack([np.broadcast_to(forced, (combos.shape[0], forced.shape[0])), combos])
    mats = normals[idx]
    rhs = offsets[idx]
    dets = np.linalg.det(mats)
    scale = np.prod(np.maximum(np.linalg.norm(mats, axis=2), 1e-300), axis=1)
    regular = np.abs(dets) > 1e-10 * scale
    if not regular.any():
        return math.inf
    pts = np.linalg.solve(mats[regular], rhs[regular][..., None])[..., 0]
    pts = pts[_feasible(lp, pts, tol)]
    if pts.shape[0] == 0:
        return math.inf
    return float(np.min(pts @ lp.objective))
