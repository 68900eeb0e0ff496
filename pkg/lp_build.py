"""
lp_build.py — Exact linear programs for DCA step 2.

Step 2 minimises the convex surrogate g(w) − yᵀw. σ is a max of affine
pieces, so every σ(a_jᵀT_i) becomes an epigraph variable z⁺_ij bounded below
by its pieces, and the surrogate becomes an LP.

Variable layout (num_vars = 2dn + K + 2Nn):

    [ w (2dn, |w_c| ≤ trust_radius) | z block (K) | z⁺_ij (Nn) | z⁻_ij (Nn) ]

    Uniform   K = 1:  the epigraph variable ẑ = z − H(w), H = Σ_i h_i.
        f_i + Σ_j z⁻_ij − Σ_j z⁺_ij − yᵀw ≤ ẑ
        Σ_j z⁺_ij − Σ_j z⁻_ij − f_i − yᵀw ≤ ẑ
        minimise ẑ + Σ_ij (z⁺_ij + z⁻_ij)
    Manhattan K = N:  one epigraph variable per sample.
        f_i + 2 Σ_j z⁻_ij ≤ z_i
        2 Σ_j z⁺_ij − f_i ≤ z_i
        minimise Σ_i z_i − yᵀw

    Piece rows, ordered by (i, j, sign):
        z⁺_ij ≥ a_jᵀT_i              (ReLU keeps z⁺_ij ≥ 0 as a variable bound)
        z⁺_ij ≥ alpha · a_jᵀT_i      (LeakyReLU only, z⁺_ij otherwise free)

No epigraph variable carries a negative net cost, so at an optimum each can
be lowered to its bound; the LP value is min over the trust box of
g(w) − yᵀw. The uniform rows subtract h_i and the objective adds it back,
which keeps each row at 2dn + 1 + 2n entries instead of coupling every z.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from dataset import Dataset
from dc_core import Subgradient
from model import Activation, ActivationKind, Norm, Weights, activate

LE, GE, EQ = "<=", ">=", "="
RELATIONS = (LE, GE, EQ)
DEFAULT_TRUST_RADIUS = 1e3


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    UNBOUNDED = "Unbounded"
    INFEASIBLE = "Infeasible"
    ITER_LIMIT = "IterLimit"


# ---------------------------------------------------------------------------
# Problem / solution containers
# ---------------------------------------------------------------------------

@dataclass
class LpProblem:
    """
    minimise objectiveᵀx  s.t.  matrix[r]·x  (relations[r])  rhs[r],  lower ≤ x ≤ upper.
    `matrix` is stored sparse (CSR); bounds may be ±inf.
    """

    objective: np.ndarray
    matrix: sp.csr_matrix
    relations: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    var_names: list[str] | None = None
    row_names: list[str] | None = None
    trust_columns: slice | None = None
    trust_radius: float | None = None

    def __post_init__(self) -> None:
        self.objective = np.asarray(self.objective, dtype=float).reshape(-1)
        self.matrix = sp.csr_matrix(self.matrix, dtype=float)
        self.relations = np.asarray(self.relations, dtype=object).reshape(-1)
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        self.lower = np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.asarray(self.upper, dtype=float).reshape(-1)
        m, n = self.matrix.shape
        if self.objective.shape[0] != n:
            raise ValueError(f"objective has {self.objective.shape[0]} entries, rows have width {n}")
        if self.lower.shape[0] != n or self.upper.shape[0] != n:
            raise ValueError("bound vectors must have num_vars entries")
        if self.rhs.shape[0] != m or self.relations.shape[0] != m:
            raise ValueError("rhs and relations must have one entry per row")
        bad = [r for r in self.relations if r not in RELATIONS]
        if bad:
            raise ValueError(f"unknown row relation {bad[0]!r}")
        if np.any(self.lower > self.upper):
            j = int(np.flatnonzero(self.lower > self.upper)[0])
            raise ValueError(f"variable {j}: lower bound {self.lower[j]} exceeds upper {self.upper[j]}")

    @property
    def num_vars(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def num_rows(self) -> int:
        return int(self.matrix.shape[0])

    @classmethod
    def from_rows(
        cls,
        objective: Sequence[float],
        rows: Iterable[tuple[Sequence, str, float]],
        lower: Sequence[float] | None = None,
        upper: Sequence[float] | None = None,
    ) -> "LpProblem":
        """
        Build from explicit rows. Each row is (coefficients, relation, rhs) where
        coefficients is a dense vector or a list of (column, value) pairs.
        """
        objective = np.asarray(objective, dtype=float)
        n = objective.shape[0]
        data, row_idx, col_idx, relations, rhs = [], [], [], [], []
        for r, (coefs, relation, value) in enumerate(rows):
            pairs = coefs if _is_pairs(coefs) else list(enumerate(coefs))
            for c, v in pairs:
                if v != 0.0:
                    row_idx.append(r)
                    col_idx.append(int(c))
                    data.append(float(v))
            relations.append(relation)
            rhs.append(float(value))
        matrix = sp.csr_matrix((data, (row_idx, col_idx)), shape=(len(rhs), n))
        lower = np.full(n, -np.inf) if lower is None else lower
        upper = np.full(n, np.inf) if upper is None else upper
        return cls(objective, matrix, np.array(relations, dtype=object), np.array(rhs), lower, upper)

    def iter_rows(self) -> Iterator[tuple[list[tuple[int, float]], str, float]]:
        for r in range(self.num_rows):
            start, end = self.matrix.indptr[r], self.matrix.indptr[r + 1]
            pairs = list(zip(self.matrix.indices[start:end].tolist(), self.matrix.data[start:end].tolist()))
            yield pairs, str(self.relations[r]), float(self.rhs[r])


def _is_pairs(coefs) -> bool:
    return len(coefs) > 0 and isinstance(coefs[0], (tuple, list))


@dataclass
class LpSolution:
    status: LpStatus
    objective_value: float
    x: np.ndarray
    active_trust_bounds: int = 0
    pivots: int = 0
    phase1_pivots: int = 0
    ray: np.ndarray | None = None
    infeasible_row: int | None = None
    notes: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Step-2 builder
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Step2Layout:
    n: int
    d: int
    N: int
    k: int

    @property
    def w_size(self) -> int:
        return 2 * self.n * self.d

    @property
    def z_offset(self) -> int:
        return self.w_size

    @property
    def plus_offset(self) -> int:
        return self.w_size + self.k

    @property
    def minus_offset(self) -> int:
        return self.plus_offset + self.N * self.n

    @property
    def num_vars(self) -> int:
        return self.minus_offset + self.N * self.n


def step2_layout(n: int, d: int, N: int, norm: Norm) -> Step2Layout:
    k = 1 if Norm(norm) is Norm.UNIFORM else N
    return Step2Layout(n=n, d=d, N=N, k=k)


def _epigraph_block(
    layout: Step2Layout, y: np.ndarray, norm: Norm, f: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """COO triplets and rhs for the 2N epigraph rows (row 2i: lower family, 2i+1: upper)."""
    N, n = layout.N, layout.n
    i = np.arange(N)
    j = np.arange(n)
    zp = layout.plus_offset + i[:, None] * n + j[None, :]
    zm = layout.minus_offset + i[:, None] * n + j[None, :]
    lo_rows = np.repeat(2 * i, n)
    hi_rows = np.repeat(2 * i + 1, n)

    rows, cols, vals = [], [], []
    if Norm(norm) is Norm.UNIFORM:
        z_cols = np.full(N, layout.z_offset)
        own = [(lo_rows, zm.ravel(), 1.0), (lo_rows, zp.ravel(), -1.0),
               (hi_rows, zp.ravel(), 1.0), (hi_rows, zm.ravel(), -1.0)]
        nz = np.flatnonzero(y)
        epi_rows = np.arange(2 * N)
        rows.append(np.repeat(epi_rows, nz.size))
        cols.append(np.tile(nz, 2 * N))
        vals.append(np.tile(-y[nz], 2 * N))
    else:
        z_cols = layout.z_offset + i
        own = [(lo_rows, zm.ravel(), 2.0), (hi_rows, zp.ravel(), 2.0)]

    for r, c, v in own:
        rows.append(r)
        cols.append(c)
        vals.append(np.full(r.shape[0], v))
    for fam in (0, 1):
        rows.append(2 * i + fam)
        cols.append(z_cols)
        vals.append(np.full(N, -1.0))

    rhs = np.empty(2 * N)
    rhs[0::2] = -f
    rhs[1::2] = f
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), rhs


def _piece_block(
    layout: Step2Layout, act: Activation, X: np.ndarray, row_start: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """COO triplets for the z ≥ piece rows, ordered by (i, j, sign, piece)."""
    N, n, d = layout.N, layout.n, layout.d
    scales = np.array([1.0]) if act.kind is ActivationKind.RELU else np.array([1.0, act.alpha])
    kb = scales.shape[0]
    i, j, s, t = np.meshgrid(np.arange(N), np.arange(n), np.arange(2), np.arange(kb), indexing="ij")
    i, j, s, t = i.ravel(), j.ravel(), s.ravel(), t.ravel()
    row = row_start + np.arange(i.shape[0])

    zcol = np.where(s == 0, layout.plus_offset, layout.minus_offset) + i * n + j
    k = np.arange(d)
    wcol = (s * n * d + j * d)[:, None] + k[None, :]
    wval = -scales[t][:, None] * X[i]
    mask = wval != 0.0

    rows = np.concatenate([row, np.broadcast_to(row[:, None], wval.shape)[mask]])
    cols = np.concatenate([zcol, wcol[mask]])
    vals = np.concatenate([np.ones(row.shape[0]), wval[mask]])
    return rows, cols, vals, int(row.shape[0])


def build_step2_lp(
    w_k: Weights,
    y: Subgradient,
    act: Activation,
    norm: Norm,
    data: Dataset,
    trust_radius: float = DEFAULT_TRUST_RADIUS,
    with_names: bool = True,
) -> LpProblem:
    """
    LP whose optimum is min over |w_c| ≤ trust_radius of g(w) − yᵀw.
    Only the shape of w_k is used; its values do not enter the LP data.
    """
    norm = Norm(norm)
    n, d, N = w_k.n, w_k.d, data.N
    if data.d != d:
        raise ValueError(f"dimension mismatch: weights have d={d}, data has d={data.d}")
    y_vec = np.asarray(y.y, dtype=float).reshape(-1)
    if y_vec.shape[0] != 2 * n * d:
        raise ValueError(f"subgradient has length {y_vec.shape[0]}, expected {2 * n * d}")
    if not trust_radius > 0:
        raise ValueError(f"trust_radius must be positive, got {trust_radius}")

    layout = step2_layout(n, d, N, norm)
    X, f = data.features, data.targets

    e_rows, e_cols, e_vals, e_rhs = _epigraph_block(layout, y_vec, norm, f)
    p_rows, p_cols, p_vals, num_piece = _piece_block(layout, act, X, row_start=2 * N)
    num_rows = 2 * N + num_piece

    matrix = sp.csr_matrix(
        (np.concatenate([e_vals, p_vals]), (np.concatenate([e_rows, p_rows]), np.concatenate([e_cols, p_cols]))),
        shape=(num_rows, layout.num_vars),
    )
    relations = np.array([LE] * (2 * N) + [GE] * num_piece, dtype=object)
    rhs = np.concatenate([e_rhs, np.zeros(num_piece)])

    objective = np.zeros(layout.num_vars)
    if norm is Norm.UNIFORM:
        objective[layout.z_offset] = 1.0
        objective[layout.plus_offset:] = 1.0
    else:
        objective[layout.z_offset:layout.plus_offset] = 1.0
        objective[: layout.w_size] = -y_vec

    lower = np.full(layout.num_vars, -np.inf)
    upper = np.full(layout.num_vars, np.inf)
    lower[: layout.w_size] = -trust_radius
    upper[: layout.w_size] = trust_radius
    if act.kind is ActivationKind.RELU:
        lower[layout.plus_offset:] = 0.0

    lp = LpProblem(
        objective, matrix, relations, rhs, lower, upper,
        trust_columns=slice(0, layout.w_size), trust_radius=float(trust_radius),
    )
    if with_names:
        lp.var_names = _var_names(layout, norm)
        lp.row_names = _row_names(layout, act)
    return lp


def _var_names(layout: Step2Layout, norm: Norm) -> list[str]:
    n, d, N = layout.n, layout.d, layout.N
    names = [f"a{j}_{k}" for j in range(n) for k in range(d)]
    names += [f"b{j}_{k}" for j in range(n) for k in range(d)]
    names += ["z"] if norm is Norm.UNIFORM else [f"z{i}" for i in range(N)]
    names += [f"zp{i}_{j}" for i in range(N) for j in range(n)]
    names += [f"zm{i}_{j}" for i in range(N) for j in range(n)]
    return names


def _row_names(layout: Step2Layout, act: Activation) -> list[str]:
    pieces = ["id"] if act.kind is ActivationKind.RELU else ["id", "alpha"]
    names = []
    for i in range(layout.N):
        names += [f"epi{i}_lo", f"epi{i}_hi"]
    for i in range(layout.N):
        for j in range(layout.n):
            for sign in ("p", "m"):
                names += [f"piece{i}_{j}{sign}_{piece}" for piece in pieces]
    return names


def substitution_point(
    w: Weights, y: Subgradient, act: Activation, norm: Norm, data: Dataset
) -> np.ndarray:
    """
    Feasible LP point for weights w: z⁺_ij = σ(a_jᵀT_i), z⁻_ij = σ(b_jᵀT_i) and
    the epigraph block at the smallest feasible value. Its objective is the
    surrogate value at w. Used to warm-start the solver.
    """
    norm = Norm(norm)
    layout = step2_layout(w.n, w.d, data.N, norm)
    X, f = data.features, data.targets
    zp = activate(act, X @ w.A.T)
    zm = activate(act, X @ w.B.T)
    s_a, s_b = zp.sum(axis=1), zm.sum(axis=1)
    w_flat = w.flatten()

    x = np.empty(layout.num_vars)
    x[: layout.w_size] = w_flat
    if norm is Norm.UNIFORM:
        yw = float(y.y @ w_flat)
        x[layout.z_offset] = max(np.max(f + s_b - s_a - yw), np.max(s_a - s_b - f - yw))
    else:
        x[layout.z_offset:layout.plus_offset] = np.maximum(f + 2.0 * s_b, 2.0 * s_a - f)
    x[layout.plus_offset:layout.minus_offset] = zp.ravel()
    x[layout.minus_offset:] = zm.ravel()
    return x


def count_active_trust_bounds(lp: LpProblem, x: np.ndarray, tol: float = 1e-7) -> int:
    if lp.trust_columns is None or lp.trust_radius is None:
        return 0
    w = np.abs(np.asarray(x)[lp.trust_columns])
    return int(np.count_nonzero(w >= lp.trust_radius - tol * max(1.0, lp.trust_radius)))


def extract_weights(sol: LpSolution, n: int, d: int) -> Weights:
    if sol.status is not LpStatus.OPTIMAL:
        raise ValueError(f"cannot read weights from a {sol.status.value} LP solution")
    return Weights.from_flat(sol.x[: 2 * n * d], n, d)


# ---------------------------------------------------------------------------
# Text dump
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def dump_lp(lp: LpProblem, out: str | Path | TextIO) -> None:
    """
    One line per row: `name relation rhs col:coef ...`, preceded by the
    objective line and followed by one `bound` line per variable.
    """
    var_names = lp.var_names or [f"x{c}" for c in range(lp.num_vars)]
    row_names = lp.row_names or [f"r{r}" for r in range(lp.num_rows)]
    buf = io.StringIO()
    obj = " ".join(f"{var_names[c]}:{_fmt(v)}" for c, v in enumerate(lp.objective) if v != 0.0)
    buf.write(f"minimize {obj}\n")
    for r, (pairs, relation, rhs) in enumerate(lp.iter_rows()):
        coefs = " ".join(f"{var_names[c]}:{_fmt(v)}" for c, v in pairs)
        buf.write(f"{row_names[r]} {relation} {_fmt(rhs)} {coefs}\n")
    for c in range(lp.num_vars):
        buf.write(f"bound {var_names[c]} {_fmt(lp.lower[c])} {_fmt(lp.upper[c])}\n")

    if isinstance(out, (str, Path)):
        Path(out).write_text(buf.getvalue(), encoding="utf-8")
    else:
        out.write(buf.getvalue())
