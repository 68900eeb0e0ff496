"""
model.py — Pair-form single-hidden-layer network, activations and losses.

The network is Σ_j σ(a_jᵀt) − Σ_j σ(b_jᵀt) with n "plus" rows a_j and n "minus"
rows b_j. Output coefficients are absorbed by positive homogeneity of σ, and
there is no bias term (an intercept is available as an appended constant
feature, see Dataset.with_bias).

Flatten order of the decision vector w ∈ R^{2nd}: a_1..a_n then b_1..b_n,
each row-major. dc_core.Subgradient and the LP weight block use the same order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dataset import Dataset

DEFAULT_LEAKY_ALPHA = 0.01


# ---------------------------------------------------------------------------
# Activation / norm
# ---------------------------------------------------------------------------

class ActivationKind(str, enum.Enum):
    RELU = "relu"
    LEAKY = "leaky"


@dataclass(frozen=True)
class Activation:
    kind: ActivationKind = ActivationKind.RELU
    alpha: float = DEFAULT_LEAKY_ALPHA

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ActivationKind(self.kind))
        # alpha = 0 is accepted so LeakyReLU can be compared with ReLU exactly.
        if self.kind is ActivationKind.LEAKY and not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"leaky alpha must lie in [0, 1), got {self.alpha}")

    @classmethod
    def relu(cls) -> "Activation":
        return cls(ActivationKind.RELU)

    @classmethod
    def leaky(cls, alpha: float = DEFAULT_LEAKY_ALPHA) -> "Activation":
        return cls(ActivationKind.LEAKY, float(alpha))

    @property
    def slope(self) -> float:
        """Slope of the left branch: 0 for ReLU, alpha for LeakyReLU."""
        return self.alpha if self.kind is ActivationKind.LEAKY else 0.0

    @property
    def label(self) -> str:
        if self.kind is ActivationKind.LEAKY:
            return f"leaky:{self.alpha:g}"
        return "relu"


class Norm(str, enum.Enum):
    UNIFORM = "uniform"
    MANHATTAN = "l1"


def activate(act: Activation, x):
    """ReLU: max(0, x). LeakyReLU: max(alpha*x, x). Works on scalars and arrays."""
    if act.kind is ActivationKind.LEAKY:
        return np.maximum(act.alpha * x, x)
    return np.maximum(0.0, x)


def activate_slope(act: Activation, x) -> np.ndarray:
    """Branch slope used by every subgradient here: 1 where x > 0, else the left slope."""
    return np.where(np.asarray(x) > 0.0, 1.0, act.slope)


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Weights:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self) -> None:
        A = np.array(self.A, dtype=float, copy=True)
        B = np.array(self.B, dtype=float, copy=True)
        if A.ndim != 2 or A.shape != B.shape:
            raise ValueError(f"A and B must be matching n x d matrices, got {A.shape} and {B.shape}")
        if A.shape[0] < 1 or A.shape[1] < 1:
            raise ValueError("weights need n >= 1 pairs and d >= 1")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("weights must be finite")
        A.flags.writeable = False
        B.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return int(self.A.shape[0])

    @property
    def d(self) -> int:
        return int(self.A.shape[1])

    @property
    def size(self) -> int:
        return 2 * self.n * self.d

    @classmethod
    def zeros(cls, n: int, d: int) -> "Weights":
        return cls(np.zeros((n, d)), np.zeros((n, d)))

    @classmethod
    def from_flat(cls, vec, n: int, d: int) -> "Weights":
        vec = np.asarray(vec, dtype=float).reshape(-1)
        if vec.shape[0] != 2 * n * d:
            raise ValueError(f"flat weight vector has length {vec.shape[0]}, expected {2 * n * d}")
        return cls(vec[: n * d].reshape(n, d), vec[n * d:].reshape(n, d))

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.A.ravel(), self.B.ravel()])

    def scaled(self, factor: float) -> "Weights":
        return Weights(self.A * factor, self.B * factor)


def random_weights(n: int, d: int, scale: float, rng: np.random.Generator) -> Weights:
    """Entries iid uniform on [-scale, scale]; A is drawn before B."""
    A = rng.uniform(-scale, scale, size=(n, d))
    B = rng.uniform(-scale, scale, size=(n, d))
    return Weights(A, B)


# ---------------------------------------------------------------------------
# Forward pass and losses
# ---------------------------------------------------------------------------

def _check_dim(w: Weights, d: int) -> None:
    if w.d != d:
        raise ValueError(f"dimension mismatch: weights have d={w.d}, data has d={d}")


def forward_batch(w: Weights, act: Activation, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _check_dim(w, X.shape[1])
    plus = activate(act, X @ w.A.T).sum(axis=1)
    minus = activate(act, X @ w.B.T).sum(axis=1)
    return plus - minus


def forward(w: Weights, act: Activation, t) -> float:
    t = np.asarray(t, dtype=float).reshape(-1)
    _check_dim(w, t.shape[0])
    return float(forward_batch(w, act, t[None, :])[0])


def residuals(w: Weights, act: Activation, data: Dataset) -> np.ndarray:
    """f(T_i) - network(T_i) for every sample, in sample order."""
    return data.targets - forward_batch(w, act, data.features)


def loss(w: Weights, act: Activation, norm: Norm, data: Dataset) -> float:
    """Uniform: max_i |residual_i|. Manhattan: Σ_i |residual_i|."""
    r = np.abs(residuals(w, act, data))
    if Norm(norm) is Norm.UNIFORM:
        return float(np.max(r))
    return float(np.sum(r))


# ---------------------------------------------------------------------------
# Weight file
# ---------------------------------------------------------------------------

def save_weights(path: str | Path, w: Weights, act: Activation) -> None:
    """
    Header `n d activation alpha`, then 2n rows of d values (A rows, then B rows).
    repr() keeps full round-trip precision.
    """
    lines = [f"{w.n} {w.d} {act.kind.value} {act.alpha!r}"]
    for row in np.vstack([w.A, w.B]):
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_weights(path: str | Path) -> tuple[Weights, Activation]:
    path = Path(path)
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty weight file")
    header = lines[0].split()
    if len(header) != 4:
        raise ValueError(f"{path}: header must be 'n d activation alpha', got {lines[0]!r}")
    try:
        n, d = int(header[0]), int(header[1])
        act = Activation(ActivationKind(header[2]), float(header[3]))
        rows = [[float(x) for x in ln.split()] for ln in lines[1:]]
    except ValueError as exc:
        raise ValueError(f"{path}: malformed weight file: {exc}") from exc
    if len(rows) != 2 * n or any(len(r) != d for r in rows):
        raise ValueError(f"{path}: expected {2 * n} rows of {d} values")
    table = np.asarray(rows, dtype=float)
    return Weights(table[:n], table[n:]), act
