"""
dc_core.py — DC decomposition p = g − h of the training objective.

Per sample i, with S_A = Σ_j σ(a_jᵀT_i) and S_B = Σ_j σ(b_jᵀT_i):

    g_i = max{ f_i + 2 S_B , 2 S_A − f_i }
    h_i = S_A + S_B
    g_i − h_i = |f_i − (S_A − S_B)|

Uniform:   g = max_i { g_i + Σ_{k≠i} h_k },  h = Σ_k h_k
Manhattan: g = Σ_i g_i,                     h = Σ_i h_i

Both activations are convex (max of affine pieces), so every g_i, h_i is
convex in w; the same algebra serves ReLU and LeakyReLU.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dataset import Dataset
from model import Activation, Norm, Weights, activate, activate_slope


@dataclass(frozen=True)
class DcValue:
    g: float
    h: float
    p: float


@dataclass(frozen=True)
class Subgradient:
    """y ∈ ∂h(w), ordered y_1⁺..y_n⁺ then y_1⁻..y_n⁻ (Weights flatten order)."""

    y: np.ndarray
    n: int
    d: int

    @property
    def plus(self) -> np.ndarray:
        return self.y[: self.n * self.d].reshape(self.n, self.d)

    @property
    def minus(self) -> np.ndarray:
        return self.y[self.n * self.d:].reshape(self.n, self.d)


# ---------------------------------------------------------------------------
# Per-sample terms
# ---------------------------------------------------------------------------

def _check(w: Weights, data: Dataset) -> None:
    if w.d != data.d:
        raise ValueError(f"dimension mismatch: weights have d={w.d}, data has d={data.d}")


def _branch_sums(w: Weights, act: Activation, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return activate(act, X @ w.A.T).sum(axis=1), activate(act, X @ w.B.T).sum(axis=1)


def sample_terms(w: Weights, act: Activation, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Vectors (g_i)_i and (h_i)_i over all samples."""
    _check(w, data)
    s_a, s_b = _branch_sums(w, act, data.features)
    f = data.targets
    g_terms = np.maximum(f + 2.0 * s_b, 2.0 * s_a - f)
    h_terms = s_a + s_b
    return g_terms, h_terms


def _row(data: Dataset, i: int) -> tuple[np.ndarray, float]:
    if not 0 <= i < data.N:
        raise IndexError(f"sample index {i} out of range for N={data.N}")
    return data.features[i:i + 1], float(data.targets[i])


def eval_hi(w: Weights, act: Activation, i: int, data: Dataset) -> float:
    _check(w, data)
    X, _ = _row(data, i)
    s_a, s_b = _branch_sums(w, act, X)
    return float(s_a[0] + s_b[0])


def eval_gi(w: Weights, act: Activation, i: int, data: Dataset) -> float:
    _check(w, data)
    X, f = _row(data, i)
    s_a, s_b = _branch_sums(w, act, X)
    return float(max(f + 2.0 * s_b[0], 2.0 * s_a[0] - f))


# ---------------------------------------------------------------------------
# Whole objective
# ---------------------------------------------------------------------------

def combine_terms(g_terms: np.ndarray, h_terms: np.ndarray, norm: Norm) -> DcValue:
    """Assemble g, h, p from per-sample terms (reductions in sample order)."""
    h = float(np.sum(h_terms))
    if Norm(norm) is Norm.UNIFORM:
        # g_i + Σ_{k≠i} h_k = g_i − h_i + H
        g = float(np.max(g_terms - h_terms) + h)
    else:
        g = float(np.sum(g_terms))
    return DcValue(g=g, h=h, p=g - h)


def eval_dc(w: Weights, act: Activation, norm: Norm, data: Dataset) -> DcValue:
    g_terms, h_terms = sample_terms(w, act, data)
    return combine_terms(g_terms, h_terms, norm)


def subgrad_h(w: Weights, act: Activation, norm: Norm, data: Dataset) -> Subgradient:
    """
    y_j⁺ = Σ_{a_jᵀT_i > 0} T_i + slope · Σ_{a_jᵀT_i ≤ 0} T_i, mirrored for y_j⁻.

    h = Σ_i h_i under both norms, so `norm` does not change y. The strict
    inequality puts a_jᵀT_i = 0 on the left branch.
    """
    _check(w, data)
    X = data.features
    y_plus = activate_slope(act, X @ w.A.T).T @ X
    y_minus = activate_slope(act, X @ w.B.T).T @ X
    y = np.concatenate([y_plus.ravel(), y_minus.ravel()])
    return Subgradient(y=y, n=w.n, d=w.d)


def eval_surrogate(w: Weights, y: Subgradient, act: Activation, norm: Norm, data: Dataset) -> float:
    """Convex DCA surrogate g(w) − yᵀw minimised by the step-2 LP."""
    return eval_dc(w, act, norm, data).g - float(y.y @ w.flatten())
