"""
baseline.py — Full-batch subgradient training with Adam / Adamax.

The comparison runs train the same pair-form network on the same loss by
plain first-order updates: Adamax for the uniform loss, Adam for L1.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dataset import Dataset
from model import Activation, Norm, Weights, activate_slope, forward_batch, loss, random_weights

logger = logging.getLogger(__name__)

DEFAULT_STEP_SIZES = {"adam": 0.001, "adamax": 0.002}


class OptimizerKind(str, enum.Enum):
    ADAM = "adam"
    ADAMAX = "adamax"


def default_optimizer(norm: Norm) -> OptimizerKind:
    return OptimizerKind.ADAMAX if Norm(norm) is Norm.UNIFORM else OptimizerKind.ADAM


@dataclass(frozen=True)
class BaselineConfig:
    optimizer: OptimizerKind = OptimizerKind.ADAMAX
    step_size: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_epochs: int = 5000
    seed: int = 0
    init_scale: float = 0.5

    def __post_init__(self) -> None:
        kind = OptimizerKind(self.optimizer)
        object.__setattr__(self, "optimizer", kind)
        if self.step_size is None:
            object.__setattr__(self, "step_size", DEFAULT_STEP_SIZES[kind.value])
        if not self.step_size > 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.max_epochs < 0:
            raise ValueError(f"max_epochs must be >= 0, got {self.max_epochs}")


# ---------------------------------------------------------------------------
# Optimizers (flat parameter vectors)
# ---------------------------------------------------------------------------

class Adam:
    def __init__(self, size: int, step_size: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.step_size = step_size
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(size)
        self.v = np.zeros(size)

    def step(self, grad: np.ndarray) -> np.ndarray:
        """Return the update to subtract from the parameters."""
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return self.step_size * m_hat / (np.sqrt(v_hat) + self.eps)


class Adamax:
    """Infinity-norm Adam; 0/0 in m/u counts as 0."""

    def __init__(self, size: int, step_size: float = 2e-3, beta1: float = 0.9, beta2: float = 0.999) -> None:
        self.step_size = step_size
        self.beta1 = beta1
        self.beta2 = beta2
        self.t = 0
        self.m = np.zeros(size)
        self.u = np.zeros(size)

    def step(self, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.u = np.maximum(self.beta2 * self.u, np.abs(grad))
        denom = self.u * (1 - self.beta1**self.t)
        # Kept as one quotient so the first step is exactly step_size * sign(grad).
        ratio = np.divide(self.m, denom, out=np.zeros_like(self.m), where=denom != 0.0)
        return self.step_size * ratio


def make_optimizer(cfg: BaselineConfig, size: int) -> Adam | Adamax:
    if cfg.optimizer is OptimizerKind.ADAM:
        return Adam(size, cfg.step_size, cfg.beta1, cfg.beta2, cfg.epsilon)
    return Adamax(size, cfg.step_size, cfg.beta1, cfg.beta2)


# ---------------------------------------------------------------------------
# Loss subgradient
# ---------------------------------------------------------------------------

def loss_subgradient(w: Weights, act: Activation, norm: Norm, data: Dataset) -> np.ndarray:
    """
    Subgradient of the loss in Weights flatten order.

    Uniform uses the lowest-index sample attaining the max residual. Branch
    slopes follow activate_slope, so a kink contributes its left branch.
    """
    X = data.features
    r = data.targets - forward_batch(w, act, X)
    slope_a = activate_slope(act, X @ w.A.T)
    slope_b = activate_slope(act, X @ w.B.T)
    if Norm(norm) is Norm.UNIFORM:
        i = int(np.argmax(np.abs(r)))
        weight = np.zeros(data.N)
        weight[i] = np.sign(r[i])
    else:
        weight = np.sign(r)
    # d|r_i|/d a_j = -sign(r_i) σ'(a_jᵀT_i) T_i,  d|r_i|/d b_j = +sign(r_i) σ'(b_jᵀT_i) T_i
    grad_a = -(weight[:, None] * slope_a).T @ X
    grad_b = (weight[:, None] * slope_b).T @ X
    return np.concatenate([grad_a.ravel(), grad_b.ravel()])


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class BaselineResult:
    final_weights: Weights
    final_loss: float
    loss_curve: list[float] = field(default_factory=list)
    best_epoch: int = 0

    def write_curve_csv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("epoch", "loss"))
            for epoch, value in enumerate(self.loss_curve):
                writer.writerow([epoch, repr(value)])


def train_baseline(
    data: Dataset,
    n: int,
    act: Activation,
    norm: Norm,
    cfg: BaselineConfig,
    init: Weights | None = None,
) -> BaselineResult:
    """
    Full-batch training for cfg.max_epochs updates. loss_curve[e] is the loss
    after e updates; the returned weights are the best seen.
    """
    if n < 1:
        raise ValueError(f"need at least one pair, got n={n}")
    norm = Norm(norm)
    if init is None:
        init = random_weights(n, data.d, cfg.init_scale, np.random.default_rng(cfg.seed))
    if init.n != n or init.d != data.d:
        raise ValueError(f"initial weights are {init.n}x{init.d}, expected {n}x{data.d}")

    w = init.flatten()
    opt = make_optimizer(cfg, w.shape[0])
    current = init
    value = loss(current, act, norm, data)
    curve = [value]
    best_w, best_loss, best_epoch = current, value, 0

    for epoch in range(1, cfg.max_epochs + 1):
        grad = loss_subgradient(current, act, norm, data)
        w = w - opt.step(grad)
        current = Weights.from_flat(w, n, data.d)
        value = loss(current, act, norm, data)
        curve.append(value)
        if value < best_loss:
            best_w, best_loss, best_epoch = current, value, epoch

    logger.info(
        "%s baseline: %s %s n=%d, %d epochs, best loss %.10g at epoch %d",
        cfg.optimizer.value, norm.value, act.label, n, cfg.max_epochs, best_loss, best_epoch,
    )
    return BaselineResult(final_weights=best_w, final_loss=best_loss, loss_curve=curve, best_epoch=best_epoch)
