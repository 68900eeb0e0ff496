import csv

import numpy as np
import pytest

from baseline import (
    Adam,
    Adamax,
    BaselineConfig,
    OptimizerKind,
    default_optimizer,
    loss_subgradient,
    make_optimizer,
    train_baseline,
)
from dataset import Dataset, GridSpec, make_grid, phi1
from model import Activation, Norm, Weights, loss, random_weights, residuals


def test_defaults_follow_the_loss():
    assert default_optimizer(Norm.UNIFORM) is OptimizerKind.ADAMAX
    assert default_optimizer(Norm.MANHATTAN) is OptimizerKind.ADAM
    assert BaselineConfig(optimizer="adam").step_size == 0.001
    assert BaselineConfig(optimizer="adamax").step_size == 0.002
    assert BaselineConfig(optimizer="adam", step_size=0.05).step_size == 0.05
    assert isinstance(make_optimizer(BaselineConfig(optimizer="adam"), 3), Adam)


def test_config_validation():
    with pytest.raises(ValueError):
        BaselineConfig(step_size=0.0)
    with pytest.raises(ValueError):
        BaselineConfig(beta1=1.0)
    with pytest.raises(ValueError):
        BaselineConfig(optimizer="sgd")


def test_adamax_first_step_is_signed_step_size():
    g = np.array([3.0, -0.25, 0.0, 1e-12])
    update = Adamax(4, step_size=0.002).step(g)
    np.testing.assert_array_equal(update, 0.002 * np.sign(g))


def test_adam_first_step_is_close_to_signed_step_size():
    g = np.array([3.0, -0.25, 0.0])
    update = Adam(3, step_size=0.001).step(g)
    np.testing.assert_allclose(update, 0.001 * np.sign(g), rtol=1e-6)


def test_zero_gradient_leaves_parameters_alone():
    for opt in (Adam(5), Adamax(5)):
        for _ in range(3):
            np.testing.assert_array_equal(opt.step(np.zeros(5)), np.zeros(5))


def test_zero_weights_relu_subgradient_is_zero():
    data = Dataset([[1.0, -2.0], [0.5, 0.5]], [1.0, -1.0])
    for norm in (Norm.UNIFORM, Norm.MANHATTAN):
        np.testing.assert_array_equal(loss_subgradient(Weights.zeros(2, 2), Activation.relu(), norm, data), np.zeros(8))


@pytest.mark.parametrize("act", [Activation.relu(), Activation.leaky(0.1)])
@pytest.mark.parametrize("norm", [Norm.UNIFORM, Norm.MANHATTAN])
def test_subgradient_matches_finite_differences(act, norm):
    """1000 random points away from every kink, where the losses are differentiable."""
    rng = np.random.default_rng(61)
    h = 1e-5
    checked = draws = 0
    while checked < 1000 and draws < 3000:
        draws += 1
        data = Dataset(rng.normal(size=(5, 2)), rng.normal(size=5))
        w = random_weights(2, 2, 1.0, rng)
        pre = np.concatenate([data.features @ w.A.T, data.features @ w.B.T], axis=1)
        r = np.abs(residuals(w, act, data))
        if np.min(np.abs(pre)) < 1e-3 or np.min(r) < 1e-3:
            continue
        top = np.sort(r)[-2:]
        if norm is Norm.UNIFORM and top[1] - top[0] < 1e-3:
            continue
        flat = w.flatten()
        numeric = np.zeros_like(flat)
        for k in range(flat.size):
            up, down = flat.copy(), flat.copy()
            up[k] += h
            down[k] -= h
            numeric[k] = (
                loss(Weights.from_flat(up, 2, 2), act, norm, data)
                - loss(Weights.from_flat(down, 2, 2), act, norm, data)
            ) / (2 * h)
        np.testing.assert_allclose(loss_subgradient(w, act, norm, data), numeric, atol=1e-5)
        checked += 1
    assert checked == 1000


def test_manhattan_subgradient_flips_with_target_shift():
    rng = np.random.default_rng(62)
    X = rng.normal(size=(6, 2))
    w = random_weights(2, 2, 1.0, rng)
    above = Dataset(X, np.full(6, 100.0))
    below = Dataset(X, np.full(6, -100.0))
    act = Activation.leaky(0.01)
    np.testing.assert_allclose(
        loss_subgradient(w, act, Norm.MANHATTAN, above), -loss_subgradient(w, act, Norm.MANHATTAN, below)
    )


def test_uniform_subgradient_uses_first_maximiser():
    data = Dataset([[1.0], [2.0]], [3.0, -3.0])
    grad = loss_subgradient(Weights([[1.0]], [[-1.0]]), Activation.relu(), Norm.UNIFORM, data)
    # residuals are 2 and -5, so sample 1 drives the step
    assert grad[0] == pytest.approx(2.0)
    tied = Dataset([[1.0], [1.0]], [1.75, -0.25])
    g = loss_subgradient(Weights([[0.5]], [[-0.5]]), Activation.leaky(0.5), Norm.UNIFORM, tied)
    assert g[0] == pytest.approx(-1.0)


def test_training_curve_and_prefix_property():
    data = make_grid(GridSpec(5, -1.0, 1.0), phi1)
    act = Activation.leaky(0.01)
    long = train_baseline(data, 2, act, Norm.MANHATTAN, BaselineConfig(optimizer="adam", max_epochs=40, seed=4))
    short = train_baseline(data, 2, act, Norm.MANHATTAN, BaselineConfig(optimizer="adam", max_epochs=15, seed=4))
    assert len(long.loss_curve) == 41
    assert long.loss_curve[:16] == short.loss_curve
    assert long.final_loss == min(long.loss_curve)
    assert long.loss_curve[long.best_epoch] == long.final_loss
    assert loss(long.final_weights, act, Norm.MANHATTAN, data) == long.final_loss


def test_zero_epochs_returns_the_start():
    data = Dataset([[1.0]], [2.0])
    init = Weights([[0.3]], [[0.1]])
    res = train_baseline(data, 1, Activation.relu(), Norm.UNIFORM, BaselineConfig(max_epochs=0), init=init)
    assert res.loss_curve == [loss(init, Activation.relu(), Norm.UNIFORM, data)]
    assert res.best_epoch == 0


def test_adamax_makes_progress_on_a_single_sample():
    data = Dataset([[1.0]], [2.0])
    res = train_baseline(
        data, 1, Activation.relu(), Norm.UNIFORM, BaselineConfig(max_epochs=500), init=Weights([[0.5]], [[-0.3]])
    )
    assert res.final_loss < res.loss_curve[0]


def test_curve_csv(tmp_path):
    data = Dataset([[1.0]], [2.0])
    res = train_baseline(data, 1, Activation.relu(), Norm.UNIFORM, BaselineConfig(max_epochs=3))
    path = tmp_path / "curve.csv"
    res.write_curve_csv(path)
    with path.open(encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "loss"]
    assert [int(r[0]) for r in rows[1:]] == [0, 1, 2, 3]
    assert [float(r[1]) for r in rows[1:]] == res.loss_curve
