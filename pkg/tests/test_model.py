import numpy as np
import pytest

from dataset import Dataset, GridSpec, make_grid, phi2
from model import (
    Activation,
    Norm,
    Weights,
    activate,
    forward,
    load_weights,
    loss,
    random_weights,
    save_weights,
)


def test_activate_examples():
    assert activate(Activation.relu(), -3.0) == 0.0
    assert activate(Activation.leaky(0.01), -3.0) == pytest.approx(-0.03)
    assert activate(Activation.leaky(0.01), 2.0) == 2.0


def test_leaky_alpha_validation():
    with pytest.raises(ValueError):
        Activation.leaky(1.0)
    with pytest.raises(ValueError):
        Activation.leaky(-0.1)


def test_forward_examples():
    w = Weights([[2.0, 0.0]], [[1.0, 1.0]])
    assert forward(w, Activation.relu(), [1.0, -1.0]) == 2.0
    assert forward(Weights.zeros(3, 2), Activation.relu(), [0.3, -7.0]) == 0.0
    with pytest.raises(ValueError):
        forward(w, Activation.relu(), [1.0, 2.0, 3.0])


def test_positive_homogeneity():
    rng = np.random.default_rng(4)
    for _ in range(100):
        w = random_weights(2, 3, 1.0, rng)
        t = rng.normal(size=3)
        lam = float(rng.uniform(0, 5))
        base = forward(w, Activation.relu(), t)
        assert forward(w.scaled(lam), Activation.relu(), t) == pytest.approx(lam * base, rel=1e-12, abs=1e-12)


def test_leaky_with_zero_alpha_equals_relu():
    rng = np.random.default_rng(5)
    x = rng.normal(size=200)
    np.testing.assert_array_equal(activate(Activation.leaky(0.0), x), activate(Activation.relu(), x))


def test_loss_zero_weights():
    data = Dataset([[1.0], [2.0], [3.0]], [0.5, -2.0, 1.0])
    w = Weights.zeros(1, 1)
    assert loss(w, Activation.relu(), Norm.UNIFORM, data) == 2.0
    assert loss(w, Activation.relu(), Norm.MANHATTAN, data) == 3.5


def test_loss_zero_weights_phi2_grid_sum():
    data = make_grid(GridSpec(), phi2)
    value = loss(Weights.zeros(1, 2), Activation.relu(), Norm.MANHATTAN, data)
    assert value == pytest.approx(float(np.sum(np.abs(data.targets))), rel=1e-12)


def test_exact_interpolant_has_zero_loss():
    data = Dataset([[1.0]], [2.0])
    assert loss(Weights([[2.0]], [[0.0]]), Activation.relu(), Norm.UNIFORM, data) == 0.0


def test_norm_ordering():
    rng = np.random.default_rng(6)
    for _ in range(200):
        N = int(rng.integers(1, 8))
        data = Dataset(rng.normal(size=(N, 2)), rng.normal(size=N))
        w = random_weights(2, 2, 1.0, rng)
        for act in (Activation.relu(), Activation.leaky()):
            u = loss(w, act, Norm.UNIFORM, data)
            m = loss(w, act, Norm.MANHATTAN, data)
            assert u <= m + 1e-12
            assert m <= N * u + 1e-12


def test_weights_flatten_order():
    w = Weights([[1.0, 2.0], [3.0, 4.0]], [[5.0, 6.0], [7.0, 8.0]])
    np.testing.assert_array_equal(w.flatten(), np.arange(1.0, 9.0))
    back = Weights.from_flat(w.flatten(), 2, 2)
    np.testing.assert_array_equal(back.A, w.A)
    np.testing.assert_array_equal(back.B, w.B)


def test_weight_file_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    w = random_weights(2, 3, 1.0, rng)
    path = tmp_path / "w.txt"
    save_weights(path, w, Activation.leaky(0.01))
    back, act = load_weights(path)
    np.testing.assert_array_equal(back.A, w.A)
    np.testing.assert_array_equal(back.B, w.B)
    assert act == Activation.leaky(0.01)
    assert path.read_text().splitlines()[0] == "2 3 leaky 0.01"


def test_weight_file_rejects_short_body(tmp_path):
    path = tmp_path / "w.txt"
    path.write_text("1 2 relu 0.01\n1 2\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_weights(path)
