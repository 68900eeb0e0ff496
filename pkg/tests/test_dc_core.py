import numpy as np
import pytest

from dataset import Dataset, GridSpec, make_grid, phi2
from dc_core import eval_dc, eval_gi, eval_hi, sample_terms, subgrad_h
from model import Activation, Norm, Weights, loss, random_weights, residuals
from verify import oracle_loss

ACTS = (Activation.relu(), Activation.leaky(0.01))
NORMS = (Norm.UNIFORM, Norm.MANHATTAN)


def _random_case(rng):
    N = int(rng.integers(1, 7))
    d = int(rng.integers(1, 4))
    n = int(rng.integers(1, 3))
    data = Dataset(rng.normal(size=(N, d)), rng.normal(size=N))
    return data, random_weights(n, d, float(rng.uniform(0.1, 2.0)), rng)


def test_per_sample_examples():
    data = Dataset([[3.0]], [1.0])
    w = Weights([[2.0]], [[-1.0]])
    assert eval_hi(w, Activation.relu(), 0, data) == 6.0
    assert eval_hi(w, Activation.leaky(0.01), 0, data) == pytest.approx(5.97)
    assert eval_gi(w, Activation.relu(), 0, data) == 11.0
    assert eval_hi(Weights.zeros(1, 1), Activation.relu(), 0, data) == 0.0
    assert eval_gi(Weights.zeros(1, 1), Activation.relu(), 0, data) == 1.0
    with pytest.raises(IndexError):
        eval_hi(w, Activation.relu(), 1, data)


def test_gi_minus_hi_is_abs_residual():
    rng = np.random.default_rng(11)
    for _ in range(200):
        data, w = _random_case(rng)
        for act in ACTS:
            r = np.abs(residuals(w, act, data))
            for i in range(data.N):
                assert eval_gi(w, act, i, data) - eval_hi(w, act, i, data) == pytest.approx(r[i], abs=1e-9)


def test_zero_weights_uniform():
    data = Dataset([[1.0], [-2.0]], [0.5, -3.0])
    value = eval_dc(Weights.zeros(1, 1), Activation.relu(), Norm.UNIFORM, data)
    assert (value.g, value.h, value.p) == (3.0, 0.0, 3.0)


def test_single_sample_norms_agree():
    data = Dataset([[0.4, -1.2]], [0.7])
    w = random_weights(2, 2, 1.0, np.random.default_rng(2))
    for act in ACTS:
        u = eval_dc(w, act, Norm.UNIFORM, data)
        m = eval_dc(w, act, Norm.MANHATTAN, data)
        assert (u.g, u.h, u.p) == pytest.approx((m.g, m.h, m.p), rel=1e-12, abs=1e-12)


def test_phi2_nine_point_grid_matches_loss():
    data = make_grid(GridSpec(3, -1.0, 1.0), phi2)
    w = random_weights(2, 2, 1.0, np.random.default_rng(3))
    for act in ACTS:
        for norm in NORMS:
            assert eval_dc(w, act, norm, data).p == pytest.approx(loss(w, act, norm, data), rel=1e-9)


def test_dc_identity_against_independent_loss():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        data, w = _random_case(rng)
        act = ACTS[int(rng.integers(2))]
        norm = NORMS[int(rng.integers(2))]
        p = eval_dc(w, act, norm, data).p
        assert abs(p - oracle_loss(w, act, norm, data)) <= 1e-9 * (1 + abs(p))


def test_h_nonnegative_for_relu():
    rng = np.random.default_rng(13)
    for _ in range(100):
        data, w = _random_case(rng)
        assert eval_dc(w, Activation.relu(), Norm.UNIFORM, data).h >= 0.0


def test_subgradient_examples():
    data = Dataset([[1.0], [-1.0]], [0.0, 0.0])
    y = subgrad_h(Weights([[1.0]], [[-1.0]]), Activation.relu(), Norm.UNIFORM, data)
    np.testing.assert_array_equal(y.y, [1.0, -1.0])

    y0 = subgrad_h(Weights.zeros(2, 1), Activation.relu(), Norm.UNIFORM, data)
    np.testing.assert_array_equal(y0.y, np.zeros(4))

    data3 = Dataset([[1.0, 2.0], [0.5, -1.0], [2.0, 0.0]], [0.0, 0.0, 0.0])
    yl = subgrad_h(Weights.zeros(1, 2), Activation.leaky(0.1), Norm.MANHATTAN, data3)
    expected = 0.1 * data3.features.sum(axis=0)
    np.testing.assert_allclose(yl.plus[0], expected)
    np.testing.assert_allclose(yl.minus[0], expected)


def test_subgradient_inequality():
    rng = np.random.default_rng(14)
    for _ in range(1000):
        data, w = _random_case(rng)
        w2 = random_weights(w.n, w.d, 2.0, rng)
        act = ACTS[int(rng.integers(2))]
        norm = NORMS[int(rng.integers(2))]
        y = subgrad_h(w, act, norm, data)
        h1 = eval_dc(w, act, norm, data).h
        h2 = eval_dc(w2, act, norm, data).h
        assert h2 >= h1 + float(y.y @ (w2.flatten() - w.flatten())) - 1e-9


def test_convexity_of_g_and_h():
    rng = np.random.default_rng(15)
    for _ in range(300):
        data, w = _random_case(rng)
        w2 = random_weights(w.n, w.d, 2.0, rng)
        mid = Weights.from_flat((w.flatten() + w2.flatten()) / 2, w.n, w.d)
        for act in ACTS:
            for norm in NORMS:
                a, b, m = (eval_dc(v, act, norm, data) for v in (w, w2, mid))
                assert m.g <= (a.g + b.g) / 2 + 1e-9
                assert m.h <= (a.h + b.h) / 2 + 1e-9


def test_sample_terms_shape():
    data, w = _random_case(np.random.default_rng(16))
    g_terms, h_terms = sample_terms(w, Activation.relu(), data)
    assert g_terms.shape == h_terms.shape == (data.N,)
