import io

import numpy as np
import pytest

from dataset import Dataset
from dc_core import Subgradient, eval_dc, subgrad_h
from lp_build import (
    GE,
    LE,
    LpProblem,
    LpSolution,
    LpStatus,
    build_step2_lp,
    count_active_trust_bounds,
    dump_lp,
    extract_weights,
    step2_layout,
    substitution_point,
)
from model import Activation, Norm, Weights, random_weights

ACTS = (Activation.relu(), Activation.leaky(0.01))
NORMS = (Norm.UNIFORM, Norm.MANHATTAN)


def _row_values(lp, x):
    return lp.matrix @ x


def _is_feasible(lp, x, tol=1e-9):
    act = _row_values(lp, x)
    for r in range(lp.num_rows):
        scale = tol * (1 + abs(lp.rhs[r]) + abs(act[r]))
        if lp.relations[r] == LE and act[r] > lp.rhs[r] + scale:
            return False
        if lp.relations[r] == GE and act[r] < lp.rhs[r] - scale:
            return False
    return bool(np.all(x >= lp.lower - tol) and np.all(x <= lp.upper + tol))


def test_variable_count_uniform_ecg_shape():
    layout = step2_layout(n=2, d=83, N=370, norm=Norm.UNIFORM)
    assert layout.num_vars == 2 * 83 * 2 + 1 + 2 * 370 * 2 == 1813


def test_variable_count_manhattan_grid_shape():
    assert step2_layout(n=2, d=2, N=2500, norm=Norm.MANHATTAN).num_vars == 12508


@pytest.mark.parametrize("act", ACTS)
@pytest.mark.parametrize("norm", NORMS)
def test_built_problem_counts(act, norm):
    rng = np.random.default_rng(21)
    data = Dataset(rng.normal(size=(5, 3)), rng.normal(size=5))
    w = random_weights(2, 3, 0.5, rng)
    lp = build_step2_lp(w, subgrad_h(w, act, norm, data), act, norm, data)
    k = 1 if norm is Norm.UNIFORM else 5
    assert lp.num_vars == 2 * 3 * 2 + k + 2 * 5 * 2
    pieces = 1 if act == Activation.relu() else 2
    assert lp.num_rows == 2 * 5 + 2 * 5 * 2 * pieces
    assert len(lp.var_names) == lp.num_vars
    assert len(lp.row_names) == lp.num_rows
    np.testing.assert_array_equal(lp.lower[:12], -1e3)
    np.testing.assert_array_equal(lp.upper[:12], 1e3)


@pytest.mark.parametrize("act", ACTS)
@pytest.mark.parametrize("norm", NORMS)
def test_substitution_point_is_feasible_and_prices_the_surrogate(act, norm):
    rng = np.random.default_rng(22)
    for _ in range(100):
        N = int(rng.integers(1, 6))
        d = int(rng.integers(1, 3))
        data = Dataset(rng.normal(size=(N, d)), rng.normal(size=N))
        w_k = random_weights(2, d, 1.0, rng)
        y = subgrad_h(w_k, act, norm, data)
        lp = build_step2_lp(w_k, y, act, norm, data, trust_radius=10.0)
        w = random_weights(2, d, 5.0, rng)
        x = substitution_point(w, y, act, norm, data)
        assert _is_feasible(lp, x)
        surrogate = eval_dc(w, act, norm, data).g - float(y.y @ w.flatten())
        assert float(lp.objective @ x) == pytest.approx(surrogate, rel=1e-9, abs=1e-9)


def test_w_k_values_do_not_enter_the_lp():
    rng = np.random.default_rng(23)
    data = Dataset(rng.normal(size=(4, 2)), rng.normal(size=4))
    y = Subgradient(rng.normal(size=4), 1, 2)
    a = build_step2_lp(random_weights(1, 2, 1.0, rng), y, Activation.relu(), Norm.UNIFORM, data)
    b = build_step2_lp(Weights.zeros(1, 2), y, Activation.relu(), Norm.UNIFORM, data)
    assert (a.matrix != b.matrix).nnz == 0
    np.testing.assert_array_equal(a.objective, b.objective)


def test_dimension_errors():
    data = Dataset([[1.0, 2.0]], [1.0])
    with pytest.raises(ValueError):
        build_step2_lp(Weights.zeros(1, 3), Subgradient(np.zeros(6), 1, 3), Activation.relu(), Norm.UNIFORM, data)
    with pytest.raises(ValueError):
        build_step2_lp(Weights.zeros(1, 2), Subgradient(np.zeros(3), 1, 2), Activation.relu(), Norm.UNIFORM, data)
    with pytest.raises(ValueError):
        build_step2_lp(Weights.zeros(1, 2), Subgradient(np.zeros(4), 1, 2), Activation.relu(), Norm.UNIFORM, data, trust_radius=0)


def test_extract_weights_layout_round_trip():
    x = np.arange(1.0, 20.0)
    w = extract_weights(LpSolution(LpStatus.OPTIMAL, 0.0, x), n=2, d=2)
    np.testing.assert_array_equal(w.A, [[1, 2], [3, 4]])
    np.testing.assert_array_equal(w.B, [[5, 6], [7, 8]])


def test_extract_weights_requires_optimal():
    with pytest.raises(ValueError):
        extract_weights(LpSolution(LpStatus.INFEASIBLE, float("nan"), np.zeros(8)), 1, 2)


def test_active_trust_bound_count():
    data = Dataset([[1.0]], [1.0])
    lp = build_step2_lp(Weights.zeros(1, 1), Subgradient(np.zeros(2), 1, 1), Activation.relu(), Norm.UNIFORM, data, trust_radius=2.0)
    x = np.zeros(lp.num_vars)
    x[0], x[1] = 2.0, -2.0
    assert count_active_trust_bounds(lp, x) == 2
    x[1] = 1.0
    assert count_active_trust_bounds(lp, x) == 1


def test_from_rows_accepts_dense_and_sparse_rows():
    lp = LpProblem.from_rows([1.0, 1.0], [([1.0, 2.0], LE, 4.0), ([(1, 3.0)], GE, 1.0)])
    np.testing.assert_array_equal(lp.matrix.toarray(), [[1.0, 2.0], [0.0, 3.0]])
    assert list(lp.relations) == [LE, GE]
    assert np.all(np.isinf(lp.lower))


def test_problem_validation():
    with pytest.raises(ValueError):
        LpProblem.from_rows([1.0], [([1.0], "<", 1.0)])
    with pytest.raises(ValueError):
        LpProblem.from_rows([1.0], [([1.0], LE, 1.0)], lower=[2.0], upper=[1.0])


def test_dump_lp_lines():
    data = Dataset([[1.0]], [1.0])
    lp = build_step2_lp(Weights.zeros(1, 1), Subgradient(np.array([1.0, 1.0]), 1, 1), Activation.relu(), Norm.UNIFORM, data)
    buf = io.StringIO()
    dump_lp(lp, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("minimize ")
    assert lines[1].startswith("epi0_lo <= -1.0 ")
    assert sum(1 for ln in lines if ln.startswith("bound ")) == lp.num_vars
    assert len(lines) == 1 + lp.num_rows + lp.num_vars
