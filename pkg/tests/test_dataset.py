import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dataset import (
    Dataset,
    DatasetParseError,
    GridSpec,
    load_delimited,
    load_source,
    make_grid,
    phi1,
    phi2,
    save_delimited,
)


def test_load_delimited_label_first(tmp_path):
    path = tmp_path / "tiny.tsv"
    path.write_text("1.0\t0.2\t0.3\n" * 3, encoding="utf-8")
    data = load_delimited(path, "\t", label_first=True)
    assert (data.N, data.d) == (3, 2)
    assert list(data.targets) == [1.0, 1.0, 1.0]
    np.testing.assert_array_equal(data.features[0], [0.2, 0.3])


def test_load_delimited_label_last(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text("0.2,0.3,1\n0.4,0.5,0\n", encoding="utf-8")
    data = load_delimited(path, ",", label_first=False)
    assert list(data.targets) == [1.0, 0.0]
    np.testing.assert_array_equal(data.features[1], [0.4, 0.5])


def test_ragged_rows_name_the_line(tmp_path):
    path = tmp_path / "ragged.tsv"
    path.write_text("1\t2\t3\n1\t2\t3\t4\n", encoding="utf-8")
    with pytest.raises(DatasetParseError, match="line 2"):
        load_delimited(path)


def test_non_numeric_and_empty_files(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("1\tabc\n", encoding="utf-8")
    with pytest.raises(DatasetParseError):
        load_delimited(bad)
    empty = tmp_path / "empty.tsv"
    empty.write_text("\n\n", encoding="utf-8")
    with pytest.raises(DatasetParseError, match="empty"):
        load_delimited(empty)


def test_ecg_dimension_is_logged_not_enforced(tmp_path, caplog):
    path = tmp_path / "TwoLeadECG_TRAIN.tsv"
    path.write_text("1\t" + "\t".join(["0.5"] * 82) + "\n", encoding="utf-8")
    with caplog.at_level("INFO"):
        data = load_delimited(path)
    assert data.d == 82
    assert "83" in caplog.text


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=3, max_size=3),
        min_size=1,
        max_size=8,
    )
)
def test_save_then_load_is_bit_exact(tmp_path_factory, rows):
    table = np.asarray(rows)
    data = Dataset(table[:, 1:], table[:, 0])
    path = tmp_path_factory.mktemp("rt") / "data.tsv"
    save_delimited(data, path)
    back = load_delimited(path)
    np.testing.assert_array_equal(back.features, data.features)
    np.testing.assert_array_equal(back.targets, data.targets)


def test_phi1_examples():
    assert phi1(0.5, 0.0) == 0.0
    assert phi1(-0.5, 0.0) == 1.0
    assert phi1(1.0, 1.0) == pytest.approx(math.sqrt(3.5))


def test_phi2_examples():
    assert phi2(0.1, 0.0) == pytest.approx(-1.0, abs=1e-15)
    x = (math.pi / 2 + 0.5) / 5
    y = math.pi / 14
    assert phi2(x, y) == pytest.approx(1.0, abs=1e-7)


def test_default_grid_count_and_spacing():
    data = make_grid(GridSpec(50, -1.0, 1.0), phi1)
    assert (data.N, data.d) == (2500, 2)
    axis = np.unique(data.features[:, 0])
    gaps = np.diff(axis)
    assert np.all(np.abs(gaps - gaps[0]) <= 1e-12 * abs(gaps[0]))
    assert gaps[0] == pytest.approx(2 / 49)


def test_small_grid_is_row_major():
    data = make_grid(GridSpec(2, 0.0, 1.0), lambda x, y: 0.0 * x)
    np.testing.assert_array_equal(data.features, [[0, 0], [0, 1], [1, 0], [1, 1]])
    assert np.all(data.targets == 0.0)


def test_three_point_grid_phi2():
    data = make_grid(GridSpec(3, -1.0, 1.0), phi2)
    assert data.N == 9
    assert set(np.unique(data.features)) == {-1.0, 0.0, 1.0}
    for (x, y), t in zip(data.features, data.targets):
        assert t == pytest.approx(math.sin(5 * x - 0.5) - math.sqrt(abs(math.cos(7 * y))))


def test_grid_calibration_against_reported_value():
    data = make_grid(GridSpec(), phi2)
    assert abs(float(np.max(np.abs(data.targets))) - 1.9937) <= 0.05


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(1, -1.0, 1.0)
    with pytest.raises(ValueError):
        GridSpec(10, 1.0, 1.0)


def test_dataset_is_immutable_and_indexed():
    data = Dataset([[1.0, 2.0]], [3.0])
    with pytest.raises(ValueError):
        data.features[0, 0] = 5.0
    assert data.sample(0).target == 3.0
    with pytest.raises(IndexError):
        data.sample(1)


def test_load_source_synthetic_and_bias():
    data = load_source("synthetic:phi1", grid=GridSpec(4, -1, 1), augment_bias=True)
    assert (data.N, data.d) == (16, 3)
    assert np.all(data.features[:, 2] == 1.0)
    with pytest.raises(ValueError):
        load_source("synthetic:nope")
