"""
Tests for CSV/IDX loading, standardization, splitting and the benchmark factories
"""
import numpy as np
import pytest

from src.data_loader import (domain_stats, load_csv, load_idx, make_digit_benchmark, make_protein_benchmark,
                             make_tabular_benchmark, save_csv, split, standardize, write_idx)
from src.dataset import Dataset, SplitSpec
from src.errors import InvalidArgumentError, ParseError


@pytest.fixture
def small_csv(tmp_path):
    path = tmp_path / "small.csv"
    path.write_text("a,b,y\n1,2,3\n4,5,6\n7,8,9.5\n")
    return path


def test_load_csv_splits_target(small_csv):
    data = load_csv(small_csv, "y")
    assert data.features.shape == (3, 2)
    assert data.targets.shape == (3, 1)
    assert data.feature_names == ["a", "b"]
    assert data.targets[2, 0] == 9.5


def test_load_csv_target_by_index(small_csv):
    data = load_csv(small_csv, 0)
    assert data.target_name == "a"
    assert data.feature_names == ["b", "y"]


def test_missing_target_lists_columns(small_csv):
    with pytest.raises(InvalidArgumentError, match="a, b, y"):
        load_csv(small_csv, "price")


def test_non_numeric_cell_cites_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,y\n1,2,3\n4,abc,6\n")
    with pytest.raises(ParseError, match="row 2") as info:
        load_csv(path, "y")
    assert "'b'" in str(info.value)


@pytest.mark.parametrize("cell", ["nan", "inf", "-inf", "NaN"])
def test_non_finite_cell_cites_row_and_column(tmp_path, cell):
    path = tmp_path / "nonfinite.csv"
    path.write_text(f"x,y\n1,2\n{cell},3\n")
    with pytest.raises(ParseError, match="row 2, column 'x'") as info:
        load_csv(path, "y")
    assert info.value.line == 3


def test_ragged_row(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("a,b,y\n1,2,3\n4,5\n")
    with pytest.raises(ParseError):
        load_csv(path, "y")


def test_csv_round_trip_is_exact(tmp_path, rng):
    original = Dataset(rng.normal(size=(6, 3)) / 7.0, rng.normal(size=6) * 1e-5, ["p", "q", "r"], "t")
    path = tmp_path / "round.csv"
    save_csv(original, path)
    again = load_csv(path, "t")
    np.testing.assert_array_equal(again.features, original.features)
    np.testing.assert_array_equal(again.targets, original.targets)


def test_standardize_population_statistics():
    data = standardize(Dataset([[1.0], [2.0], [3.0]], [0.0, 1.0, 5.0]))
    np.testing.assert_allclose(data.features[:, 0], [-1.224745, 0.0, 1.224745], atol=1e-6)
    assert data.scaler.feature_mean[0] == 2.0
    np.testing.assert_allclose(data.scaler.feature_std[0], np.sqrt(2.0 / 3.0))
    assert data.scaler.statistic == "population"


def test_standardize_is_idempotent(rng):
    once = standardize(Dataset(rng.normal(size=(50, 3)) * 4 + 1, rng.normal(size=50)))
    twice = standardize(once)
    np.testing.assert_allclose(twice.features, once.features, atol=1e-12)
    np.testing.assert_allclose(twice.scaler.feature_mean, 0.0, atol=1e-12)
    np.testing.assert_allclose(twice.scaler.feature_std, 1.0, atol=1e-12)


def test_standardize_inverse_recovers_inputs(rng):
    raw = Dataset(rng.normal(size=(40, 4)) * 3 - 2, rng.normal(size=40) * 10)
    scaled = standardize(raw)
    np.testing.assert_allclose(scaled.scaler.inverse_features(scaled.features), raw.features, atol=1e-10)
    np.testing.assert_allclose(scaled.scaler.inverse_targets(scaled.targets), raw.targets, atol=1e-10)


def test_constant_column_is_named():
    with pytest.raises(InvalidArgumentError, match="'flat'"):
        standardize(Dataset([[1.0, 5.0], [2.0, 5.0]], [0.0, 1.0], ["x", "flat"]))


def test_features_only_leaves_targets():
    data = standardize(Dataset([[1.0], [3.0]], [7.0, 9.0]), scale_targets=False)
    np.testing.assert_array_equal(data.targets[:, 0], [7.0, 9.0])


def test_train_only_scaling_uses_fit_rows():
    data = standardize(Dataset([[0.0], [2.0], [100.0]], [0.0, 1.0, 2.0]), fit_rows=np.array([0, 1]))
    assert data.scaler.feature_mean[0] == 1.0
    assert data.features[2, 0] == 99.0


def test_split_sizes_follow_floor_rule():
    data = Dataset(np.zeros((8192, 1)), np.zeros(8192))
    parts = split(data, SplitSpec(5000, 0.10, seed=3))
    assert (parts.train.n_samples, parts.validation.n_samples, parts.test.n_samples) == (5000, 319, 2873)


def test_split_small_remainder():
    parts = split(Dataset(np.zeros((5001, 1)), np.zeros(5001)), SplitSpec(5000))
    assert parts.validation.n_samples == 0
    assert parts.test.n_samples == 1


@pytest.mark.parametrize("n,seed", [(20, 0), (101, 5), (1000, 9)])
def test_split_is_a_partition(n, seed):
    data = Dataset(np.arange(n, dtype=np.float64).reshape(-1, 1), np.zeros(n))
    parts = split(data, SplitSpec(n // 2, 0.3, seed))
    together = np.concatenate([parts.train_index, parts.validation_index, parts.test_index])
    assert sorted(together.tolist()) == list(range(n))
    again = split(data, SplitSpec(n // 2, 0.3, seed))
    np.testing.assert_array_equal(again.train_index, parts.train_index)


def test_split_rejects_train_count_at_n():
    with pytest.raises(InvalidArgumentError):
        split(Dataset(np.zeros((10, 1)), np.zeros(10)), SplitSpec(10))


def test_domain_stats():
    stats = domain_stats(Dataset([[0.0, 1.0], [2.0, 3.0]], [0.0, 0.0]))
    np.testing.assert_array_equal(stats.mean, [1.0, 2.0])
    np.testing.assert_array_equal(stats.std, [1.0, 1.0])


def test_domain_stats_single_row():
    stats = domain_stats(Dataset([[4.0, 5.0]], [1.0]))
    np.testing.assert_array_equal(stats.std, [0.0, 0.0])


def test_idx_scaling_and_labels(tmp_path):
    images = np.array([[[0, 255], [255, 0]], [[255, 255], [0, 0]]], dtype=np.uint8)
    write_idx(images, [7, 3], tmp_path / "img.idx", tmp_path / "lab.idx")
    data = load_idx(tmp_path / "img.idx", tmp_path / "lab.idx")
    np.testing.assert_array_equal(data.features, [[0.0, 1.0, 1.0, 0.0], [1.0, 1.0, 0.0, 0.0]])
    np.testing.assert_array_equal(data.targets[:, 0], [7.0, 3.0])


def test_idx_count_mismatch(tmp_path):
    write_idx(np.zeros((2, 2, 2)), [1, 2, 3], tmp_path / "img.idx", tmp_path / "lab.idx")
    with pytest.raises(ParseError):
        load_idx(tmp_path / "img.idx", tmp_path / "lab.idx")


def test_idx_bad_magic_and_truncation(tmp_path):
    write_idx(np.zeros((2, 2, 2)), [1, 2], tmp_path / "img.idx", tmp_path / "lab.idx")
    with pytest.raises(ParseError, match="magic"):
        load_idx(tmp_path / "lab.idx", tmp_path / "img.idx")
    raw = (tmp_path / "img.idx").read_bytes()
    (tmp_path / "short.idx").write_bytes(raw[:-3])
    with pytest.raises(ParseError, match="truncated"):
        load_idx(tmp_path / "short.idx", tmp_path / "lab.idx")


def test_idx_downsampling(tmp_path):
    images = np.full((1, 28, 28), 255, dtype=np.uint8)
    write_idx(images, [1], tmp_path / "img.idx", tmp_path / "lab.idx")
    data = load_idx(tmp_path / "img.idx", tmp_path / "lab.idx", size=7)
    assert data.n_features == 49
    np.testing.assert_array_equal(data.features, 1.0)


def test_tabular_benchmark():
    data = make_tabular_benchmark(n=300, d=10, seed=1)
    assert data.features.shape == (300, 10)
    assert data.features.min() >= 0.0 and data.features.max() <= 1.0


def test_protein_benchmark_compositions():
    data = make_protein_benchmark(n=200, seed=1)
    np.testing.assert_allclose(data.features.sum(axis=1), 1.0, atol=1e-12)
    assert data.targets.min() > 0.0 and data.targets.max() < 1.0
    assert len(data.feature_names) == 20


def test_digit_benchmark():
    data = make_digit_benchmark(n=30, size=8, seed=2)
    assert data.features.shape == (30, 64)
    assert data.features.min() >= 0.0 and data.features.max() <= 1.0
    assert set(np.unique(data.targets)) <= set(range(10))
