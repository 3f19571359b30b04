"""
Tests for CSV ingestion and the split primitives.
"""

import json

import numpy as np
import pytest

from interval_tuner.data_model import (
    IngestionConfig,
    bootstrap_split,
    ceil_count,
    derive_rng,
    from_arrays,
    holdout_split,
    kfold_partition,
    load_csv,
    load_ingestion_config,
    tscv_splits,
    tshvcv_defaults,
    tshvcv_splits,
)
from interval_tuner.errors import (
    BadFoldCount,
    ConfigError,
    DegenerateSplit,
    EmptyDataset,
    EmptyOutOfBag,
    MissingColumn,
    MissingValue,
    NonNumeric,
)


def write(tmp_path, text, name='data.csv'):
    path = tmp_path / name
    path.write_text(text, encoding='utf-8')
    return path


def test_load_numeric_csv(tmp_path):
    path = write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n7,8,9\n")
    data = load_csv(path, IngestionConfig(response='y'))
    assert data.m == 3
    assert data.feature_count == 2
    assert np.array_equal(data.y, [3.0, 6.0, 9.0])
    assert data.schema.feature_names == ('a', 'b')
    assert data.schema.response == 'y'


def test_categorical_levels_in_first_appearance_order(tmp_path):
    path = write(tmp_path, "size,arch,y\n1,NET,3\n2,MVC,4\n3,NET,5\n")
    data = load_csv(path, IngestionConfig(response='y', categorical=('arch',)))
    assert data.schema.levels['arch'] == ('NET', 'MVC')
    assert data.schema.feature_names == ('size', 'arch=NET', 'arch=MVC')
    assert np.array_equal(data.X[:, 1:], [[1, 0], [0, 1], [1, 0]])


def test_categorical_levels_keep_file_order_when_rows_are_sorted(tmp_path):
    path = write(tmp_path, "release,arch,y\n2,MVC,4\n1,NET,3\n3,MVC,5\n")
    data = load_csv(path, IngestionConfig(response='y', order_by='release', categorical=('arch',)))
    assert data.schema.levels['arch'] == ('MVC', 'NET')
    assert data.schema.feature_names == ('arch=MVC', 'arch=NET')
    assert np.array_equal(data.y, [3.0, 4.0, 5.0])
    assert np.array_equal(data.X, [[0, 1], [1, 0], [1, 0]])


def test_blank_cell_is_rejected(tmp_path):
    path = write(tmp_path, "a,y\n1,2\n ,3\n")
    with pytest.raises(MissingValue):
        load_csv(path, IngestionConfig(response='y'))


def test_missing_column_and_bad_numbers(tmp_path):
    path = write(tmp_path, "a,y\n1,2\nx,3\n")
    with pytest.raises(MissingColumn):
        load_csv(path, IngestionConfig(response='defects'))
    with pytest.raises(NonNumeric):
        load_csv(path, IngestionConfig(response='y'))


def test_header_only_file_is_empty(tmp_path):
    path = write(tmp_path, "a,y\n")
    with pytest.raises(EmptyDataset):
        load_csv(path, IngestionConfig(response='y'))


def test_order_by_sorts_stably_and_is_not_a_feature(tmp_path):
    path = write(tmp_path, "release,a,y\n2,10,1\n1,20,2\n2,30,3\n1,40,4\n")
    data = load_csv(path, IngestionConfig(response='y', order_by='release'))
    assert np.array_equal(data.y, [2.0, 4.0, 1.0, 3.0])
    assert data.schema.feature_names == ('a',)


def test_ignored_columns_are_dropped(tmp_path):
    path = write(tmp_path, "name,a,y\nant,1,2\nant,2,3\n")
    data = load_csv(path, IngestionConfig(response='y', ignore=('name',)))
    assert data.schema.feature_names == ('a',)


def test_ingestion_config_file(tmp_path):
    path = write(tmp_path, json.dumps({'response': 'bug', 'ignore': ['name']}), 'config.json')
    config = load_ingestion_config(path)
    assert config.response == 'bug'
    assert config.ignore == ('name',)

    bad = write(tmp_path, json.dumps({'response': 'bug', 'target': 'x'}), 'bad.json')
    with pytest.raises(ConfigError):
        load_ingestion_config(bad)


def test_dataset_is_read_only():
    data = from_arrays([[1.0], [2.0]], [3.0, 4.0])
    with pytest.raises(ValueError):
        data.X[0, 0] = 5.0


def test_ceil_count_ignores_float_noise():
    assert ceil_count(0.66, 10) == 7
    assert ceil_count(0.7, 10) == 7
    assert ceil_count(0.05, 20) == 1
    assert ceil_count(0.95, 20) == 19


def test_holdout_split():
    split = holdout_split(10, 0.66)
    assert np.array_equal(split.train, np.arange(7))
    assert np.array_equal(split.test, [7, 8, 9])

    split = holdout_split(4, 0.5)
    assert np.array_equal(split.train, [0, 1])
    assert np.array_equal(split.test, [2, 3])

    with pytest.raises(DegenerateSplit):
        holdout_split(1, 0.5)


def test_bootstrap_split_out_of_bag():
    split = bootstrap_split(4, derive_rng(7, 1))
    assert split.train.size == 4
    assert np.array_equal(np.sort(split.train), split.train)
    assert np.array_equal(split.test, np.setdiff1d(np.arange(4), split.train))
    assert split.test.size >= 1
    assert bootstrap_split(4, derive_rng(7, 1)) == split


class ScriptedRng:
    """Generator stand-in returning prepared draws."""

    def __init__(self, draws):
        self.draws = [np.array(d) for d in draws]

    def integers(self, low, high, size):
        return self.draws.pop(0)


def test_bootstrap_retries_full_draws():
    split = bootstrap_split(2, ScriptedRng([[0, 1], [1, 0], [0, 0]]))
    assert np.array_equal(split.train, [0, 0])
    assert np.array_equal(split.test, [1])

    with pytest.raises(EmptyOutOfBag):
        bootstrap_split(2, ScriptedRng([[0, 1], [1, 0]]), max_attempts=2)


def test_bootstrap_out_of_bag_fraction():
    rng = derive_rng(2024, 9)
    m = 100
    fractions = [bootstrap_split(m, rng).test.size / m for _ in range(10000)]
    assert abs(np.mean(fractions) - (1 - 1 / m) ** m) <= 0.01


def test_kfold_partition():
    splits = kfold_partition(10, 10, derive_rng(0, 1))
    assert all(s.test.size == 1 for s in splits)
    assert np.array_equal(np.sort(np.concatenate([s.test for s in splits])), np.arange(10))

    splits = kfold_partition(10, 3, derive_rng(0, 1))
    assert sorted(s.test.size for s in splits) == [3, 3, 4]
    for s in splits:
        assert np.intersect1d(s.train, s.test).size == 0
        assert s.train.size + s.test.size == 10

    again = kfold_partition(10, 3, derive_rng(0, 1))
    assert all(a == b for a, b in zip(splits, again))

    with pytest.raises(BadFoldCount):
        kfold_partition(10, 11, derive_rng(0, 1))
    with pytest.raises(BadFoldCount):
        kfold_partition(10, 1, derive_rng(0, 1))


def test_tscv_splits():
    splits = tscv_splits(10, 0.5, 5)
    assert [s.test.tolist() for s in splits] == [[5], [6], [7], [8], [9]]
    for j, s in enumerate(splits):
        assert np.array_equal(s.train, np.arange(5 + j))
        assert s.train.max() < s.test.min()

    (only,) = tscv_splits(10, 0.5, 1)
    assert np.array_equal(only.train, np.arange(5))
    assert np.array_equal(only.test, np.arange(5, 10))

    with pytest.raises(DegenerateSplit):
        tscv_splits(10, 0.5, 6)


def test_tshvcv_splits():
    splits = tshvcv_splits(11, 1, 1, 3)
    # centers 1, 4, 7, 10; the last window is clipped at the final row
    assert [s.test.tolist() for s in splits] == [[0, 1, 2], [3, 4, 5], [6, 7, 8], [9, 10]]
    assert splits[1].train.tolist() == [0, 1, 7, 8, 9, 10]
    assert splits[1].train.size == 11 - 2 - 2 - 1
    assert splits[-1].test.tolist() == [9, 10]

    loo = tshvcv_splits(5, 0, 0, 1)
    assert [s.test.tolist() for s in loo] == [[0], [1], [2], [3], [4]]
    assert loo[2].train.tolist() == [0, 1, 3, 4]

    with pytest.raises(DegenerateSplit):
        tshvcv_splits(5, 1, 1, 1)


def test_tshvcv_defaults():
    assert tshvcv_defaults(40) == (2, 2, 5)
    assert tshvcv_defaults(11) == (1, 1, 3)


def test_split_indices_within_range():
    rng = derive_rng(3, 3)
    m = 23
    produced = (
        [holdout_split(m, 0.25), bootstrap_split(m, rng)]
        + kfold_partition(m, 4, rng)
        + tscv_splits(m)
        + tshvcv_splits(m, *tshvcv_defaults(m))
    )
    for split in produced:
        both = np.concatenate([split.train, split.test])
        assert both.min() >= 0 and both.max() < m


if __name__ == "__main__":
    pytest.main([__file__])
