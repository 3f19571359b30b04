"""
Tests for the validation techniques and predicted performance.
"""

import math

import numpy as np
import pytest

from interval_tuner.data_model import from_arrays
from interval_tuner.errors import ConfigError, IsolationViolation, TooFewRows
from interval_tuner.forest import ForestConfig, train_forest
from interval_tuner.metrics import evaluate
from interval_tuner.validation import (
    IndexAudit,
    Technique,
    TechniqueParams,
    canonical,
    predict_performance,
    technique_splits,
)


def noisy_data(seed, m, p=2):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(m, p))
    return from_arrays(X, X[:, 0] * 2 + rng.normal(size=m))


def test_catalog_order_and_names():
    assert [t.label for t in Technique] == [
        'Bootstrap', '10x10fold', '25-75', '50-50', '75-25', 'LOO', 'TSCV', 'TSHVCV',
    ]
    assert [t.code for t in Technique] == list(range(1, 9))
    assert Technique.parse('50-50') is Technique.HOLDOUT_50_50
    assert Technique.parse('25/75') is Technique.HOLDOUT_25_75
    assert Technique.parse('holdout_75_25') is Technique.HOLDOUT_75_25
    assert Technique.parse('loo') is Technique.LOO
    with pytest.raises(ConfigError):
        Technique.parse('5x2fold')
    assert canonical([Technique.TSCV, Technique.BOOTSTRAP, Technique.TSCV]) == [Technique.BOOTSTRAP, Technique.TSCV]


def test_holdout_and_loo_splits():
    (split,) = technique_splits(Technique.HOLDOUT_50_50, 10, seed=0)
    assert split.train.tolist() == [0, 1, 2, 3, 4]
    assert split.test.tolist() == [5, 6, 7, 8, 9]

    loo = technique_splits(Technique.LOO, 4, seed=0)
    assert [s.test.tolist() for s in loo] == [[0], [1], [2], [3]]
    assert loo[0].train.tolist() == [1, 2, 3]


def test_bootstrap_makes_k_multisets():
    splits = technique_splits(Technique.BOOTSTRAP, 50, seed=3)
    assert len(splits) == 100
    assert all(s.train.size == 50 and s.test.size >= 1 for s in splits)


def test_ten_by_ten_fold_is_reseeded_per_repetition():
    splits = technique_splits(Technique.TEN_BY_TEN_FOLD, 30, seed=4)
    assert len(splits) == 100
    for r in range(10):
        tests = np.concatenate([s.test for s in splits[10 * r:10 * r + 10]])
        assert np.array_equal(np.sort(tests), np.arange(30))
    first, second = splits[:10], splits[10:20]
    assert any(a != b for a, b in zip(first, second))

    again = technique_splits(Technique.TEN_BY_TEN_FOLD, 30, seed=4)
    assert all(a == b for a, b in zip(splits, again))


def test_order_preserving_techniques_test_after_training():
    for technique in (Technique.HOLDOUT_25_75, Technique.HOLDOUT_50_50, Technique.HOLDOUT_75_25, Technique.TSCV):
        for split in technique_splits(technique, 40, seed=0):
            assert split.train.max() < split.test.min()


def test_tshvcv_uses_defaults_from_row_count():
    splits = technique_splits(Technique.TSHVCV, 40, seed=0)
    # v = 2, h = 2, s = 5
    assert splits[0].test.tolist() == [0, 1, 2, 3, 4]
    assert splits[1].test.tolist() == [5, 6, 7, 8, 9]
    assert splits[1].train.size == 40 - 4 - 4 - 1
    custom = technique_splits(Technique.TSHVCV, 40, seed=0, params=TechniqueParams(tshvcv_v=1, tshvcv_h=0, tshvcv_s=3))
    assert custom[1].test.tolist() == [3, 4, 5]


def test_too_few_rows():
    with pytest.raises(TooFewRows) as excinfo:
        technique_splits(Technique.TSCV, 8, seed=0)
    assert excinfo.value.layer == 'technique'
    with pytest.raises(TooFewRows):
        technique_splits(Technique.HOLDOUT_25_75, 3, seed=0)


def test_constant_data_predicts_full_coverage_and_zero_width():
    data = from_arrays(np.arange(20.0).reshape(-1, 2), np.full(10, 4.0))
    predicted = predict_performance(Technique.HOLDOUT_50_50, data, (0.5, 1.0), (0.9, 0.99), ForestConfig(n_trees=3))
    for cell in predicted.cells.values():
        assert cell.predicted_coverage == 1.0
        assert cell.predicted_mean_width == 0.0
        assert cell.predicted_reliable
        assert cell.n_points == 5


def test_holdout_prediction_equals_single_evaluation():
    data = noisy_data(20, 30)
    config = ForestConfig(mtry=0.5, n_trees=10, seed=6)
    predicted = predict_performance(Technique.HOLDOUT_75_25, data, (0.5,), (0.9,), config)
    (split,) = technique_splits(Technique.HOLDOUT_75_25, 30, seed=6)
    model = train_forest(data.subset(split.train), config)
    direct = evaluate(model, data.subset(split.test), 0.9)
    cell = predicted.cells[0.5, 0.9]
    assert cell.predicted_coverage == direct.coverage
    assert cell.predicted_mean_width == direct.mean_width


def test_loo_pools_point_results():
    data = noisy_data(21, 20)
    base = ForestConfig(n_trees=50, seed=2)
    predicted = predict_performance(Technique.LOO, data, (0.5, 1.0), (0.9,), base)
    for mtry in (0.5, 1.0):
        covered, widths = 0, []
        for i in range(20):
            rest = [j for j in range(20) if j != i]
            model = train_forest(data.subset(rest), ForestConfig(mtry=mtry, n_trees=50, seed=2))
            result = evaluate(model, data.subset([i]), 0.9)
            covered += int(result.point_coverage[0])
            widths.append(result.point_width[0])
        cell = predicted.cells[mtry, 0.9]
        assert cell.predicted_coverage == covered / 20
        assert cell.predicted_mean_width == pytest.approx(np.mean(widths), abs=1e-12)
        assert cell.n_points == 20


def test_pooled_coverage_is_covered_over_evaluated():
    data = noisy_data(22, 30)
    params = TechniqueParams(bootstrap_repeats=7)
    predicted = predict_performance(Technique.BOOTSTRAP, data, (1.0,), (0.9,), ForestConfig(n_trees=5), params)
    splits = technique_splits(Technique.BOOTSTRAP, 30, seed=0, params=params)
    cell = predicted.cells[1.0, 0.9]
    assert cell.n_points == sum(s.test.size for s in splits)
    assert math.isclose(cell.predicted_coverage * cell.n_points, round(cell.predicted_coverage * cell.n_points))


def test_same_seed_same_prediction():
    data = noisy_data(23, 24)
    params = TechniqueParams(kfold_repeats=2, kfold_k=4)
    base = ForestConfig(n_trees=4, seed=9)
    first = predict_performance(Technique.TEN_BY_TEN_FOLD, data, (0.5, 1.0), (0.9,), base, params)
    second = predict_performance(Technique.TEN_BY_TEN_FOLD, data, (0.5, 1.0), (0.9,), base, params)
    assert first.rows() == second.rows()


def test_impure_leaves_make_cells_unusable():
    data = from_arrays(np.zeros((10, 1)), np.arange(10.0))
    predicted = predict_performance(Technique.HOLDOUT_50_50, data, (1.0,), (0.9,), ForestConfig(n_trees=2))
    cell = predicted.cells[1.0, 0.9]
    assert not cell.usable
    assert not cell.predicted_reliable
    assert math.isnan(cell.predicted_mean_width)


def test_audit_checks_every_split():
    data = noisy_data(24, 12)
    audit = IndexAudit()
    scope = audit.scope('outer:TSCV', np.arange(12), 12)
    predict_performance(Technique.TSCV, data, (1.0,), (0.9,), ForestConfig(n_trees=2),
                        TechniqueParams(tscv_splits=3), scope)
    assert len(audit.records) == 6
    assert not audit.violations

    narrow = audit.scope('outer:TSCV', np.arange(12), 8)
    with pytest.raises(IsolationViolation):
        narrow.test(np.array([9]))
    assert audit.violations == [('outer:TSCV', 'test', 1, 9, 8)]


if __name__ == "__main__":
    pytest.main([__file__])
