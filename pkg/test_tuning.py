"""
Tests for the MTRY grid, selection and the benefit tags.
"""

from itertools import product

import numpy as np
import pytest

from interval_tuner.data_model import from_arrays
from interval_tuner.errors import TooFewRows
from interval_tuner.forest import ForestConfig
from interval_tuner.metrics import ConfigPerformance
from interval_tuner.reports import detail_table
from interval_tuner.tuning import (
    Benefit,
    TuningPotential,
    assess_potential,
    judge_selection,
    mtry_grid,
    rq1_tag,
    rq2_tag,
    run_tuning,
    select_configuration,
)
from interval_tuner.validation import IndexAudit, PredictedCell, Technique, TechniqueParams

N = 20
NC = 0.9

# Point widths against a default of 5 everywhere.
NARROWER = np.full(N, 1.0)
WIDER = np.full(N, 9.0)
MIXED_NARROWER = np.tile([1.0, 6.0], N // 2)


def perf(mtry, reliable, widths=None):
    widths = np.full(N, 5.0) if widths is None else np.asarray(widths, dtype=float)
    covered = np.ones(N, dtype=bool) if reliable else np.arange(N) < N // 2
    coverage = float(covered.mean())
    return ConfigPerformance(mtry, NC, covered, widths, coverage, float(widths.mean()),
                             coverage >= NC, True)


def cell(mtry, width, reliable=True, usable=True):
    return PredictedCell(Technique.LOO, mtry, NC, 1.0 if reliable else 0.5, width,
                         reliable and usable, usable, N)


def test_mtry_grid():
    grid = mtry_grid()
    assert len(grid) == 20
    assert grid[-1] == 1.0
    assert grid[6] == 0.35
    assert grid == tuple(i / 20 for i in range(1, 21))


def test_select_configuration():
    assert select_configuration({0.2: cell(0.2, 3.1), 0.4: cell(0.4, 2.9)}) == 0.4
    assert select_configuration({0.2: cell(0.2, 1.0, reliable=False)}) is None
    assert select_configuration({0.6: cell(0.6, 2.0), 0.25: cell(0.25, 2.0)}) == 0.25
    assert select_configuration({0.2: cell(0.2, 0.5, usable=False), 0.4: cell(0.4, 2.0)}) == 0.4


def test_rq1_tags():
    assert rq1_tag({1.0: perf(1.0, False), 0.5: perf(0.5, True)}) is TuningPotential.DU
    assert rq1_tag({1.0: perf(1.0, False), 0.5: perf(0.5, False)}) is TuningPotential.AU
    assert rq1_tag({1.0: perf(1.0, True), 0.5: perf(0.5, True)}) is TuningPotential.E
    assert rq1_tag({1.0: perf(1.0, True), 0.5: perf(0.5, True, WIDER)}) is TuningPotential.E
    assert rq1_tag({1.0: perf(1.0, True), 0.5: perf(0.5, True, NARROWER)}) is TuningPotential.SB
    assert rq1_tag({1.0: perf(1.0, True), 0.5: perf(0.5, True, MIXED_NARROWER)}) is TuningPotential.NSB


def test_rq1_compares_against_the_narrowest_reliable_config():
    actual = {
        1.0: perf(1.0, True),
        0.5: perf(0.5, True, MIXED_NARROWER),
        0.25: perf(0.25, True, NARROWER),
        0.1: perf(0.1, False, np.zeros(N)),
    }
    outcome = assess_potential(actual, 1.0)
    assert outcome.best_mtry == 0.25
    assert outcome.tag is TuningPotential.SB


def expected_rq2(selection, selected_is_default, default_ok, selected_ok, any_ok, direction):
    """The benefit definitions, written out case by case."""
    if not selection:
        if default_ok:
            return Benefit.TU
        return Benefit.PU if any_ok else Benefit.APU
    if not default_ok and selected_ok:
        return Benefit.DU
    if not default_ok and not selected_ok:
        return Benefit.NKU
    if default_ok and not selected_ok:
        return Benefit.TU
    if selected_is_default or direction == 'same':
        return Benefit.NSD
    return Benefit.SB if direction == 'narrower' else Benefit.SW


def test_rq2_truth_table():
    widths = {'same': np.full(N, 5.0), 'narrower': NARROWER, 'wider': WIDER,
              'mixed': np.tile([4.0, 6.0], N // 2)}
    seen = set()
    for selection, selected_is_default, default_ok, selected_ok, other_ok, direction in product(
            (False, True), (False, True), (False, True), (False, True), (False, True), widths):
        if selected_is_default and (selected_ok != default_ok or direction != 'same'):
            continue
        actual = {1.0: perf(1.0, default_ok), 0.25: perf(0.25, other_ok)}
        if not selected_is_default:
            actual[0.5] = perf(0.5, selected_ok, widths[direction])
        selected = (1.0 if selected_is_default else 0.5) if selection else None
        any_ok = any(p.reliable for p in actual.values())
        expected = expected_rq2(selection, selected_is_default, default_ok, selected_ok, any_ok,
                                'same' if direction == 'mixed' else direction)
        tag = rq2_tag(selected, actual, 1.0)
        assert tag is expected, (selection, selected_is_default, default_ok, selected_ok, other_ok, direction)
        seen.add(tag)
    assert seen == set(Benefit)


def test_selected_default_is_no_significant_difference():
    actual = {1.0: perf(1.0, True, NARROWER)}
    tag, test = judge_selection(1.0, actual, 1.0)
    assert tag is Benefit.NSD
    assert test.degenerate
    assert test.p_value == 1.0


def test_benefit_order():
    assert sorted(Benefit, reverse=True) == [
        Benefit.DU, Benefit.SB, Benefit.APU, Benefit.PU, Benefit.NSD, Benefit.NKU, Benefit.SW, Benefit.TU,
    ]
    assert [b.category for b in sorted(Benefit, reverse=True)] == (
        ['beneficial'] * 4 + ['neutral'] + ['counterproductive'] * 3
    )
    assert sorted(TuningPotential, reverse=True) == [
        TuningPotential.DU, TuningPotential.SB, TuningPotential.AU, TuningPotential.NSB, TuningPotential.E,
    ]
    assert Benefit.DU.benefit_rank == 7 and Benefit.TU.benefit_rank == 0


SMALL = TechniqueParams(bootstrap_repeats=5, kfold_repeats=1)


def test_constant_response_is_neutral_everywhere():
    data = from_arrays(np.arange(60.0).reshape(30, 2), np.full(30, 2.0))
    result = run_tuning(data, list(Technique), base=ForestConfig(n_trees=3), params=SMALL)
    assert len(result.tag_matrix()) == 8
    assert all(len(row) == 3 for row in result.tag_matrix())
    assert all(tag is Benefit.NSD for row in result.tag_matrix() for tag in row)
    assert all(result.potentials[nc].tag is TuningPotential.E for nc in result.ncs)


def default_misses_block():
    """
    60 rows whose held-out third only a narrow-mtry forest covers.

    x0 separates the training responses perfectly, so every default tree
    splits on it first and sends the held-out rows (x0 = 0) to a leaf of
    zeros, while their responses are 10. A single sampled feature often
    splits on x1 instead, which places the held-out rows among the tens.
    """
    low = [(0.0, x1, 0.0) for x1 in range(20)]
    tens = [(1.0, x1, 10.0) for x1 in range(20, 36)]
    top = [(0.0, x1, 0.0) for x1 in range(36, 40)]
    held = [(0.0, 25.0 + 0.25 * k, 10.0) for k in range(20)]
    rows = np.array(low + tens + top + held, dtype=float)
    return from_arrays(rows[:, :2], rows[:, 2])


def test_default_unreliable_while_narrow_mtry_covers():
    result = run_tuning(default_misses_block(), [Technique.HOLDOUT_50_50], (0.9,),
                        ForestConfig(n_trees=60, seed=3), grid=(0.05, 1.0))
    assert result.frame.boundary == 40
    actual = result.frame.actual()[0.9]
    assert actual[1.0].coverage == 0.0
    assert actual[0.05].coverage == 1.0
    assert actual[0.05].reliable
    assert result.potentials[0.9].tag is TuningPotential.DU


def test_techniques_never_see_the_test_block():
    rng = np.random.default_rng(30)
    X = rng.normal(size=(30, 2))
    data = from_arrays(X, X[:, 0] + rng.normal(size=30))
    audit = IndexAudit()
    result = run_tuning(data, [Technique.HOLDOUT_50_50, Technique.TSCV, Technique.LOO], (0.9,),
                        ForestConfig(n_trees=2), SMALL, audit=audit, grid=(0.5, 1.0))
    boundary = result.frame.boundary
    assert boundary == 20
    technique_records = [r for r in audit.records if not r[0].endswith(':actual')]
    assert technique_records
    assert all(highest < boundary for _, _, _, highest, _ in technique_records)
    assert not audit.violations


def test_outer_holdout_too_small():
    data = from_arrays([[0.0], [1.0]], [1.0, 2.0])
    with pytest.raises(TooFewRows) as excinfo:
        run_tuning(data, [Technique.LOO])
    assert excinfo.value.layer == 'outer'


def test_tuning_is_deterministic_across_workers():
    rng = np.random.default_rng(31)
    X = rng.normal(size=(36, 3))
    data = from_arrays(X, X[:, 1] * 3 + rng.standard_t(3, size=36))
    techniques = [Technique.HOLDOUT_50_50, Technique.TSCV, Technique.TEN_BY_TEN_FOLD]
    grid = (0.35, 0.7, 1.0)
    params = TechniqueParams(kfold_repeats=2, kfold_k=4, tscv_splits=4)
    serial = run_tuning(data, techniques, base=ForestConfig(n_trees=4, seed=1), params=params, grid=grid)
    again = run_tuning(data, techniques, base=ForestConfig(n_trees=4, seed=1), params=params, grid=grid)
    parallel = run_tuning(data, techniques, base=ForestConfig(n_trees=4, seed=1, n_jobs=2), params=params, grid=grid)
    assert detail_table(serial).equals(detail_table(again))
    assert detail_table(serial).equals(detail_table(parallel))
    assert serial.tag_matrix() == parallel.tag_matrix()


if __name__ == "__main__":
    pytest.main([__file__])
