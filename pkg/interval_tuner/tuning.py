"""
MTRY tuning: the grid search, the selection heuristic and the scenario tags.

A run fixes one order-preserving holdout of the dataset (the evaluation
frame). Each validation technique sees only the frame's training rows and
predicts every configuration's coverage and width; the selection heuristic
picks a configuration from those predictions; the actual performance on the
frame's test rows then decides the tag.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from interval_tuner.data_model import holdout_split
from interval_tuner.errors import DegenerateSplit, TooFewRows
from interval_tuner.forest import ForestConfig, train_forest
from interval_tuner.metrics import evaluate_many
from interval_tuner.stats import TestResult, friedman
from interval_tuner.validation import TechniqueParams, canonical, predict_performance

logger = logging.getLogger(__name__)

DEFAULT_NCS = (0.90, 0.95, 0.99)
OUTER_TRAIN_FRACTION = 0.66

BENEFICIAL = 'beneficial'
NEUTRAL = 'neutral'
COUNTERPRODUCTIVE = 'counterproductive'


class TuningPotential(IntEnum):
    """Potential benefit of tuning at one nc; larger values mean more benefit."""
    E = 0
    NSB = 1
    AU = 2
    SB = 3
    DU = 4

    @property
    def benefit_rank(self):
        return int(self)


class Benefit(IntEnum):
    """Actual benefit of tuning with a technique; larger values mean more benefit."""
    TU = 0
    SW = 1
    NKU = 2
    NSD = 3
    PU = 4
    APU = 5
    SB = 6
    DU = 7

    @property
    def benefit_rank(self):
        return int(self)

    @property
    def category(self):
        if self >= Benefit.PU:
            return BENEFICIAL
        if self is Benefit.NSD:
            return NEUTRAL
        return COUNTERPRODUCTIVE


def mtry_grid():
    """MTRY values 0.05, 0.10, ..., 1.00 built as i / 20."""
    return tuple(i / 20 for i in range(1, 21))


def nc_label(nc):
    return f"NC{int(round(100 * nc))}"


def compare_widths(first, second):
    """
    Friedman's test on two configurations' point widths, test rows as blocks.

    A single test row cannot be ranked; the comparison is then reported as
    degenerate.
    """
    first = np.asarray(first, dtype=float)
    if first.shape[0] < 2:
        return TestResult(0.0, 1, 1.0, False, True, 1.0, int(first.shape[0]))
    return friedman(np.column_stack([first, np.asarray(second, dtype=float)]))


def select_configuration(predicted):
    """
    Pick the usable, predicted-reliable configuration with the smallest predicted width.

    Parameters
    ----------
    predicted : dict
        Maps mtry to the PredictedCell at one nc.

    Returns
    -------
    float or None
        Ties go to the smaller mtry; None when nothing is predicted reliable.
    """
    candidates = [cell for cell in predicted.values() if cell.usable and cell.predicted_reliable]
    if not candidates:
        return None
    return min(candidates, key=lambda cell: (cell.predicted_mean_width, cell.mtry)).mtry


@dataclass(frozen=True)
class PotentialOutcome:
    """Potential tuning benefit at one nc, with the comparison that decided it."""
    nc: float
    tag: TuningPotential
    default_mtry: float
    best_mtry: float = None
    test: TestResult = None


def assess_potential(actual, default_mtry=1.0, nc=float('nan')):
    """
    Tag the potential benefit of tuning from the actual grid performance.

    Parameters
    ----------
    actual : dict
        Maps mtry to ConfigPerformance at one nc; must hold ``default_mtry``.
    default_mtry : float

    Returns
    -------
    PotentialOutcome
    """
    default = actual[default_mtry]
    others = [perf for mtry, perf in actual.items() if mtry != default_mtry]
    if not default.reliable:
        tag = TuningPotential.DU if any(p.reliable for p in others) else TuningPotential.AU
        return PotentialOutcome(nc, tag, default_mtry)

    narrower = [p for p in others if p.reliable and p.mean_width < default.mean_width]
    if not narrower:
        return PotentialOutcome(nc, TuningPotential.E, default_mtry)

    # Test against the narrowest reliable configuration only.
    best = min(narrower, key=lambda p: (p.mean_width, p.mtry))
    test = compare_widths(default.point_width, best.point_width)
    tag = TuningPotential.SB if test.significant else TuningPotential.NSB
    return PotentialOutcome(nc, tag, default_mtry, best.mtry, test)


def rq1_tag(actual, default_mtry=1.0):
    """Potential-benefit tag (DU, SB, AU, NSB or E) of one nc's actual grid."""
    return assess_potential(actual, default_mtry).tag


def judge_selection(selected_mtry, actual, default_mtry=1.0):
    """
    Tag the benefit of a selection against the default configuration.

    Returns
    -------
    tuple
        (Benefit, TestResult or None). The test is only run when the default
        and the selected configuration are both actually reliable.
    """
    default_ok = actual[default_mtry].reliable
    # The technique abstained: nothing was predicted reliable.
    if selected_mtry is None:
        if default_ok:
            return Benefit.TU, None
        if any(perf.reliable for perf in actual.values()):
            return Benefit.PU, None
        return Benefit.APU, None

    selected = actual[selected_mtry]
    if not default_ok:
        return (Benefit.DU if selected.reliable else Benefit.NKU), None
    if not selected.reliable:
        return Benefit.TU, None

    # Both reliable; only a significant width difference counts.
    default = actual[default_mtry]
    test = compare_widths(default.point_width, selected.point_width)
    if not test.significant or selected.mean_width == default.mean_width:
        return Benefit.NSD, test
    return (Benefit.SB if selected.mean_width < default.mean_width else Benefit.SW), test


def rq2_tag(selected_mtry, actual, default_mtry=1.0):
    """Benefit tag (DU, SB, APU, PU, NSD, NKU, SW or TU) of one selection."""
    return judge_selection(selected_mtry, actual, default_mtry)[0]


@dataclass(frozen=True, eq=False)
class TuningOutcome:
    """Result of tuning with one technique at one nc."""
    nc: float
    technique: object
    predicted: dict
    actual: dict
    selected_mtry: float
    default_mtry: float
    tag: Benefit
    test: TestResult = None

    def as_row(self):
        chosen = self.selected_mtry
        cell = self.predicted.get(chosen) if chosen is not None else None
        perf = self.actual.get(chosen) if chosen is not None else None
        default = self.actual[self.default_mtry]
        return {
            'technique': self.technique.label,
            'nc': self.nc,
            'selected_mtry': chosen,
            'tag': self.tag.name,
            'predicted_coverage': cell.predicted_coverage if cell else None,
            'predicted_mean_width': cell.predicted_mean_width if cell else None,
            'actual_coverage': perf.coverage if perf else None,
            'actual_mean_width': perf.mean_width if perf else None,
            'default_coverage': default.coverage,
            'default_mean_width': default.mean_width,
            'statistic': self.test.statistic if self.test else None,
            'p_value': self.test.p_value if self.test else None,
            'degenerate': self.test.degenerate if self.test else None,
        }


def actual_performance(train, test, grid, ncs, base):
    """
    Train every grid configuration on ``train`` and evaluate it on ``test``.

    Returns
    -------
    dict
        Maps nc to a dict mapping mtry to ConfigPerformance.
    """
    by_nc = {float(nc): {} for nc in ncs}
    for mtry in grid:
        model = train_forest(train, replace(base, mtry=mtry))
        for nc, performance in evaluate_many(model, test, ncs).items():
            by_nc[nc][mtry] = performance
    return by_nc


class TuningFrame:
    """
    One train/test pair with everything computed on it cached.

    ``run_tuning`` and ``run_meta`` share frames, so a technique evaluated in
    the same frame twice gives the same predictions and the same tags.

    Parameters
    ----------
    train, test : Dataset
        Consecutive blocks of rows: the test rows follow the training rows.
    base : ForestConfig
        Forest settings; ``base.mtry`` is the default configuration.
    ncs : sequence of float
    grid : sequence of float, optional
        Defaults to ``mtry_grid()``. The default mtry is always added.
    params : TechniqueParams, optional
    audit : IndexAudit, optional
    layer : str
        'outer' for the evaluation frame, 'meta' for a meta frame.
    """

    def __init__(self, train, test, base, ncs=DEFAULT_NCS, grid=None, params=None,
                 audit=None, layer='outer'):
        self.train = train
        self.test = test
        self.base = base.validate()
        self.ncs = tuple(float(nc) for nc in ncs)
        self.grid = tuple(sorted(set(grid or mtry_grid()) | {base.mtry}))
        self.params = (params or TechniqueParams()).validate()
        self.audit = audit
        self.layer = layer
        self._actual = None
        self._predicted = {}
        self._outcomes = {}

    @classmethod
    def holdout(cls, data, base, ncs=DEFAULT_NCS, grid=None, params=None,
                train_fraction=OUTER_TRAIN_FRACTION, audit=None, layer='outer'):
        """Cut ``data`` with an order-preserving holdout and wrap the halves in a frame."""
        try:
            split = holdout_split(data.m, train_fraction)
        except DegenerateSplit as exc:
            raise TooFewRows(str(exc), layer=layer) from exc
        if split.train.size < 2:
            raise TooFewRows(f"holdout of {data.m} rows leaves {split.train.size} training rows", layer=layer)
        logger.info("%s holdout: %d train rows, %d test rows", layer, split.train.size, split.test.size)
        return cls(data.subset(split.train), data.subset(split.test), base, ncs, grid, params, audit, layer)

    @property
    def default_mtry(self):
        return self.base.mtry

    @property
    def boundary(self):
        """Global index of the first test row."""
        return self.train.m

    def _scope(self, name, test_visible):
        if self.audit is None:
            return None
        train_origin = np.arange(self.train.m)
        if not test_visible:
            return self.audit.scope(f"{self.layer}:{name}", train_origin, self.boundary)
        return self.audit.scope(
            f"{self.layer}:{name}", train_origin, self.boundary,
            test_origin=self.boundary + np.arange(self.test.m),
            test_limit=self.boundary + self.test.m,
        )

    def actual(self):
        """Actual grid performance, keyed by nc then mtry."""
        if self._actual is None:
            scope = self._scope('actual', test_visible=True)
            if scope is not None:
                scope.train(np.arange(self.train.m))
                scope.test(np.arange(self.test.m))
            self._actual = actual_performance(self.train, self.test, self.grid, self.ncs, self.base)
        return self._actual

    def predicted(self, technique):
        """PredictedPerformance of one technique on the frame's training rows."""
        if technique not in self._predicted:
            try:
                self._predicted[technique] = predict_performance(
                    technique, self.train, self.grid, self.ncs, self.base,
                    self.params, self._scope(technique.label, test_visible=False),
                )
            except TooFewRows as exc:
                if self.layer == 'outer':
                    raise
                raise TooFewRows(exc.detail, layer=f"{self.layer}-technique") from exc
        return self._predicted[technique]

    def potential(self, nc):
        return assess_potential(self.actual()[nc], self.default_mtry, nc)

    def outcome(self, technique, nc):
        """Select with ``technique`` at ``nc`` and tag the selection."""
        key = (technique, nc)
        if key not in self._outcomes:
            predicted = self.predicted(technique).at(nc)
            actual = self.actual()[nc]
            selected = select_configuration(predicted)
            tag, test = judge_selection(selected, actual, self.default_mtry)
            self._outcomes[key] = TuningOutcome(
                nc, technique, predicted, actual, selected, self.default_mtry, tag, test,
            )
        return self._outcomes[key]


@dataclass(eq=False)
class TuningResult:
    """Potential-benefit row and per-technique outcomes of one tuning run."""
    frame: TuningFrame
    techniques: list
    potentials: dict = field(default_factory=dict)
    outcomes: dict = field(default_factory=dict)

    @property
    def ncs(self):
        return self.frame.ncs

    def tag_matrix(self):
        """Tags as rows of techniques by columns of ncs."""
        return [[self.outcomes[t, nc].tag for nc in self.ncs] for t in self.techniques]


def run_tuning(data, techniques, ncs=DEFAULT_NCS, base=None, params=None,
               train_fraction=OUTER_TRAIN_FRACTION, audit=None, grid=None, frame=None):
    """
    Tune MTRY with each technique at each nc and tag the outcome.

    Parameters
    ----------
    data : Dataset
        Rows in chronological order.
    techniques : sequence of Technique
    ncs : sequence of float
    base : ForestConfig, optional
        Forest settings; its mtry is the default configuration.
    params : TechniqueParams, optional
    train_fraction : float
        Share of rows in the evaluation frame's training block.
    audit : IndexAudit, optional
    grid : sequence of float, optional
    frame : TuningFrame, optional
        Reuse an existing evaluation frame instead of cutting ``data``.

    Returns
    -------
    TuningResult
    """
    if frame is None:
        frame = TuningFrame.holdout(data, base or ForestConfig(), ncs, grid, params,
                                    train_fraction, audit)
    result = TuningResult(frame, canonical(techniques))
    for nc in frame.ncs:
        result.potentials[nc] = frame.potential(nc)
    for technique in result.techniques:
        for nc in frame.ncs:
            result.outcomes[technique, nc] = frame.outcome(technique, nc)
        logger.info("%s: %s", technique.label,
                    " ".join(result.outcomes[technique, nc].tag.name for nc in frame.ncs))
    return result
