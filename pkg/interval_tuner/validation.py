"""
The eight validation techniques.

A technique turns a tuning training set into predicted coverage and mean width
for every configuration on the MTRY grid at every nominal confidence. It does
so by cutting the training set into train/test splits, growing a forest per
split and configuration, and pooling the point-level results of all splits.
"""

import logging
from dataclasses import asdict, dataclass, replace
from enum import Enum

import numpy as np

from interval_tuner.data_model import (
    STREAM_SPLITS,
    SplitIndices,
    bootstrap_split,
    derive_rng,
    holdout_split,
    kfold_partition,
    tscv_splits,
    tshvcv_defaults,
    tshvcv_splits,
)
from interval_tuner.errors import (
    BadFoldCount,
    ConfigError,
    DegenerateSplit,
    IsolationViolation,
    TooFewRows,
)
from interval_tuner.forest import train_forest
from interval_tuner.metrics import evaluate_many, is_reliable

logger = logging.getLogger(__name__)

PREDICTED_COLUMNS = [
    'technique', 'mtry', 'nc', 'predicted_coverage', 'predicted_mean_width',
    'predicted_reliable', 'usable', 'n_points',
]


class Technique(Enum):
    """Validation techniques, in canonical (report row) order."""
    BOOTSTRAP = 'Bootstrap'
    TEN_BY_TEN_FOLD = '10x10fold'
    HOLDOUT_25_75 = '25-75'
    HOLDOUT_50_50 = '50-50'
    HOLDOUT_75_25 = '75-25'
    LOO = 'LOO'
    TSCV = 'TSCV'
    TSHVCV = 'TSHVCV'

    @property
    def label(self):
        return self.value

    @property
    def code(self):
        """1-based position in the canonical order; keys the technique's random stream."""
        return list(Technique).index(self) + 1

    @property
    def holdout_fraction(self):
        return _HOLDOUT_FRACTIONS.get(self)

    @property
    def order_preserving(self):
        return self not in (Technique.BOOTSTRAP, Technique.TEN_BY_TEN_FOLD, Technique.LOO)

    @classmethod
    def parse(cls, name):
        """Look a technique up by label ('50-50') or member name ('holdout_50_50')."""
        wanted = name.strip().lower().replace('/', '-')
        for technique in cls:
            if wanted in (technique.label.lower(), technique.name.lower()):
                return technique
        raise ConfigError(f"unknown technique '{name}'")


_HOLDOUT_FRACTIONS = {
    Technique.HOLDOUT_25_75: 0.25,
    Technique.HOLDOUT_50_50: 0.50,
    Technique.HOLDOUT_75_25: 0.75,
}


def canonical(techniques):
    """Return the techniques sorted into canonical order, without duplicates."""
    chosen = set(techniques)
    return [t for t in Technique if t in chosen]


@dataclass(frozen=True)
class TechniqueParams:
    """
    Parameters of the resampling techniques.

    ``tshvcv_v``, ``tshvcv_h`` and ``tshvcv_s`` default (when None) to
    v = ceil(0.05 m), h = v and s = 2v + 1 for the m rows being split.
    """
    bootstrap_repeats: int = 100
    kfold_repeats: int = 10
    kfold_k: int = 10
    tscv_initial_fraction: float = 0.5
    tscv_splits: int = 10
    tshvcv_v: int = None
    tshvcv_h: int = None
    tshvcv_s: int = None

    def validate(self):
        """
        Check the repeat, fold and split counts.

        The TSHVCV sizes are checked later against the rows they split.
        """
        if self.bootstrap_repeats < 1:
            raise ConfigError("bootstrap_repeats must be positive")
        if self.kfold_repeats < 1 or self.kfold_k < 2:
            raise ConfigError("kfold_repeats must be positive and kfold_k at least 2")
        if not 0.0 < self.tscv_initial_fraction < 1.0 or self.tscv_splits < 1:
            raise ConfigError("tscv needs initial_fraction in (0, 1) and at least one split")
        return self

    def tshvcv_for(self, m):
        v, h, s = tshvcv_defaults(m)
        return (
            v if self.tshvcv_v is None else self.tshvcv_v,
            h if self.tshvcv_h is None else self.tshvcv_h,
            s if self.tshvcv_s is None else self.tshvcv_s,
        )

    def as_dict(self):
        return asdict(self)


def _leave_one_out(m):
    indices = np.arange(m)
    return [SplitIndices(np.delete(indices, i), indices[i:i + 1]) for i in range(m)]


def technique_splits(technique, m, seed, params=None):
    """
    Train/test splits a technique makes on m rows.

    Parameters
    ----------
    technique : Technique
    m : int
        Number of rows in the tuning training set.
    seed : int
        Run seed; randomized techniques draw from streams derived from
        (seed, technique). 10x10-fold re-seeds every repetition.
    params : TechniqueParams, optional

    Returns
    -------
    list of SplitIndices
        Every split trains on at least 2 rows and tests on at least 1.
    """
    params = (params or TechniqueParams()).validate()
    try:
        if technique.holdout_fraction is not None:
            splits = [holdout_split(m, technique.holdout_fraction)]
        elif technique is Technique.TSCV:
            splits = tscv_splits(m, params.tscv_initial_fraction, params.tscv_splits)
        elif technique is Technique.TSHVCV:
            splits = tshvcv_splits(m, *params.tshvcv_for(m))
        elif technique is Technique.TEN_BY_TEN_FOLD:
            splits = []
            for repetition in range(params.kfold_repeats):
                rng = derive_rng(seed, STREAM_SPLITS, technique.code, repetition)
                splits.extend(kfold_partition(m, params.kfold_k, rng))
        elif technique is Technique.BOOTSTRAP:
            rng = derive_rng(seed, STREAM_SPLITS, technique.code)
            splits = [bootstrap_split(m, rng) for _ in range(params.bootstrap_repeats)]
        else:
            splits = _leave_one_out(m)
    except (DegenerateSplit, BadFoldCount) as exc:
        raise TooFewRows(f"{technique.label} cannot split {m} rows: {exc}") from exc

    for split in splits:
        if split.train.size < 2 or split.test.size < 1:
            raise TooFewRows(
                f"{technique.label} on {m} rows makes a split with "
                f"{split.train.size} train and {split.test.size} test rows"
            )
    return splits


class IndexAudit:
    """
    Records which global row indices each computation layer trained and
    evaluated on, and rejects any index beyond the layer's visible range.
    """

    def __init__(self):
        self.records = []

    def scope(self, layer, train_origin, train_limit, test_origin=None, test_limit=None):
        """
        Bind a layer to the global indices of its local rows.

        Parameters
        ----------
        layer : str
            Name recorded with every index set.
        train_origin : numpy.ndarray
            Global index of each local training row.
        train_limit : int
            Training indices must be below this global index.
        test_origin, test_limit : optional
            Same for evaluation rows; default to the training ones.
        """
        return AuditScope(
            self, layer,
            np.asarray(train_origin), train_limit,
            np.asarray(train_origin if test_origin is None else test_origin),
            train_limit if test_limit is None else test_limit,
        )

    def check(self, layer, role, global_indices, limit):
        global_indices = np.asarray(global_indices)
        highest = int(global_indices.max()) if global_indices.size else -1
        self.records.append((layer, role, int(global_indices.size), highest, int(limit)))
        if highest >= limit:
            raise IsolationViolation(
                f"{layer} {role} used row {highest}, beyond its limit {limit}"
            )

    @property
    def violations(self):
        return [r for r in self.records if r[3] >= r[4]]


class AuditScope:
    """An IndexAudit bound to one layer's index mapping."""

    def __init__(self, audit, layer, train_origin, train_limit, test_origin, test_limit):
        self.audit = audit
        self.layer = layer
        self.train_origin = train_origin
        self.train_limit = train_limit
        self.test_origin = test_origin
        self.test_limit = test_limit

    def train(self, local_indices):
        self.audit.check(self.layer, 'train', self.train_origin[local_indices], self.train_limit)

    def test(self, local_indices):
        self.audit.check(self.layer, 'test', self.test_origin[local_indices], self.test_limit)


@dataclass(frozen=True)
class PredictedCell:
    """Predicted performance of one (mtry, nc) grid cell."""
    technique: Technique
    mtry: float
    nc: float
    predicted_coverage: float
    predicted_mean_width: float
    predicted_reliable: bool
    usable: bool
    n_points: int

    def as_row(self):
        return {
            'technique': self.technique.label,
            'mtry': self.mtry,
            'nc': self.nc,
            'predicted_coverage': self.predicted_coverage,
            'predicted_mean_width': self.predicted_mean_width,
            'predicted_reliable': self.predicted_reliable,
            'usable': self.usable,
            'n_points': self.n_points,
        }


@dataclass(frozen=True, eq=False)
class PredictedPerformance:
    """Predicted performance of every grid cell for one technique."""
    technique: Technique
    cells: dict

    def at(self, nc):
        """Cells at one nominal confidence, keyed by mtry."""
        return {mtry: cell for (mtry, cell_nc), cell in self.cells.items() if cell_nc == nc}

    def rows(self):
        return [self.cells[key].as_row() for key in sorted(self.cells)]


def predict_performance(technique, train, mtry_grid, ncs, base_config, params=None, audit=None):
    """
    Predict coverage and mean width of every grid configuration.

    Parameters
    ----------
    technique : Technique
    train : Dataset
        The tuning training set; the technique never sees anything else.
    mtry_grid : sequence of float
    ncs : sequence of float
    base_config : ForestConfig
        Every forest uses this configuration with its mtry replaced.
    params : TechniqueParams, optional
    audit : AuditScope, optional
        Receives the local train and test indices of every split.

    Returns
    -------
    PredictedPerformance
        Coverage is the fraction of all held-out evaluations covered; mean
        width averages all held-out point widths. A configuration with a
        failed row under the 'error' policy is unusable and never predicted
        reliable.
    """
    ncs = [float(nc) for nc in ncs]
    splits = technique_splits(technique, train.m, base_config.seed, params)
    logger.info("%s: %d splits x %d configurations on %d rows",
                technique.label, len(splits), len(mtry_grid), train.m)

    # Counts and widths are pooled over splits, not averaged per split.
    covered = {(mtry, nc): 0 for mtry in mtry_grid for nc in ncs}
    widths = {(mtry, nc): [] for mtry in mtry_grid for nc in ncs}
    usable = {mtry: True for mtry in mtry_grid}
    n_points = 0

    for split in splits:
        if audit is not None:
            audit.train(split.train)
            audit.test(split.test)
        fit, held = train.subset(split.train), train.subset(split.test)
        n_points += held.m
        for mtry in mtry_grid:
            model = train_forest(fit, replace(base_config, mtry=mtry))
            for nc, performance in evaluate_many(model, held, ncs).items():
                usable[mtry] = usable[mtry] and performance.usable
                covered[mtry, nc] += int(performance.point_coverage.sum())
                widths[mtry, nc].append(performance.point_width)

    cells = {}
    for mtry in mtry_grid:
        # One failed split makes the configuration unusable at every nc.
        for nc in ncs:
            coverage = covered[mtry, nc] / n_points
            mean_width = float(np.mean(np.concatenate(widths[mtry, nc]))) if usable[mtry] else float('nan')
            if not usable[mtry]:
                logger.warning("%s: mtry=%s is unusable at nc=%s", technique.label, mtry, nc)
            cells[mtry, nc] = PredictedCell(
                technique=technique,
                mtry=mtry,
                nc=nc,
                predicted_coverage=coverage,
                predicted_mean_width=mean_width,
                predicted_reliable=usable[mtry] and is_reliable(coverage, nc),
                usable=usable[mtry],
                n_points=n_points,
            )
    return PredictedPerformance(technique, cells)
