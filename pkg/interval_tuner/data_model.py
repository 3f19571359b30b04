"""
Dataset representation, CSV ingestion and the index-set split primitives.

Every validation technique is assembled from the split functions in this
module. The split functions are pure: they depend only on their arguments and,
for the randomized ones, on the state of the ``numpy.random.Generator`` passed
in.
"""

import json
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import pandas as pd

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

logger = logging.getLogger(__name__)

ROLE_NUMERIC = 'feature_numeric'
ROLE_CATEGORICAL = 'feature_categorical'
ROLE_RESPONSE = 'response'
ROLE_IGNORE = 'ignore'

# Namespaces for derived random streams.
STREAM_TREE = 1
STREAM_SPLITS = 2

BOOTSTRAP_MAX_ATTEMPTS = 100


def derive_rng(seed, *keys):
    """
    Build an independent random stream from a seed and integer keys.

    Parameters
    ----------
    seed : int
        Unsigned 64-bit run seed.
    *keys : int
        Non-negative integers identifying the stream (tree index, technique
        code, repetition, ...).

    Returns
    -------
    numpy.random.Generator
        Generator seeded by ``SeedSequence([seed, *keys])``; identical on every
        platform.
    """
    entropy = [int(seed)] + [int(key) for key in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def ceil_count(fraction, m):
    """
    Count of rows a fraction of m stands for.

    Parameters
    ----------
    fraction : float
        Share of the rows, usually a decimal such as 0.66.
    m : int
        Row count.

    Returns
    -------
    int
        ceil(fraction * m), with the product rounded to 9 decimals first so
        that 0.66 * 50 counts as 33, not 34.
    """
    return int(math.ceil(round(fraction * m, 9)))


@dataclass(frozen=True)
class IngestionConfig:
    """Which CSV column plays which role."""
    response: str
    order_by: str = None
    categorical: tuple = ()
    ignore: tuple = ()
    project: str = None

    def validate(self):
        """
        Check that the config names a response and gives each column one role.

        Returns
        -------
        IngestionConfig
            self, so calls can be chained.

        Raises
        ------
        ConfigError
        """
        if not self.response:
            raise ConfigError("ingestion config must name a response column")
        named = [self.response] + list(self.categorical) + list(self.ignore)
        if self.order_by:
            named.append(self.order_by)
        if len(named) != len(set(named)):
            raise ConfigError("a column may play only one role in the ingestion config")
        return self


def load_ingestion_config(path):
    """
    Read an ingestion config from a JSON file.

    Parameters
    ----------
    path : str or pathlib.Path
        JSON object with key ``response`` and optional keys ``order_by``,
        ``categorical``, ``ignore`` and ``project``.

    Returns
    -------
    IngestionConfig
    """
    try:
        raw = json.loads(Path(path).read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read ingestion config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"ingestion config {path} must be a JSON object")

    known = {f.name for f in fields(IngestionConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown ingestion config keys: {', '.join(unknown)}")
    if 'response' not in raw:
        raise ConfigError("ingestion config must name a response column")

    config = IngestionConfig(
        response=raw['response'],
        order_by=raw.get('order_by'),
        categorical=tuple(raw.get('categorical', ())),
        ignore=tuple(raw.get('ignore', ())),
        project=raw.get('project'),
    )
    return config.validate()


@dataclass(frozen=True)
class ColumnSchema:
    """Column names, roles and categorical levels of an ingested CSV."""
    columns: tuple
    roles: dict
    levels: dict = field(default_factory=dict)
    feature_names: tuple = ()
    order_by: str = None

    @property
    def feature_count(self):
        return len(self.feature_names)

    @property
    def response(self):
        return next(name for name in self.columns if self.roles[name] == ROLE_RESPONSE)


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Feature rows plus responses, immutable once built.

    Attributes
    ----------
    X : numpy.ndarray
        Read-only (m, feature_count) float array.
    y : numpy.ndarray
        Read-only (m,) float array.
    schema : ColumnSchema
    ordered : bool
        True when the rows are in chronological order.
    """
    X: np.ndarray
    y: np.ndarray
    schema: ColumnSchema
    ordered: bool = True

    def __post_init__(self):
        X = np.array(self.X, dtype=float, ndmin=2)
        y = np.array(self.y, dtype=float).ravel()
        if y.size == 0:
            raise EmptyDataset("a dataset needs at least one row")
        if X.shape[0] != y.shape[0]:
            raise ConfigError(f"{X.shape[0]} feature rows but {y.shape[0]} responses")
        if X.shape[1] != self.schema.feature_count:
            raise ConfigError(
                f"rows have {X.shape[1]} features, schema declares {self.schema.feature_count}"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise NonNumeric("dataset values must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'y', y)

    @property
    def m(self):
        return self.y.shape[0]

    @property
    def feature_count(self):
        return self.X.shape[1]

    def subset(self, indices):
        """Return the rows at ``indices`` (repeats allowed) as a new Dataset."""
        indices = np.asarray(indices, dtype=int)
        return Dataset(self.X[indices], self.y[indices], self.schema, self.ordered)


def from_arrays(X, y, feature_names=None, ordered=True):
    """Wrap in-memory arrays as a Dataset with an all-numeric schema."""
    X = np.array(X, dtype=float, ndmin=2)
    if feature_names is None:
        feature_names = tuple(f"x{j}" for j in range(X.shape[1]))
    columns = tuple(feature_names) + ('y',)
    roles = {name: ROLE_NUMERIC for name in feature_names}
    roles['y'] = ROLE_RESPONSE
    schema = ColumnSchema(columns=columns, roles=roles, feature_names=tuple(feature_names))
    return Dataset(X, y, schema, ordered)


def _parse_numeric(frame, column):
    values = pd.to_numeric(frame[column], errors='coerce').to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.argmax(bad))
        raise NonNumeric(
            f"column '{column}' row {row + 1}: cannot parse {frame[column].iloc[row]!r} as a number"
        )
    return values


def _ordering_key(series):
    numeric = pd.to_numeric(series, errors='coerce')
    if not numeric.isna().any():
        return numeric.to_numpy(dtype=float)
    try:
        return pd.to_datetime(series).to_numpy()
    except (ValueError, TypeError):
        return series.to_numpy(dtype=str)


def load_csv(path, config):
    """
    Load a regression dataset from a UTF-8 CSV file.

    Parameters
    ----------
    path : str or pathlib.Path
        CSV file with a header row, ',' delimiter and '.' decimal point.
    config : IngestionConfig
        Column roles. Columns not named anywhere are numeric features.

    Returns
    -------
    Dataset
        Rows sorted (stably) by ``config.order_by`` when given, file order
        otherwise. Categorical columns are one-hot encoded after the numeric
        features, one binary feature per level in order of first appearance in the
        file, whatever the sort.
    """
    config.validate()
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    except pd.errors.EmptyDataError as exc:
        raise EmptyDataset(f"{path} has no header or rows") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if frame.shape[0] == 0:
        raise EmptyDataset(f"{path} has a header but no data rows")

    named = [config.response] + list(config.categorical) + list(config.ignore)
    if config.order_by:
        named.append(config.order_by)
    for column in named:
        if column not in frame.columns:
            raise MissingColumn(f"column '{column}' not found in {path}")

    roles = {}
    for column in frame.columns:
        if column == config.response:
            roles[column] = ROLE_RESPONSE
        elif column in config.categorical:
            roles[column] = ROLE_CATEGORICAL
        elif column in config.ignore or column == config.order_by:
            roles[column] = ROLE_IGNORE
        else:
            roles[column] = ROLE_NUMERIC

    used = [c for c in frame.columns if roles[c] != ROLE_IGNORE or c == config.order_by]
    blank = frame[used].apply(lambda col: col.str.strip() == '')
    if blank.to_numpy().any():
        row, col = np.argwhere(blank.to_numpy())[0]
        raise MissingValue(f"column '{used[col]}' row {row + 1} is empty")

    numeric = [c for c in frame.columns if roles[c] == ROLE_NUMERIC]
    categorical = [c for c in frame.columns if roles[c] == ROLE_CATEGORICAL]
    # Levels follow the file, before any reordering.
    levels = {column: tuple(pd.unique(frame[column])) for column in categorical}

    if config.order_by:
        key = _ordering_key(frame[config.order_by])
        frame = frame.iloc[np.argsort(key, kind='stable')].reset_index(drop=True)

    blocks = [_parse_numeric(frame, c) for c in numeric]
    feature_names = list(numeric)
    for column in categorical:
        for level in levels[column]:
            blocks.append((frame[column] == level).to_numpy(dtype=float))
            feature_names.append(f"{column}={level}")

    if not blocks:
        raise ConfigError(f"{path} has no feature columns")

    schema = ColumnSchema(
        columns=tuple(frame.columns),
        roles=roles,
        levels=levels,
        feature_names=tuple(feature_names),
        order_by=config.order_by,
    )
    X = np.column_stack(blocks)
    y = _parse_numeric(frame, config.response)
    logger.info("Loaded %s: %d rows, %d features", path, len(y), X.shape[1])
    return Dataset(X, y, schema, ordered=True)


@dataclass(frozen=True, eq=False)
class SplitIndices:
    """Train and test row indices of one split."""
    train: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        train = np.asarray(self.train, dtype=int)
        test = np.asarray(self.test, dtype=int)
        train.setflags(write=False)
        test.setflags(write=False)
        object.__setattr__(self, 'train', train)
        object.__setattr__(self, 'test', test)

    def __eq__(self, other):
        return (
            isinstance(other, SplitIndices)
            and np.array_equal(self.train, other.train)
            and np.array_equal(self.test, other.test)
        )


def holdout_split(m, train_fraction):
    """
    Order-preserving holdout: the first ceil(train_fraction * m) rows train.

    Parameters
    ----------
    m : int
        Number of rows.
    train_fraction : float
        Fraction of rows used for training, in (0, 1).

    Returns
    -------
    SplitIndices
    """
    if not 0.0 < train_fraction < 1.0:
        raise DegenerateSplit(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n_train = ceil_count(train_fraction, m)
    if m < 2 or n_train < 1 or n_train >= m:
        raise DegenerateSplit(f"holdout {train_fraction} of {m} rows leaves an empty side")
    return SplitIndices(np.arange(n_train), np.arange(n_train, m))


def bootstrap_split(m, rng, max_attempts=BOOTSTRAP_MAX_ATTEMPTS):
    """
    Out-of-bag bootstrap: train on m draws with replacement, test on the rest.

    The train multiset is returned sorted. A draw that covers every index is
    redrawn, up to ``max_attempts`` times.
    """
    if m < 2:
        raise DegenerateSplit(f"bootstrap needs at least 2 rows, got {m}")
    for _ in range(max_attempts):
        draw = rng.integers(0, m, size=m)
        out_of_bag = np.setdiff1d(np.arange(m), draw)
        if out_of_bag.size:
            return SplitIndices(np.sort(draw), out_of_bag)
    raise EmptyOutOfBag(f"no out-of-bag rows after {max_attempts} bootstrap draws of {m}")


def kfold_partition(m, k, rng):
    """
    Shuffle the indices and cut them into k folds whose sizes differ by at most one.

    Returns
    -------
    list of SplitIndices
        Split i tests on fold i and trains on the other folds.
    """
    if not 2 <= k <= m:
        raise BadFoldCount(f"fold count must lie in [2, {m}], got {k}")
    # The first m % k folds get one extra row.
    folds = np.array_split(rng.permutation(m), k)
    splits = []
    for i, fold in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        splits.append(SplitIndices(np.sort(train), np.sort(fold)))
    return splits


def tscv_splits(m, initial_fraction=0.5, n_splits=10):
    """
    Rolling-origin time series cross-validation with an expanding window.

    The rows after the initial window are cut into ``n_splits`` contiguous
    chunks; split j trains on everything before chunk j and tests on chunk j.
    """
    start = ceil_count(initial_fraction, m)
    if n_splits < 1 or start < 1 or start >= m:
        raise DegenerateSplit(
            f"tscv with initial_fraction={initial_fraction}, n_splits={n_splits} on {m} rows"
        )
    chunks = np.array_split(np.arange(start, m), n_splits)
    if any(chunk.size == 0 for chunk in chunks):
        raise DegenerateSplit(f"tscv: {m - start} test rows cannot fill {n_splits} splits")
    return [SplitIndices(np.arange(chunk[0]), chunk) for chunk in chunks]


def tshvcv_defaults(m):
    """Default (v, h, s) for time series hv-block cross-validation on m rows."""
    v = ceil_count(0.05, m)
    return v, v, 2 * v + 1


def tshvcv_splits(m, v, h, s):
    """
    Time series hv-block cross-validation.

    For centers i = v, v + s, ... up to min(m - v, m - 1), the validation set
    is [i - v, i + v] and training uses every row outside [i - v - h, i + v + h].
    Windows are clipped to the row range.
    """
    if v < 0 or h < 0 or s < 1:
        raise DegenerateSplit(f"tshvcv needs v >= 0, h >= 0, s >= 1, got v={v}, h={h}, s={s}")
    if m < 2 * v + 2 * h + 2:
        raise DegenerateSplit(f"tshvcv with v={v}, h={h} needs at least {2 * v + 2 * h + 2} rows, got {m}")

    indices = np.arange(m)
    last_center = min(m - v, m - 1)
    splits = []
    for center in range(v, last_center + 1, s):
        low, high = center - v, min(center + v, m - 1)
        # Rows within h of the validation window are left out of training.
        test = np.arange(low, high + 1)
        train = indices[(indices < low - h) | (indices > high + h)]
        if train.size == 0:
            raise DegenerateSplit(f"tshvcv center {center} leaves no training rows")
        splits.append(SplitIndices(train, test))
    return splits
