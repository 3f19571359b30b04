"""
Random forest prediction intervals.

Trees are grown to the largest extent possible, so every leaf is pure or holds
rows that cannot be told apart. A prediction interval for a row pools the
training responses of the leaves the row reaches in every tree and reads the
lower and upper bounds off that pooled sample as empirical quantiles.
"""

import logging
from dataclasses import asdict, dataclass

import numpy as np
from joblib import Parallel, delayed

from interval_tuner.data_model import STREAM_TREE, ceil_count, derive_rng
from interval_tuner.errors import (
    ConfigError,
    DimensionMismatch,
    DomainError,
    EmptyValues,
    ImpureLeaf,
    TooFewRows,
)

logger = logging.getLogger(__name__)

POLICY_ERROR = 'error'
POLICY_POOL = 'pool'

DUMP_FORMAT = 'interval_tuner.forest'
DUMP_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    """
    Settings of one random forest configuration.

    Attributes
    ----------
    mtry : float
        Fraction of predictors considered at each split, in (0, 1].
    n_trees : int
        Number of trees.
    seed : int
        Unsigned 64-bit seed; tree i draws from the stream (seed, i).
    impure_leaf_policy : str
        'error' fails a row that reaches an impure leaf, 'pool' keeps the
        leaf's responses and flags the row.
    bootstrap : bool
        Resample the training rows for each tree. When False every tree sees
        the rows exactly once.
    n_jobs : int
        joblib workers used to grow trees. Results do not depend on it.
    """
    mtry: float = 1.0
    n_trees: int = 1000
    seed: int = 0
    impure_leaf_policy: str = POLICY_ERROR
    bootstrap: bool = True
    n_jobs: int = 1

    def validate(self):
        """Raise ConfigError for settings outside their ranges; return self."""
        if not 0.0 < self.mtry <= 1.0:
            raise ConfigError(f"mtry must lie in (0, 1], got {self.mtry}")
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be positive, got {self.n_trees}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.impure_leaf_policy not in (POLICY_ERROR, POLICY_POOL):
            raise ConfigError("impure_leaf_policy must be 'error' or 'pool'")
        if self.n_jobs == 0:
            raise ConfigError("n_jobs must be nonzero")
        return self


class RegressionTree:
    """
    A fully grown regression tree stored as parallel node arrays.

    Node 0 is the root. Internal nodes have ``feature >= 0``; rows with
    ``x[feature] <= threshold`` go to ``left``. Leaves keep the training
    responses that reached them.
    """

    def __init__(self, feature, threshold, left, right, responses):
        self.feature = np.asarray(feature, dtype=int)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=int)
        self.right = np.asarray(right, dtype=int)
        self.responses = list(responses)
        self.is_leaf = self.feature < 0
        self.leaf_mean = np.array(
            [np.mean(r) if r is not None else np.nan for r in self.responses]
        )
        self.impure = np.array(
            [r is not None and bool(np.any(r != r[0])) for r in self.responses]
        )

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    def apply(self, X):
        """Return the leaf index reached by every row of X."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=int)
        active = ~self.is_leaf[node]
        while active.any():
            rows = np.nonzero(active)[0]
            current = node[rows]
            goes_left = X[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(goes_left, self.left[current], self.right[current])
            active = ~self.is_leaf[node]
        return node

    def to_dict(self):
        return {
            'feature': self.feature.tolist(),
            'threshold': [None if np.isnan(t) else float(t) for t in self.threshold],
            'left': self.left.tolist(),
            'right': self.right.tolist(),
            'responses': [None if r is None else r.tolist() for r in self.responses],
        }


@dataclass(frozen=True, eq=False)
class ForestModel:
    """Trained trees plus the configuration that produced them."""
    trees: tuple
    config: ForestConfig
    feature_count: int


@dataclass(frozen=True)
class PredictionInterval:
    """Interval bounds and conditional-mean prediction for one row."""
    lower: float
    upper: float
    point: float
    nc: float
    pooled_impure: bool = False

    @property
    def width(self):
        return self.upper - self.lower


@dataclass(frozen=True, eq=False)
class PooledResponses:
    """Leaf responses pooled over all trees for one row."""
    values: np.ndarray
    impure: bool


@dataclass(frozen=True, eq=False)
class IntervalTable:
    """
    Intervals for many rows at several nominal confidences.

    ``lower`` and ``upper`` have shape (rows, len(ncs)); rows in ``failed``
    hold NaN bounds. ``pooled`` marks rows whose pool includes an impure leaf.
    """
    ncs: tuple
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    failed: np.ndarray
    pooled: np.ndarray


def _best_split_among(X, y, features):
    """
    Best (feature, threshold) over the given feature columns, searched together.

    Parameters
    ----------
    X, y : numpy.ndarray
        The node's rows.
    features : numpy.ndarray
        Column indices to search.

    Returns
    -------
    tuple or None
        None when none of the columns varies. Equal gains go to the smaller
        feature index, then the smaller threshold.
    """
    n = y.shape[0]
    columns = X[:, features]

    # Sort every candidate column at once; ys follows each column's order.
    order = np.argsort(columns, axis=0, kind='stable')
    xs = np.take_along_axis(columns, order, axis=0)
    ys = y[order]
    valid = xs[1:] > xs[:-1]
    splittable = valid.any(axis=0)
    if not splittable.any():
        return None

    # Maximizing this proxy minimizes the summed child squared error.
    n_left = np.arange(1, n)[:, None]
    csum = np.cumsum(ys, axis=0)
    left_sum = csum[:-1]
    proxy = left_sum ** 2 / n_left + (csum[-1] - left_sum) ** 2 / (n - n_left)
    proxy = np.where(valid, proxy, -np.inf)

    # First best cut per column, midway between the neighbouring values.
    cut = np.argmax(proxy, axis=0)
    at = np.arange(len(features))
    gains = np.where(splittable, proxy[cut, at], -np.inf)
    low, high = xs[cut, at], xs[cut + 1, at]
    thresholds = (low + high) / 2.0
    thresholds = np.where(thresholds >= high, low, thresholds)

    tied = np.flatnonzero(splittable & (gains == gains.max()))
    return min((int(features[c]), float(thresholds[c])) for c in tied)


def _find_split(X, y, n_candidates, rng):
    """
    Best (feature, threshold) for one node, or None when no feature varies.

    Features are drawn as a random permutation and the first ``n_candidates``
    are searched. When none of them can split the node the search continues
    down the permutation one feature at a time.
    """
    permutation = rng.permutation(X.shape[1])
    best = _best_split_among(X, y, permutation[:n_candidates])
    if best is not None:
        return best
    for f in permutation[n_candidates:]:
        best = _best_split_among(X, y, np.array([f]))
        if best is not None:
            return best
    return None


def grow_tree(X, y, sample, n_candidates, rng):
    """
    Grow one regression tree to the largest extent possible.

    Parameters
    ----------
    X, y : numpy.ndarray
        Training features and responses.
    sample : numpy.ndarray
        Row indices (a multiset under bootstrap) the tree is grown on.
    n_candidates : int
        Number of features considered per split.
    rng : numpy.random.Generator
        Consumed by nodes in depth-first, left-before-right order.

    Returns
    -------
    RegressionTree
    """
    feature, threshold, left, right, responses = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        responses.append(None)
        return len(feature) - 1

    stack = [(new_node(), np.asarray(sample, dtype=int))]
    while stack:
        node, rows = stack.pop()
        ys = y[rows]
        split = None
        if rows.size >= 2 and np.any(ys != ys[0]):
            split = _find_split(X[rows], ys, n_candidates, rng)
        if split is None:
            responses[node] = ys.copy()
            continue

        f, t = split
        goes_left = X[rows, f] <= t
        left_node, right_node = new_node(), new_node()
        feature[node], threshold[node] = f, t
        left[node], right[node] = left_node, right_node
        stack.append((right_node, rows[~goes_left]))
        stack.append((left_node, rows[goes_left]))

    return RegressionTree(feature, threshold, left, right, responses)


def _grow_tree_at(X, y, config, n_candidates, index):
    rng = derive_rng(config.seed, STREAM_TREE, index)
    m = y.shape[0]
    if config.bootstrap:
        sample = np.sort(rng.integers(0, m, size=m))
    else:
        sample = np.arange(m)
    return grow_tree(X, y, sample, n_candidates, rng)


def candidate_count(feature_count, mtry):
    """Number of features considered per split: max(1, ceil(feature_count * mtry))."""
    return max(1, ceil_count(mtry, feature_count))


def train_forest(train, config):
    """
    Train a random forest on a Dataset.

    Parameters
    ----------
    train : Dataset
        At least two rows and one feature.
    config : ForestConfig

    Returns
    -------
    ForestModel
        Identical for any ``config.n_jobs``.
    """
    config.validate()
    if train.m < 2:
        raise TooFewRows(f"a forest needs at least 2 training rows, got {train.m}")
    if train.feature_count < 1:
        raise TooFewRows("a forest needs at least one feature")

    n_candidates = candidate_count(train.feature_count, config.mtry)
    trees = Parallel(n_jobs=config.n_jobs)(
        delayed(_grow_tree_at)(train.X, train.y, config, n_candidates, i)
        for i in range(config.n_trees)
    )
    return ForestModel(tuple(trees), config, train.feature_count)


def _as_rows(model, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.feature_count:
        raise DimensionMismatch(
            f"expected {model.feature_count} features per row, got {X.shape[1]}"
        )
    return X


def predict(model, X):
    """Conditional-mean prediction for every row: the mean of the tree predictions."""
    X = _as_rows(model, X)
    per_tree = np.array([tree.leaf_mean[tree.apply(X)] for tree in model.trees])
    return per_tree.mean(axis=0)


def predict_mean(model, x):
    """Conditional-mean prediction for a single feature vector."""
    return float(predict(model, x)[0])


def _pool(model, X):
    """
    Yield the PooledResponses of every row of X in turn.

    Leaves are located for all rows up front; each pool is concatenated only
    when its row is reached.
    """
    leaves = [tree.apply(X) for tree in model.trees]
    for r in range(X.shape[0]):
        parts = [tree.responses[leaf[r]] for tree, leaf in zip(model.trees, leaves)]
        impure = any(tree.impure[leaf[r]] for tree, leaf in zip(model.trees, leaves))
        yield PooledResponses(np.concatenate(parts), impure)


def pooled_responses(model, x):
    """
    Concatenate the responses of the leaf reached in every tree.

    Raises
    ------
    ImpureLeaf
        If a reached leaf is impure and the policy is 'error'.
    """
    pooled = next(_pool(model, _as_rows(model, x)))
    if pooled.impure:
        if model.config.impure_leaf_policy == POLICY_ERROR:
            raise ImpureLeaf("the row reaches a leaf with differing responses")
        logger.warning("Pooled responses include an impure leaf")
    return pooled


def _order_statistic(sorted_values, tau):
    if tau == 0.0:
        return sorted_values[0]
    k = min(max(ceil_count(tau, sorted_values.shape[0]), 1), sorted_values.shape[0])
    return sorted_values[k - 1]


def empirical_quantile(values, tau):
    """
    Smallest value whose empirical CDF reaches tau.

    Parameters
    ----------
    values : array_like
        Nonempty sample.
    tau : float
        Quantile level in [0, 1].

    Returns
    -------
    float
        v_(ceil(tau * n)) of the sorted sample, or the minimum when tau is 0.
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise EmptyValues("cannot take a quantile of an empty sample")
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"tau must lie in [0, 1], got {tau}")
    return float(_order_statistic(np.sort(values), tau))


def _check_nc(nc):
    if not 0.0 < nc < 1.0:
        raise DomainError(f"nominal confidence must lie in (0, 1), got {nc}")


def interval_table(model, X, ncs):
    """
    Build intervals for every row of X at every nominal confidence.

    Rows that reach an impure leaf are marked failed (policy 'error') or
    pooled (policy 'pool'); the run continues either way.

    Returns
    -------
    IntervalTable
    """
    X = _as_rows(model, X)
    ncs = tuple(float(nc) for nc in ncs)
    for nc in ncs:
        _check_nc(nc)

    n = X.shape[0]
    lower = np.full((n, len(ncs)), np.nan)
    upper = np.full((n, len(ncs)), np.nan)
    failed = np.zeros(n, dtype=bool)
    pooled = np.zeros(n, dtype=bool)
    point = predict(model, X)
    policy = model.config.impure_leaf_policy

    for r, pool in enumerate(_pool(model, X)):
        if pool.impure:
            if policy == POLICY_ERROR:
                failed[r] = True
                continue
            pooled[r] = True
        values = np.sort(pool.values)
        for q, nc in enumerate(ncs):
            alpha = (1.0 - nc) / 2.0
            lower[r, q] = _order_statistic(values, alpha)
            upper[r, q] = _order_statistic(values, 1.0 - alpha)

    if failed.any():
        logger.warning("%d of %d rows reached an impure leaf (mtry=%s)", failed.sum(), n, model.config.mtry)
    if pooled.any():
        logger.warning("%d of %d rows pooled an impure leaf (mtry=%s)", pooled.sum(), n, model.config.mtry)
    return IntervalTable(ncs, point, lower, upper, failed, pooled)


def prediction_intervals(model, test, nc):
    """
    Prediction intervals at one nominal confidence for every row of a Dataset.

    The bounds are the alpha and 1 - alpha empirical quantiles of the pooled
    leaf responses, with alpha = (1 - nc) / 2.

    Returns
    -------
    list of PredictionInterval

    Raises
    ------
    ImpureLeaf
        If any row fails under the 'error' policy.
    """
    table = interval_table(model, test.X, [nc])
    if table.failed.any():
        raise ImpureLeaf(f"{int(table.failed.sum())} test rows reached an impure leaf")
    return [
        PredictionInterval(
            lower=float(table.lower[r, 0]),
            upper=float(table.upper[r, 0]),
            point=float(table.point[r]),
            nc=float(nc),
            pooled_impure=bool(table.pooled[r]),
        )
        for r in range(test.m)
    ]


def dump_forest(model):
    """Return a JSON-serializable description of the forest for debugging."""
    return {
        'format': DUMP_FORMAT,
        'version': DUMP_VERSION,
        'config': asdict(model.config),
        'feature_count': model.feature_count,
        'trees': [tree.to_dict() for tree in model.trees],
    }
