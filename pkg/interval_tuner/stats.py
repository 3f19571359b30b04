"""
Nonparametric paired tests: Cochran's Q on booleans and Friedman on reals.

Both use the asymptotic chi-square null distribution. Degenerate inputs (no
disagreement between treatments, or every block fully tied) return a
statistic of 0 and a p-value of 1 with ``degenerate`` set, so tag logic can
still classify the scenario.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc
from scipy.stats import rankdata

from interval_tuner.errors import DomainError, ShapeError

ALPHA = 0.05


@dataclass(frozen=True)
class TestResult:
    """Outcome of a paired test."""
    __test__ = False

    statistic: float
    df: int
    p_value: float
    significant: bool
    degenerate: bool = False
    tie_correction: float = 1.0
    n_blocks: int = 0


def _result(statistic, df, n_blocks, tie_correction=1.0):
    p_value = min(max(chi_square_sf(statistic, df), 0.0), 1.0)
    return TestResult(
        statistic=float(statistic),
        df=int(df),
        p_value=p_value,
        significant=p_value <= ALPHA,
        tie_correction=float(tie_correction),
        n_blocks=int(n_blocks),
    )


def _degenerate(df, n_blocks, tie_correction=1.0):
    return TestResult(0.0, int(df), 1.0, False, True, float(tie_correction), int(n_blocks))


def chi_square_sf(x, df):
    """
    Upper tail probability P(chi2_df > x).

    Computed as the regularized upper incomplete gamma function
    Q(df / 2, x / 2).
    """
    if x < 0:
        raise DomainError(f"chi-square statistic must be nonnegative, got {x}")
    if df < 1:
        raise DomainError(f"degrees of freedom must be positive, got {df}")
    if x == 0:
        return 1.0
    return float(gammaincc(df / 2.0, x / 2.0))


def _matrix(values, min_blocks, dtype):
    matrix = np.asarray(values, dtype=dtype)
    if matrix.ndim != 2 or matrix.shape[0] < min_blocks or matrix.shape[1] < 2:
        raise ShapeError(
            f"expected a blocks x treatments matrix with at least {min_blocks} blocks "
            f"and 2 treatments, got shape {matrix.shape}"
        )
    return matrix


def cochran_q(outcomes):
    """
    Cochran's Q test for k related binary samples.

    Parameters
    ----------
    outcomes : array_like of bool
        Blocks x treatments matrix of successes.

    Returns
    -------
    TestResult
        df = k - 1.
    """
    matrix = _matrix(outcomes, 1, bool).astype(np.int64)
    b, k = matrix.shape
    # Successes per treatment (columns) and per block (rows).
    col_totals = matrix.sum(axis=0)
    row_totals = matrix.sum(axis=1)
    total = int(matrix.sum())

    # Zero when every block is all successes or all failures.
    denominator = k * total - int((row_totals ** 2).sum())
    if denominator == 0:
        return _degenerate(k - 1, b)
    numerator = (k - 1) * (k * int((col_totals ** 2).sum()) - total ** 2)
    return _result(numerator / denominator, k - 1, b)


def friedman(values):
    """
    Friedman's test with average ranks and the tie correction.

    Parameters
    ----------
    values : array_like of float
        Blocks x treatments matrix.

    Returns
    -------
    TestResult
        ``tie_correction`` holds the divisor 1 - sum(t^3 - t) / (b k (k^2 - 1)).
    """
    matrix = _matrix(values, 2, float)
    if not np.all(np.isfinite(matrix)):
        raise DomainError("friedman needs finite values")
    b, k = matrix.shape

    # Rank within each block; ties share the average rank.
    ranks = rankdata(matrix, axis=1)
    mean_ranks = ranks.mean(axis=0)

    # Sum of t^3 - t over every group of tied values in every block.
    tie_sum = 0
    for row in matrix:
        _, counts = np.unique(row, return_counts=True)
        tie_sum += int((counts ** 3 - counts).sum())
    denominator = b * k * (k * k - 1)
    if tie_sum == denominator:
        return _degenerate(k - 1, b, 0.0)
    correction = (denominator - tie_sum) / denominator

    # Squared deviations of the mean ranks from their null expectation.
    spread = float(((mean_ranks - (k + 1) / 2.0) ** 2).sum())
    statistic = 12.0 * b / (k * (k + 1)) * spread / correction
    return _result(statistic, k - 1, b, correction)
