"""
Coverage, width and reliability of prediction intervals.
"""

from dataclasses import dataclass

import numpy as np

from interval_tuner.forest import interval_table

PERFORMANCE_COLUMNS = ['mtry', 'nc', 'coverage', 'mean_width', 'reliable', 'usable']


@dataclass(frozen=True, eq=False)
class ConfigPerformance:
    """
    Interval performance of one configuration at one nominal confidence.

    Attributes
    ----------
    mtry, nc : float
    point_coverage : numpy.ndarray
        Boolean per test row; rows without an interval count as uncovered.
    point_width : numpy.ndarray
        Upper minus lower bound per row; NaN for rows without an interval.
    coverage : float
        Mean of ``point_coverage``.
    mean_width : float
        Mean of ``point_width`` (NaN when the configuration is not usable).
    reliable : bool
        ``usable and coverage >= nc``.
    usable : bool
        False when any row failed under the 'error' impure-leaf policy.
    pooled_rows : int
        Rows whose interval pooled an impure leaf.
    """
    mtry: float
    nc: float
    point_coverage: np.ndarray
    point_width: np.ndarray
    coverage: float
    mean_width: float
    reliable: bool
    usable: bool
    pooled_rows: int = 0

    @property
    def n_points(self):
        return self.point_coverage.shape[0]

    def as_row(self):
        return {
            'mtry': self.mtry,
            'nc': self.nc,
            'coverage': self.coverage,
            'mean_width': self.mean_width,
            'reliable': self.reliable,
            'usable': self.usable,
        }


def is_reliable(coverage, nc):
    """Reliability is coverage >= nc, with no tolerance."""
    return bool(coverage >= nc)


def point_coverage(y, interval):
    """True iff y lies in the closed interval [lower, upper]."""
    return bool(interval.lower <= y <= interval.upper)


def performance_from_table(table, y, mtry):
    """
    Turn an IntervalTable and the true responses into ConfigPerformance objects.

    Returns
    -------
    dict
        Maps each nc of the table to its ConfigPerformance.
    """
    y = np.asarray(y, dtype=float)
    usable = not bool(table.failed.any())
    results = {}
    for q, nc in enumerate(table.ncs):
        lower, upper = table.lower[:, q], table.upper[:, q]
        covered = (lower <= y) & (y <= upper)
        widths = upper - lower
        coverage = float(np.mean(covered))
        mean_width = float(np.mean(widths)) if usable else float('nan')
        results[nc] = ConfigPerformance(
            mtry=mtry,
            nc=nc,
            point_coverage=covered,
            point_width=widths,
            coverage=coverage,
            mean_width=mean_width,
            reliable=usable and is_reliable(coverage, nc),
            usable=usable,
            pooled_rows=int(table.pooled.sum()),
        )

    by_nc = sorted(results)
    for low, high in zip(by_nc, by_nc[1:]):
        if results[high].coverage < results[low].coverage:
            raise AssertionError(
                f"coverage fell from {results[low].coverage} at nc={low} "
                f"to {results[high].coverage} at nc={high}"
            )
    return results


def evaluate_many(model, test, ncs):
    """Evaluate a trained forest on a test Dataset at several nominal confidences."""
    table = interval_table(model, test.X, ncs)
    return performance_from_table(table, test.y, model.config.mtry)


def evaluate(model, test, nc):
    """Evaluate a trained forest on a test Dataset at one nominal confidence."""
    return evaluate_many(model, test, [nc])[float(nc)]
