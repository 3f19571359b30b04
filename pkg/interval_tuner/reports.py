"""
Report tables and reproducible CSV output.

Every CSV starts with ``#`` comment lines carrying the run manifest hash, the
tool version, the parameter values and the warning count. Nothing
time-dependent is written, so equal manifests give byte-identical files.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.metrics import precision_recall_fscore_support

from interval_tuner import __version__
from interval_tuner.metrics import PERFORMANCE_COLUMNS
from interval_tuner.stats import cochran_q, friedman
from interval_tuner.tuning import nc_label

INTERPRETATION_NOTE = (
    "precision/recall/f1 treat actual reliability of a grid cell as ground truth and "
    "predicted reliability as the classifier output; emmre is the plain mean of "
    "|predicted_mean_width - actual_mean_width| / actual_mean_width over cells with "
    "actual_mean_width > 0"
)


def file_sha256(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for block in iter(lambda: handle.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Everything that determines a run's outputs."""
    command: str
    dataset: str
    dataset_sha256: str
    ingestion: dict
    seed: int
    forest: dict
    techniques: dict
    parameters: dict = field(default_factory=dict)
    version: str = __version__

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, indent=2, default=_jsonable) + '\n'

    def digest(self):
        canonical = json.dumps(asdict(self), sort_keys=True, separators=(',', ':'), default=_jsonable)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (tuple, set)):
        return list(value)
    return str(value)


def header_lines(manifest, warnings, notes=()):
    lines = [
        f"# manifest={manifest.digest()}",
        f"# version={manifest.version}",
        f"# command={manifest.command}",
        f"# seed={manifest.seed}",
        f"# forest={json.dumps(manifest.forest, sort_keys=True)}",
        f"# techniques={json.dumps(manifest.techniques, sort_keys=True, default=_jsonable)}",
        f"# parameters={json.dumps(manifest.parameters, sort_keys=True, default=_jsonable)}",
    ]
    lines.extend(f"# {note}" for note in notes)
    lines.append(f"# warnings={warnings}")
    return lines


def write_csv(path, table, manifest, warnings, notes=()):
    """Write a DataFrame under the manifest header. Missing values are left blank."""
    path = Path(path)
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write('\n'.join(header_lines(manifest, warnings, notes)) + '\n')
        table.to_csv(handle, index=False, lineterminator='\n', na_rep='')
    return path


def write_manifest(directory, manifest):
    path = Path(directory) / 'manifest.json'
    path.write_text(manifest.to_json(), encoding='utf-8')
    return path


def _tag_row(project, first_key, first_value, tags, ncs):
    row = {'project': project, first_key: first_value}
    row.update({nc_label(nc): tag.name for nc, tag in zip(ncs, tags)})
    return row


def coverage_tables(frame):
    """
    Actual coverage of every grid configuration, and Cochran's Q per nc.

    Returns
    -------
    tuple of pandas.DataFrame
        Long-format per (nc, mtry) rows, and one summary row per nc.
    """
    rows, summary = [], []
    for nc in frame.ncs:
        actual = frame.actual()[nc]
        rows.extend(actual[mtry].as_row() for mtry in frame.grid)
        outcomes = np.column_stack([actual[mtry].point_coverage for mtry in frame.grid])
        test = cochran_q(outcomes)
        summary.append(_summary_row(nc, actual, frame.grid, test))
    return (pd.DataFrame(rows, columns=PERFORMANCE_COLUMNS),
            pd.DataFrame(summary))


def width_tables(frame):
    """
    Actual mean width of every grid configuration, and Friedman's test per nc.

    Unusable configurations have no widths and stay out of the test.
    """
    rows, summary = [], []
    for nc in frame.ncs:
        actual = frame.actual()[nc]
        rows.extend(actual[mtry].as_row() for mtry in frame.grid)
        usable = [mtry for mtry in frame.grid if actual[mtry].usable]
        if len(usable) >= 2 and frame.test.m >= 2:
            test = friedman(np.column_stack([actual[mtry].point_width for mtry in usable]))
        else:
            test = None
        row = _summary_row(nc, actual, frame.grid, test)
        row['tie_correction'] = test.tie_correction if test else None
        row['n_configs'] = len(usable)
        summary.append(row)
    return (pd.DataFrame(rows, columns=PERFORMANCE_COLUMNS),
            pd.DataFrame(summary))


def _summary_row(nc, actual, grid, test):
    percent = 100.0 * sum(actual[mtry].reliable for mtry in grid) / len(grid)
    label = f"{nc_label(nc)} ({percent:.0f}%)"
    if test is not None and test.significant:
        label += '*'
    return {
        'nc': nc,
        'label': label,
        'percent_reliable': percent,
        'statistic': test.statistic if test else None,
        'df': test.df if test else None,
        'p_value': test.p_value if test else None,
        'significant': test.significant if test else False,
        'degenerate': test.degenerate if test else True,
    }


def potential_table(project, result):
    ncs = result.ncs
    return pd.DataFrame([_tag_row(project, 'row', 'potential',
                                  [result.potentials[nc].tag for nc in ncs], ncs)])


def benefit_table(project, result):
    ncs = result.ncs
    return pd.DataFrame([
        _tag_row(project, 'technique', technique.label,
                 [result.outcomes[technique, nc].tag for nc in ncs], ncs)
        for technique in result.techniques
    ])


def detail_table(result):
    return pd.DataFrame([
        result.outcomes[technique, nc].as_row()
        for technique in result.techniques for nc in result.ncs
    ])


def meta_tables(project, outcomes, ncs):
    """Meta tag matrix and the per-nc provenance of the chosen techniques."""
    benefit = pd.DataFrame([
        _tag_row(project, 'meta_technique', outcome.meta.label, outcome.tags(ncs), ncs)
        for outcome in outcomes
    ])
    provenance = pd.DataFrame([
        outcome.choices[nc].as_row(outcome.meta) for outcome in outcomes for nc in ncs
    ])
    return benefit, provenance


def narrowest_covering(y, table, r):
    """Smallest nc whose interval for row r covers y, or 'none'."""
    for q in np.argsort(table.ncs, kind='stable'):
        if table.lower[r, q] <= y <= table.upper[r, q]:
            return nc_label(table.ncs[q])
    return 'none'


def interval_tables(table, test, first_row):
    """
    Per-row intervals of a held-out block, and coverage counts per nc.

    Parameters
    ----------
    table : IntervalTable
    test : Dataset
    first_row : int
        Index of the first test row in the full dataset.
    """
    rows = []
    for r in range(test.m):
        row = {'row': first_row + r, 'actual': test.y[r], 'point': table.point[r]}
        for q, nc in enumerate(table.ncs):
            row[f"lower_{nc_label(nc)}"] = table.lower[r, q]
            row[f"upper_{nc_label(nc)}"] = table.upper[r, q]
        row['narrowest_nc'] = narrowest_covering(test.y[r], table, r)
        row['failed'] = bool(table.failed[r])
        row['pooled_impure'] = bool(table.pooled[r])
        rows.append(row)

    summary = []
    for q, nc in enumerate(table.ncs):
        covered = int(np.sum((table.lower[:, q] <= test.y) & (test.y <= table.upper[:, q])))
        summary.append({
            'nc': nc,
            'covered': covered,
            'rows': test.m,
            'coverage': covered / test.m,
            'mean_width': float(np.mean(table.upper[:, q] - table.lower[:, q])),
        })
    return pd.DataFrame(rows), pd.DataFrame(summary)


def technique_accuracy(frame, technique, nc):
    """
    Classification accuracy of a technique's reliability predictions, plus EMMRE.

    Returns
    -------
    dict
        One report row. Undefined precision/recall/F1 are NaN and flagged.
    """
    predicted = frame.predicted(technique).at(nc)
    actual = frame.actual()[nc]
    grid = list(frame.grid)
    y_true = np.array([actual[mtry].reliable for mtry in grid])
    y_pred = np.array([predicted[mtry].predicted_reliable for mtry in grid])
    precision, recall, f1, _ = precision_recall_fscore_support(
        y_true, y_pred, average='binary', pos_label=True, zero_division=np.nan,
    )

    errors, zero_width, unusable = [], 0, 0
    for mtry in grid:
        want, got = actual[mtry].mean_width, predicted[mtry].predicted_mean_width
        # Unusable configurations have NaN widths on either side.
        if not (np.isfinite(want) and np.isfinite(got)):
            unusable += 1
        elif want <= 0:
            zero_width += 1
        else:
            errors.append(abs(got - want) / want)

    flags = [name for name, value in (('precision_undefined', precision),
                                      ('recall_undefined', recall),
                                      ('f1_undefined', f1)) if np.isnan(value)]
    return {
        'technique': technique.label,
        'nc': nc,
        'precision': precision,
        'recall': recall,
        'f1': f1,
        'emmre': float(np.mean(errors)) if errors else np.nan,
        'cells': len(grid),
        'excluded_zero_width': zero_width,
        'excluded_unusable': unusable,
        'flags': ';'.join(flags),
    }


def technique_accuracy_table(frame, techniques):
    return pd.DataFrame([
        technique_accuracy(frame, technique, nc)
        for technique in techniques for nc in frame.ncs
    ])
