"""
Main entry point for the interval tuner.

This module provides the batch command-line surface: configuration coverage
and width distributions, tuning benefit, meta-tuning benefit, per-row
prediction intervals and technique accuracy.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from interval_tuner import __version__
from interval_tuner.data_model import holdout_split, load_csv, load_ingestion_config
from interval_tuner.errors import ConfigError, DegenerateSplit, IntervalTunerError, TooFewRows
from interval_tuner.forest import POLICY_ERROR, POLICY_POOL, ForestConfig, dump_forest, interval_table, train_forest
from interval_tuner.meta import MetaTechnique, run_meta
from interval_tuner.reports import (
    INTERPRETATION_NOTE,
    RunManifest,
    benefit_table,
    coverage_tables,
    detail_table,
    file_sha256,
    interval_tables,
    meta_tables,
    potential_table,
    technique_accuracy_table,
    width_tables,
    write_csv,
    write_manifest,
)
from interval_tuner.tuning import DEFAULT_NCS, OUTER_TRAIN_FRACTION, TuningFrame, nc_label, run_tuning
from interval_tuner.validation import IndexAudit, Technique, TechniqueParams, canonical

logger = logging.getLogger(__name__)


class WarningCounter(logging.Filter):
    """Counts WARNING and higher records passing through a handler."""

    def __init__(self):
        super().__init__()
        self.count = 0

    def filter(self, record):
        if record.levelno >= logging.WARNING:
            self.count += 1
        return True


def configure_logging(level):
    """Set up console logging once and attach a fresh warning counter."""
    level = getattr(logging, level.upper())
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')
    root = logging.getLogger()
    for handler in root.handlers:
        handler.setLevel(level)
    root.setLevel(min(level, logging.WARNING))

    counter = WarningCounter()
    handler = logging.NullHandler()
    handler.addFilter(counter)
    root.addHandler(handler)
    return counter, handler


def _nc_list(text):
    try:
        ncs = tuple(float(part) for part in text.split(',') if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text}")
    if not ncs or not all(0.0 < nc < 1.0 for nc in ncs):
        raise argparse.ArgumentTypeError(f"every nominal confidence must lie in (0, 1): {text}")
    return tuple(sorted(set(ncs)))


def _technique_list(text):
    if text.strip().lower() == 'all':
        return list(Technique)
    try:
        return canonical(Technique.parse(part) for part in text.split(',') if part.strip())
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _meta_list(text):
    if text.strip().lower() == 'all':
        return list(MetaTechnique)
    try:
        chosen = {MetaTechnique.parse(part) for part in text.split(',') if part.strip()}
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    return [meta for meta in MetaTechnique if meta in chosen]


def parse_args(argv=None):
    """Parse command-line arguments."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--data', required=True,
                        help='CSV file with a header row.')
    common.add_argument('--config', required=True,
                        help='JSON ingestion config naming the response column.')
    common.add_argument('--seed', type=int, default=0,
                        help='Unsigned 64-bit run seed. Default is 0.')
    common.add_argument('--trees', type=int, default=1000,
                        help='Number of trees per forest. Default is 1000.')
    common.add_argument('--nc', type=_nc_list, default=DEFAULT_NCS,
                        help='Comma-separated nominal confidences. Default is 0.90,0.95,0.99.')
    common.add_argument('--mtry-default', type=float, default=1.0,
                        help='MTRY of the default configuration. Default is 1.0.')
    common.add_argument('--impure-leaf', choices=[POLICY_ERROR, POLICY_POOL], default=POLICY_ERROR,
                        help='What to do when a row reaches an impure leaf. Default is "error".')
    common.add_argument('--out', default='results',
                        help='Output directory. Default is "results".')
    common.add_argument('--jobs', type=int, default=1,
                        help='Worker processes for growing trees; outputs do not depend on it.')
    common.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='Logging level. Default is INFO.')
    common.add_argument('--techniques', type=_technique_list, default=list(Technique),
                        help='Comma-separated techniques, e.g. "Bootstrap,50-50,TSCV". Default is all.')
    common.add_argument('--bootstrap-repeats', type=int, default=100)
    common.add_argument('--kfold-repeats', type=int, default=10)
    common.add_argument('--kfold-k', type=int, default=10)
    common.add_argument('--tscv-initial-fraction', type=float, default=0.5)
    common.add_argument('--tscv-splits', type=int, default=10)
    common.add_argument('--tshvcv-v', type=int, default=None)
    common.add_argument('--tshvcv-h', type=int, default=None)
    common.add_argument('--tshvcv-s', type=int, default=None)

    parser = argparse.ArgumentParser(description='Tune random-forest prediction intervals.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', required=True)

    commands.add_parser('coverage', parents=[common],
                        help="Coverage of every configuration and Cochran's Q per nc.")
    commands.add_parser('width', parents=[common],
                        help="Mean width of every configuration and Friedman's test per nc.")
    commands.add_parser('tune', parents=[common],
                        help='Potential and actual benefit of tuning with each technique.')
    meta = commands.add_parser('meta', parents=[common],
                               help='Benefit of meta-validated technique choice.')
    meta.add_argument('--meta', type=_meta_list, default=list(MetaTechnique),
                      help='Comma-separated meta holdouts, e.g. "75/25". Default is all.')

    intervals = commands.add_parser('intervals', parents=[common],
                                    help='Per-row prediction intervals of a held-out block.')
    intervals.add_argument('--train-fraction', type=float, default=OUTER_TRAIN_FRACTION,
                           help='Share of rows used for training. Default is 0.66.')
    intervals.add_argument('--mtry', type=float, default=None,
                           help='MTRY of the forest. Default is --mtry-default.')
    intervals.add_argument('--dump-model', default=None,
                           help='Write the trained forest as JSON to this file.')

    accuracy = commands.add_parser('technique-accuracy', parents=[common],
                                   help='Precision, recall, F1 and EMMRE of each technique.')
    accuracy.add_argument('--allow-interpretation', action='store_true',
                          help='Acknowledge that the accuracy definitions are interpretations.')

    return parser.parse_args(argv)


class Run:
    """Inputs and manifest shared by every command."""

    def __init__(self, args, counter):
        self.args = args
        self.counter = counter
        self.ingestion = load_ingestion_config(args.config)
        self.data = load_csv(args.data, self.ingestion)
        self.base = ForestConfig(
            mtry=args.mtry_default,
            n_trees=args.trees,
            seed=args.seed,
            impure_leaf_policy=args.impure_leaf,
            n_jobs=args.jobs,
        ).validate()
        self.params = TechniqueParams(
            bootstrap_repeats=args.bootstrap_repeats,
            kfold_repeats=args.kfold_repeats,
            kfold_k=args.kfold_k,
            tscv_initial_fraction=args.tscv_initial_fraction,
            tscv_splits=args.tscv_splits,
            tshvcv_v=args.tshvcv_v,
            tshvcv_h=args.tshvcv_h,
            tshvcv_s=args.tshvcv_s,
        ).validate()
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.project = self.ingestion.project or Path(args.data).stem
        self.manifest = None

    def record(self, **parameters):
        forest = asdict(self.base)
        forest.pop('n_jobs')
        parameters['ncs'] = list(self.args.nc)
        self.manifest = RunManifest(
            command=self.args.command,
            dataset=str(self.args.data),
            dataset_sha256=file_sha256(self.args.data),
            ingestion=asdict(self.ingestion),
            seed=self.args.seed,
            forest=forest,
            techniques=self.params.as_dict(),
            parameters=parameters,
        )

    def frame(self, audit=None):
        return TuningFrame.holdout(self.data, self.base, self.args.nc, params=self.params, audit=audit)

    def write(self, tables, notes=()):
        paths = [write_csv(self.out / name, table, self.manifest, self.counter.count, notes)
                 for name, table in tables]
        paths.append(write_manifest(self.out, self.manifest))
        return paths


def cmd_coverage(run):
    run.record(train_fraction=OUTER_TRAIN_FRACTION)
    table, summary = coverage_tables(run.frame())
    for row in summary.itertuples():
        print(f"{row.label}: Cochran's Q p={row.p_value:.4g}")
    return run.write([('coverage.csv', table), ('coverage_summary.csv', summary)])


def cmd_width(run):
    run.record(train_fraction=OUTER_TRAIN_FRACTION)
    table, summary = width_tables(run.frame())
    for row in summary.itertuples():
        print(f"{row.label}: Friedman p={row.p_value:.4g}")
    return run.write([('width.csv', table), ('width_summary.csv', summary)])


def cmd_tune(run):
    techniques = run.args.techniques
    run.record(train_fraction=OUTER_TRAIN_FRACTION, techniques=[t.label for t in techniques])
    audit = IndexAudit()
    result = run_tuning(run.data, techniques, run.args.nc, run.base, run.params, audit=audit)
    logger.info("Index audit: %d index sets checked, %d violations", len(audit.records), len(audit.violations))
    return run.write([
        ('tuning_potential.csv', potential_table(run.project, result)),
        ('tuning_benefit.csv', benefit_table(run.project, result)),
        ('tuning_detail.csv', detail_table(result)),
    ])


def cmd_meta(run):
    techniques, metas = run.args.techniques, run.args.meta
    run.record(train_fraction=OUTER_TRAIN_FRACTION,
               techniques=[t.label for t in techniques],
               meta=[m.label for m in metas])
    audit = IndexAudit()
    frame = run.frame(audit)
    outcomes = [run_meta(run.data, meta, techniques, frame=frame) for meta in metas]
    logger.info("Index audit: %d index sets checked, %d violations", len(audit.records), len(audit.violations))
    benefit, provenance = meta_tables(run.project, outcomes, frame.ncs)
    return run.write([('meta_benefit.csv', benefit), ('meta_provenance.csv', provenance)])


def cmd_intervals(run):
    args = run.args
    mtry = args.mtry if args.mtry is not None else run.base.mtry
    run.record(train_fraction=args.train_fraction, mtry=mtry)
    try:
        split = holdout_split(run.data.m, args.train_fraction)
    except DegenerateSplit as exc:
        raise TooFewRows(str(exc), layer='outer') from exc
    train, test = run.data.subset(split.train), run.data.subset(split.test)
    model = train_forest(train, replace(run.base, mtry=mtry))
    rows, summary = interval_tables(interval_table(model, test.X, args.nc), test, int(split.test[0]))
    for row in summary.itertuples():
        print(f"{nc_label(row.nc)} covers {100 * row.coverage:.0f}% ({row.covered} of {row.rows})")

    paths = run.write([('intervals.csv', rows), ('intervals_summary.csv', summary)])
    if args.dump_model:
        with open(args.dump_model, 'w', encoding='utf-8') as handle:
            json.dump(dump_forest(model), handle)
        paths.append(Path(args.dump_model))
    return paths


def cmd_technique_accuracy(run):
    if not run.args.allow_interpretation:
        raise ConfigError("technique-accuracy reports interpretations; pass --allow-interpretation")
    techniques = run.args.techniques
    run.record(train_fraction=OUTER_TRAIN_FRACTION, techniques=[t.label for t in techniques])
    table = technique_accuracy_table(run.frame(), techniques)
    return run.write([('technique_accuracy.csv', table)], notes=[INTERPRETATION_NOTE])


COMMANDS = {
    'coverage': cmd_coverage,
    'width': cmd_width,
    'tune': cmd_tune,
    'meta': cmd_meta,
    'intervals': cmd_intervals,
    'technique-accuracy': cmd_technique_accuracy,
}


def main(argv=None):
    """Run one command; return the process exit code."""
    args = parse_args(argv)
    counter, handler = configure_logging(args.log_level)
    try:
        paths = COMMANDS[args.command](Run(args, counter))
        for path in paths:
            print(f"Saved {path}")
        if counter.count:
            print(f"{counter.count} warnings; flagged cells are marked in the outputs")
        return 0
    except IntervalTunerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("\nStopped by user.", file=sys.stderr)
        return 130
    finally:
        logging.getLogger().removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
