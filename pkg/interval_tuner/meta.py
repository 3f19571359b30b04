"""
Meta-validation: predict which technique will pay off, then use it.

A meta holdout cuts the evaluation frame's training rows once more. Every
technique is tuned and tagged inside that inner frame; per nc the technique
with the best inner tag is chosen, and the chosen technique is then run in the
evaluation frame like any other technique.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

from interval_tuner.errors import ConfigError
from interval_tuner.forest import ForestConfig
from interval_tuner.tuning import DEFAULT_NCS, OUTER_TRAIN_FRACTION, TuningFrame
from interval_tuner.validation import canonical

logger = logging.getLogger(__name__)


class MetaTechnique(Enum):
    """Meta holdouts; the fraction is the share of training rows kept for inner training."""
    META_25_75 = 'Meta-25/75'
    META_50_50 = 'Meta-50/50'
    META_75_25 = 'Meta-75/25'

    @property
    def label(self):
        return self.value

    @property
    def train_fraction(self):
        return int(self.label[5:7]) / 100

    @classmethod
    def parse(cls, name):
        """Accept 'Meta-75/25', '75/25', '75-25' or 'meta_75_25'."""
        wanted = ''.join(ch for ch in name.lower() if ch.isdigit())
        for meta in cls:
            if wanted and wanted == ''.join(ch for ch in meta.label if ch.isdigit()):
                return meta
        raise ConfigError(f"unknown meta technique '{name}'")


@dataclass(frozen=True, eq=False)
class MetaChoice:
    """What one meta technique chose at one nc, and how the choice fared."""
    nc: float
    chosen_technique: object
    predicted_tag: object
    actual_tag: object
    predicted_tags: dict
    outcome: object

    def as_row(self, meta):
        return {
            'meta_technique': meta.label,
            'nc': self.nc,
            'chosen_technique': self.chosen_technique.label,
            'predicted_tag': self.predicted_tag.name,
            'actual_tag': self.actual_tag.name,
            'selected_mtry': self.outcome.selected_mtry,
        }


@dataclass(eq=False)
class MetaOutcome:
    """Choices of one meta technique across ncs."""
    meta: MetaTechnique
    choices: dict = field(default_factory=dict)

    def tags(self, ncs):
        return [self.choices[nc].actual_tag for nc in ncs]


def choose_technique(predicted_tags):
    """
    Pick the technique with the highest predicted benefit.

    ``predicted_tags`` maps technique to Benefit; ties go to the technique
    first in canonical order.
    """
    chosen = None
    for technique in canonical(predicted_tags):
        if chosen is None or predicted_tags[technique] > predicted_tags[chosen]:
            chosen = technique
    return chosen


def run_meta(data, meta, techniques, ncs=DEFAULT_NCS, base=None, params=None,
             train_fraction=OUTER_TRAIN_FRACTION, audit=None, grid=None, frame=None):
    """
    Meta-validate one meta holdout.

    Parameters
    ----------
    data : Dataset
    meta : MetaTechnique
    techniques : sequence of Technique
        Candidates for the composite technique.
    ncs, base, params, train_fraction, audit, grid
        As for ``run_tuning``.
    frame : TuningFrame, optional
        Evaluation frame to reuse; the composite technique is evaluated in it.

    Returns
    -------
    MetaOutcome
    """
    if frame is None:
        frame = TuningFrame.holdout(data, base or ForestConfig(), ncs, grid, params,
                                    train_fraction, audit)
    inner = TuningFrame.holdout(frame.train, frame.base, frame.ncs, frame.grid, frame.params,
                                meta.train_fraction, frame.audit, layer='meta')

    outcome = MetaOutcome(meta)
    candidates = canonical(techniques)
    for nc in frame.ncs:
        predicted_tags = {t: inner.outcome(t, nc).tag for t in candidates}
        chosen = choose_technique(predicted_tags)
        actual = frame.outcome(chosen, nc)
        outcome.choices[nc] = MetaChoice(
            nc, chosen, predicted_tags[chosen], actual.tag, predicted_tags, actual,
        )
        logger.info("%s at nc=%s: chose %s (predicted %s, actual %s)",
                    meta.label, nc, chosen.label, predicted_tags[chosen].name, actual.tag.name)
    return outcome
