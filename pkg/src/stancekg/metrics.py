"""Per-class and macro precision/recall/F1 over three-way stance predictions.

Macro values average over Accept and Reject only; NoStance still participates
in the confusion matrix and in each class's one-vs-rest counts.  Zero-denominator
precision or recall is reported as 0 and flagged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, DataError
from .graph import StanceLabel

CLASS_ORDER = [StanceLabel.ACCEPT, StanceLabel.REJECT, StanceLabel.NO_STANCE]
_CLASS_IDX = {s: i for i, s in enumerate(CLASS_ORDER)}


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass
class EvalReport:
    per_class: dict
    macro_precision: float
    macro_recall: float
    macro_f1: float
    support: dict
    confusion: np.ndarray  # gold rows x predicted columns, Accept/Reject/NoStance
    zero_division: bool = False

    def to_dict(self) -> dict:
        return {
            "per_class": {name: vars(m) for name, m in self.per_class.items()},
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall,
                      "f1": self.macro_f1},
            "support": dict(self.support),
            "confusion": {"labels": [s.value for s in CLASS_ORDER],
                          "rows": self.confusion.tolist()},
            "zero_division": self.zero_division,
        }


def macro_average(values) -> float:
    """Unweighted mean, as used for the two-class macro metrics."""
    return float(np.mean(list(values)))


def _keyed(records, which: str) -> dict:
    out = {}
    for tweet_id, mist_id, stance in records:
        key = (tweet_id, mist_id)
        if key in out:
            raise DataError(f"duplicate {which} record for {key!r}")
        out[key] = stance
    return out


def evaluate(gold, pred) -> EvalReport:
    """Score predictions against gold labels over identical (tweet, target) keys."""
    gold_map = _keyed(gold, "gold")
    pred_map = _keyed(pred, "prediction")
    if gold_map.keys() != pred_map.keys():
        raise AlignmentError(missing_in_pred=gold_map.keys() - pred_map.keys(),
                             missing_in_gold=pred_map.keys() - gold_map.keys())

    confusion = np.zeros((3, 3), dtype=int)
    for key, g in gold_map.items():
        confusion[_CLASS_IDX[g], _CLASS_IDX[pred_map[key]]] += 1

    zero_division = False
    per_class = {}
    for stance in (StanceLabel.ACCEPT, StanceLabel.REJECT):
        i = _CLASS_IDX[stance]
        tp = confusion[i, i]
        pred_total = confusion[:, i].sum()
        gold_total = confusion[i, :].sum()
        if pred_total == 0 or gold_total == 0:
            zero_division = True
        precision = tp / pred_total if pred_total else 0.0
        recall = tp / gold_total if gold_total else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall > 0 else 0.0)
        per_class[stance.value] = ClassMetrics(float(precision), float(recall), float(f1))

    support = {s.value: int(confusion[_CLASS_IDX[s], :].sum()) for s in CLASS_ORDER}
    return EvalReport(
        per_class=per_class,
        macro_precision=macro_average(m.precision for m in per_class.values()),
        macro_recall=macro_average(m.recall for m in per_class.values()),
        macro_f1=macro_average(m.f1 for m in per_class.values()),
        support=support,
        confusion=confusion,
        zero_division=zero_division,
    )


@dataclass(frozen=True)
class ThemeMetrics:
    accept_f1: float
    reject_f1: float
    support: int


@dataclass
class ThemeReport:
    per_theme: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {theme: vars(m) for theme, m in self.per_theme.items()}


def evaluate_by_theme(gold, pred, mists) -> ThemeReport:
    """Evaluate restricted to the (tweet, target) pairs of each taxonomy theme."""
    themes = {}
    for m in mists:
        if not m.theme:
            raise DataError(f"target {m.id!r} has no theme label")
        themes[m.id] = m.theme

    pred_map = _keyed(pred, "prediction")
    grouped = {}
    for tweet_id, mist_id, stance in gold:
        if mist_id not in themes:
            raise DataError(f"target {mist_id!r} not in the target list")
        grouped.setdefault(themes[mist_id], []).append((tweet_id, mist_id, stance))

    report = ThemeReport()
    for theme in sorted(grouped):
        subset_gold = grouped[theme]
        subset_pred = [(t, m, pred_map[(t, m)]) for t, m, _ in subset_gold
                       if (t, m) in pred_map]
        sub = evaluate(subset_gold, subset_pred)
        report.per_theme[theme] = ThemeMetrics(
            accept_f1=sub.per_class[StanceLabel.ACCEPT.value].f1,
            reject_f1=sub.per_class[StanceLabel.REJECT.value].f1,
            support=len(subset_gold),
        )
    return report
