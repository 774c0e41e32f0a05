"""Binary detection metrics and per-scenario reports.

The positive class is "attacked" throughout. Precision and recall are left
undefined (None, rendered as "undefined") when their denominators are zero;
silently reporting 0 would distort attack-scarce scenarios.

Each scenario report can carry the reference precision/recall/F1 triple
published for that scenario, in which case per-metric deltas (ours minus
reference) are included. The references are reporting aids only and are never
asserted against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

SCENARIOS = ("DoS", "Fuzzy", "Spoofing", "Replay", "Mixed-DFS", "Mixed-DFSR")

# Published GCN results per scenario: (precision, recall, f1).
PAPER_TARGETS: dict[str, tuple[float, float, float]] = {
    "DoS": (0.99, 1.00, 1.00),
    "Fuzzy": (1.00, 1.00, 1.00),
    "Spoofing": (0.99, 1.00, 1.00),
    "Replay": (0.99, 0.88, 0.93),
    "Mixed-DFS": (1.00, 0.99, 0.99),
    "Mixed-DFSR": (0.98, 1.00, 0.99),
}


class EvalError(ValueError):
    """Base class for evaluation errors."""


class LengthMismatch(EvalError):
    pass


class EmptyInput(EvalError):
    pass


class EmptyMatrix(EvalError):
    pass


@dataclass
class ConfusionMatrix:
    """Counts with attacked as the positive class."""

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class Metrics:
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None


@dataclass
class MetricsReport:
    """One scenario's confusion counts, metrics, and optional reference deltas."""

    scenario: str
    confusion: ConfusionMatrix
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None
    paper_precision: float | None = None
    paper_recall: float | None = None
    paper_f1: float | None = None

    def deltas(self) -> dict[str, float | None]:
        """ours - paper per metric; None when either side is undefined."""

        def sub(ours, ref):
            return None if ours is None or ref is None else ours - ref

        return {
            "precision": sub(self.precision, self.paper_precision),
            "recall": sub(self.recall, self.paper_recall),
            "f1": sub(self.f1, self.paper_f1),
        }

    def to_json(self) -> str:
        payload = {
            "scenario": self.scenario,
            "confusion": vars(self.confusion),
            "metrics": {
                "accuracy": self.accuracy,
                "precision": self.precision,
                "recall": self.recall,
                "f1": self.f1,
            },
        }
        if self.paper_f1 is not None or self.paper_precision is not None:
            payload["paper"] = {
                "precision": self.paper_precision,
                "recall": self.paper_recall,
                "f1": self.paper_f1,
            }
            payload["delta"] = self.deltas()
        return json.dumps(payload, indent=2)

    def format_table(self) -> str:
        """Aligned plain-text rendering."""

        def fmt(v):
            return "undefined" if v is None else f"{v:.4f}"

        cm = self.confusion
        lines = [
            f"scenario: {self.scenario}",
            f"  counts    tp={cm.tp} fp={cm.fp} tn={cm.tn} fn={cm.fn} total={cm.total}",
            f"  {'metric':<10}{'ours':>10}",
        ]
        has_ref = self.paper_f1 is not None or self.paper_precision is not None
        if has_ref:
            lines[-1] += f"{'paper':>10}{'delta':>10}"
        rows = [
            ("accuracy", self.accuracy, None),
            ("precision", self.precision, self.paper_precision),
            ("recall", self.recall, self.paper_recall),
            ("f1", self.f1, self.paper_f1),
        ]
        deltas = self.deltas()
        for name, ours, ref in rows:
            line = f"  {name:<10}{fmt(ours):>10}"
            if has_ref:
                delta = deltas.get(name)
                line += f"{fmt(ref):>10}{fmt(delta):>10}"
            lines.append(line)
        return "\n".join(lines)


def confusion(predictions: Sequence[int], labels: Sequence[int]) -> ConfusionMatrix:
    """Count tp/fp/tn/fn; inputs are 0 (attack-free) / 1 (attacked)."""
    if len(predictions) != len(labels):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(labels)} labels")
    if len(predictions) == 0:
        raise EmptyInput("nothing to evaluate")
    cm = ConfusionMatrix()
    for pred, truth in zip(predictions, labels):
        if truth:
            if pred:
                cm.tp += 1
            else:
                cm.fn += 1
        else:
            if pred:
                cm.fp += 1
            else:
                cm.tn += 1
    return cm


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Accuracy, precision, recall, F1 from counts; degenerate cases are None."""
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix has no counts")
    accuracy = (cm.tp + cm.tn) / cm.total
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp > 0 else None
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn > 0 else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return Metrics(accuracy, precision, recall, f1)


def scenario_report(
    name: str,
    predictions: Sequence[int],
    labels: Sequence[int],
    paper_targets: tuple[float, float, float] | None = None,
) -> MetricsReport:
    """Assemble the full report for one named scenario.

    paper_targets is an explicit (precision, recall, f1) triple; use
    PAPER_TARGETS[name] for the published numbers.
    """
    if name not in SCENARIOS:
        raise EvalError(f"unknown scenario {name!r}; expected one of {SCENARIOS}")
    cm = confusion(predictions, labels)
    m = metrics(cm)
    report = MetricsReport(
        scenario=name,
        confusion=cm,
        accuracy=m.accuracy,
        precision=m.precision,
        recall=m.recall,
        f1=m.f1,
    )
    if paper_targets is not None:
        report.paper_precision, report.paper_recall, report.paper_f1 = paper_targets
    return report
