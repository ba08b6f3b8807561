"""Empirical fairness and accuracy evaluation of a classifier."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import GROUPS, FairClassifier, LabeledDataset, UnlabeledDataset
from .errors import DataError


@dataclass(frozen=True)
class EvalReport:
    """Accuracy, max prediction-rate disparity, and per-group rate tables."""

    accuracy: float | None
    unfairness: float
    rates: dict[int, np.ndarray]  # s -> (K,) conditional prediction rates
    counts: dict[int, np.ndarray]  # s -> (K,) prediction counts

    def to_json(self) -> str:
        doc = {
            "accuracy": self.accuracy,
            "unfairness": self.unfairness,
            "rates": {str(s): [float(v) for v in self.rates[s]] for s in GROUPS},
            "counts": {str(s): [int(v) for v in self.counts[s]] for s in GROUPS},
        }
        return json.dumps(doc, sort_keys=True)

    def csv_row(self) -> dict[str, str]:
        row = {"accuracy": "" if self.accuracy is None else format(self.accuracy, ".12g"),
               "unfairness": format(self.unfairness, ".12g")}
        for s in GROUPS:
            for k, v in enumerate(self.rates[s], start=1):
                row[f"rate_s{s:+d}_k{k}"] = format(v, ".12g")
        return row


def _prediction_rates(pred: np.ndarray, s: np.ndarray, k: int):
    rates, counts = {}, {}
    for sv in GROUPS:
        mask = s == sv
        if not mask.any():
            raise DataError(f"group s={sv:+d} is empty in the evaluation set")
        counts[sv] = np.bincount(pred[mask], minlength=k + 1)[1:]
        rates[sv] = counts[sv] / mask.sum()
    return rates, counts


def empirical_unfairness(g: FairClassifier, test: UnlabeledDataset) -> float:
    """Largest absolute gap between the groups' conditional prediction
    rates, max over classes; always in [0, 1]."""
    pred = g.predict(test.x, test.s)
    rates, _ = _prediction_rates(pred, test.s, g.model.n_classes)
    return float(np.abs(rates[1] - rates[-1]).max())


def accuracy(g: FairClassifier, test: LabeledDataset) -> float:
    """Fraction of rows whose prediction matches the label."""
    pred = g.predict(test.x, test.s)
    return float(np.mean(pred == test.y))


def evaluate(g: FairClassifier, test: LabeledDataset) -> EvalReport:
    """Joint accuracy / unfairness report on a labeled evaluation set."""
    pred = g.predict(test.x, test.s)
    rates, counts = _prediction_rates(pred, test.s, g.model.n_classes)
    return EvalReport(
        accuracy=float(np.mean(pred == test.y)),
        unfairness=float(np.abs(rates[1] - rates[-1]).max()),
        rates=rates,
        counts=counts,
    )
