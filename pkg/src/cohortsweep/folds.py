"""Stratified fold assignment and fold-level classification metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FoldError(ValueError):
    pass


class UndefinedMetricError(ValueError):
    """A rate whose denominator is zero (e.g. recall with no positives in the fold)."""


@dataclass
class FoldPlan:
    k: int
    assignment: np.ndarray  # fold index per subject, aligned with the label vector
    seed: int

    def train_mask(self, fold: int) -> np.ndarray:
        return self.assignment != fold

    def val_mask(self, fold: int) -> np.ndarray:
        return self.assignment == fold


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def stratified_folds(labels: np.ndarray, k: int, seed: int) -> FoldPlan:
    """Seeded shuffle within each class, then round-robin assignment to folds.

    Per-fold counts of each class differ by at most one; the plan is a pure
    function of (labels, k, seed).
    """
    labels = np.asarray(labels)
    if k < 2:
        raise FoldError(f"need at least 2 folds, got {k}")
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == -1)
    if len(pos) == 0 or len(neg) == 0:
        raise FoldError("both classes must be present")
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(labels), dtype=int)
    for class_idx in (pos, neg):
        shuffled = class_idx[rng.permutation(len(class_idx))]
        assignment[shuffled] = np.arange(len(shuffled)) % k
    return FoldPlan(k=k, assignment=assignment, seed=seed)


def confusion_counts(true_labels: np.ndarray, predicted: np.ndarray) -> ConfusionCounts:
    true_labels = np.asarray(true_labels)
    predicted = np.asarray(predicted)
    return ConfusionCounts(
        tp=int(np.sum((true_labels == 1) & (predicted == 1))),
        fp=int(np.sum((true_labels == -1) & (predicted == 1))),
        tn=int(np.sum((true_labels == -1) & (predicted == -1))),
        fn=int(np.sum((true_labels == 1) & (predicted == -1))),
    )


def classification_metrics(c: ConfusionCounts) -> tuple[float, float, float]:
    """(accuracy, recall, specificity) with the case class as positive."""
    if c.total == 0:
        raise UndefinedMetricError("empty validation fold")
    if c.tp + c.fn == 0:
        raise UndefinedMetricError("recall undefined: no positive subjects in fold")
    if c.tn + c.fp == 0:
        raise UndefinedMetricError("specificity undefined: no negative subjects in fold")
    accuracy = (c.tp + c.tn) / c.total
    recall = c.tp / (c.tp + c.fn)
    specificity = c.tn / (c.tn + c.fp)
    return accuracy, recall, specificity


def aggregate_folds(rates: np.ndarray) -> tuple[float, float]:
    """Unweighted mean and population sd (divisor k) across fold rates."""
    rates = np.asarray(rates, dtype=float)
    if rates.size < 1:
        raise FoldError("need at least one fold rate")
    return float(rates.mean()), float(rates.std(ddof=0))
