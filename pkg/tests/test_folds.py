import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cohortsweep.folds import (
    ConfusionCounts,
    FoldError,
    UndefinedMetricError,
    aggregate_folds,
    classification_metrics,
    confusion_counts,
    stratified_folds,
)


def labels_2230():
    return np.array([1] * 8 + [-1] * 22)


def test_default_shape_fold_counts():
    plan = stratified_folds(labels_2230(), 4, seed=3)
    labels = labels_2230()
    for fold in range(4):
        val = plan.val_mask(fold)
        assert (labels[val] == 1).sum() == 2
        assert (labels[val] == -1).sum() in (5, 6)


def test_two_fold_alternating():
    plan = stratified_folds(np.array([1, -1, 1, -1]), 2, seed=0)
    for fold in range(2):
        val = plan.val_mask(fold)
        assert val.sum() == 2
        assert sorted(np.array([1, -1, 1, -1])[val]) == [-1, 1]


def test_fold_determinism():
    labels = labels_2230()
    p1 = stratified_folds(labels, 4, seed=42)
    p2 = stratified_folds(labels, 4, seed=42)
    assert np.array_equal(p1.assignment, p2.assignment)
    p3 = stratified_folds(labels, 4, seed=43)
    assert not np.array_equal(p1.assignment, p3.assignment)


def test_stratification_bound_across_seeds():
    rng = np.random.default_rng(0)
    for seed in range(100):
        n_pos = int(rng.integers(4, 12))
        n_neg = int(rng.integers(4, 30))
        labels = np.array([1] * n_pos + [-1] * n_neg)
        rng.shuffle(labels)
        k = int(rng.integers(2, 5))
        plan = stratified_folds(labels, k, seed=seed)
        pos_counts = [int((labels[plan.val_mask(f)] == 1).sum()) for f in range(k)]
        neg_counts = [int((labels[plan.val_mask(f)] == -1).sum()) for f in range(k)]
        assert max(pos_counts) - min(pos_counts) <= 1
        assert max(neg_counts) - min(neg_counts) <= 1
        assert sum(pos_counts) == n_pos and sum(neg_counts) == n_neg


def test_fold_errors():
    with pytest.raises(FoldError):
        stratified_folds(np.array([1, -1]), 1, seed=0)
    with pytest.raises(FoldError):
        stratified_folds(np.array([1, 1, 1]), 2, seed=0)


def test_metric_examples():
    assert classification_metrics(ConfusionCounts(tp=2, fp=0, tn=5, fn=0)) == (1.0, 1.0, 1.0)
    acc, rec, spec = classification_metrics(ConfusionCounts(tp=1, fp=0, tn=5, fn=1))
    assert rec == 0.5 and spec == 1.0 and acc == pytest.approx(6 / 7)
    acc, rec, spec = classification_metrics(ConfusionCounts(tp=0, fp=0, tn=6, fn=2))
    assert rec == 0.0 and spec == 1.0


def test_metric_undefined_denominators():
    with pytest.raises(UndefinedMetricError):
        classification_metrics(ConfusionCounts(tp=0, fp=0, tn=0, fn=0))
    with pytest.raises(UndefinedMetricError, match="recall"):
        classification_metrics(ConfusionCounts(tp=0, fp=1, tn=3, fn=0))
    with pytest.raises(UndefinedMetricError, match="specificity"):
        classification_metrics(ConfusionCounts(tp=2, fp=0, tn=0, fn=1))


def test_confusion_counts_sum():
    true = np.array([1, 1, -1, -1, -1])
    pred = np.array([1, -1, -1, 1, -1])
    c = confusion_counts(true, pred)
    assert (c.tp, c.fn, c.fp, c.tn) == (1, 1, 1, 2)
    assert c.total == 5


def test_aggregation_convention():
    mean, sd = aggregate_folds([1.0, 0.5, 0.5, 0.0])
    assert round(mean, 3) == 0.500 and round(sd, 3) == 0.354
    mean, sd = aggregate_folds([1.0, 1.0, 1.0, 0.5])
    assert round(mean, 3) == 0.875 and round(sd, 3) == 0.217
    mean, sd = aggregate_folds([1.0, 1.0, 1.0, 1.0])
    assert mean == 1.0 and sd == 0.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=0, max_value=1), min_size=1, max_size=8))
def test_aggregation_bounds(rates):
    mean, sd = aggregate_folds(rates)
    assert 0.0 <= mean <= 1.0
    assert sd >= 0.0
    assert sd == pytest.approx(float(np.std(rates)), abs=1e-12)  # population convention
