"""Outer cross-validated component sweeps and operating-point selection.

Each sweep iteration trains one RBF-SVM per outer fold on the leading
principal components (plus the age feature), with hyperparameters re-tuned on
that fold's training subjects. Pairwise squared distances are maintained
incrementally as components are appended, so the per-iteration cost is
dominated by SMO itself.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .folds import FoldPlan, ConfusionCounts, aggregate_folds, classification_metrics, confusion_counts
from .svm import SvmHyperparams, squared_distances, train_svm
from .tuning import TuneConfig, optimize_hyperparams


class SweepError(ValueError):
    pass


@dataclass
class SweepPoint:
    component_count: int
    fold_accuracy: list[float]
    fold_recall: list[float]
    fold_specificity: list[float]
    fold_hyperparams: list[SvmHyperparams]
    fold_counts: list[ConfusionCounts]
    acc_mean: float = 0.0
    acc_sd: float = 0.0
    recall_mean: float = 0.0
    recall_sd: float = 0.0
    spec_mean: float = 0.0
    spec_sd: float = 0.0

    def __post_init__(self) -> None:
        self.acc_mean, self.acc_sd = aggregate_folds(self.fold_accuracy)
        self.recall_mean, self.recall_sd = aggregate_folds(self.fold_recall)
        self.spec_mean, self.spec_sd = aggregate_folds(self.fold_specificity)


@dataclass
class SweepCurve:
    name: str
    points: list[SweepPoint]

    def mean_recalls(self) -> np.ndarray:
        return np.array([p.recall_mean for p in self.points])

    def dump(self, path) -> None:
        n_folds = len(self.points[0].fold_hyperparams) if self.points else 0
        header = [
            "component_count",
            "acc_mean", "acc_sd",
            "recall_mean", "recall_sd",
            "spec_mean", "spec_sd",
        ]
        for f in range(n_folds):
            header += [f"fold{f}_C", f"fold{f}_s"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for p in self.points:
                row = [
                    p.component_count,
                    repr(p.acc_mean), repr(p.acc_sd),
                    repr(p.recall_mean), repr(p.recall_sd),
                    repr(p.spec_mean), repr(p.spec_sd),
                ]
                for hp in p.fold_hyperparams:
                    row += [repr(hp.box_constraint), repr(hp.kernel_scale)]
                writer.writerow(row)


@dataclass
class OperatingPoint:
    c0: int
    point: SweepPoint


class FoldSweeper:
    """One outer fold's incremental feature/distance state during a sweep."""

    def __init__(
        self,
        y_train: np.ndarray,
        y_val: np.ndarray,
        base_train: np.ndarray | None = None,
        base_val: np.ndarray | None = None,
    ) -> None:
        self.y_train = np.asarray(y_train)
        self.y_val = np.asarray(y_val)
        n_tr, n_va = len(self.y_train), len(self.y_val)
        self._cols_train: list[np.ndarray] = []
        self._cols_val: list[np.ndarray] = []
        self.d2_tt = np.zeros((n_tr, n_tr))
        self.d2_tv = np.zeros((n_tr, n_va))
        if base_train is not None:
            self.add_columns(base_train, base_val)

    def add_columns(self, cols_train: np.ndarray, cols_val: np.ndarray) -> None:
        cols_train = np.asarray(cols_train, dtype=float)
        cols_val = np.asarray(cols_val, dtype=float)
        if cols_train.ndim != 2 or cols_train.shape[0] != len(self.y_train):
            raise SweepError(f"training columns have shape {cols_train.shape}, expected ({len(self.y_train)}, m)")
        if cols_val.ndim != 2 or cols_val.shape[0] != len(self.y_val):
            raise SweepError(f"validation columns have shape {cols_val.shape}, expected ({len(self.y_val)}, m)")
        self._cols_train.append(cols_train)
        self._cols_val.append(cols_val)
        self.d2_tt += squared_distances(cols_train, cols_train)
        self.d2_tv += squared_distances(cols_train, cols_val)

    def evaluate(self, tune_cfg: TuneConfig) -> tuple[float, float, float, SvmHyperparams, ConfusionCounts]:
        x_train = np.hstack(self._cols_train)
        hp, _trace = optimize_hyperparams(x_train, self.y_train, tune_cfg, sq_dists=self.d2_tt)
        model = train_svm(x_train, self.y_train, hp, sq_dists=self.d2_tt)
        s = hp.kernel_scale
        if len(model.dual_coef):
            k_val = np.exp(-self.d2_tv[model.sv_index] / (s * s))
            f = model.dual_coef @ k_val + model.bias
        else:
            f = np.full(len(self.y_val), model.bias)
        preds = np.where(f > 0, 1, -1)
        counts = confusion_counts(self.y_val, preds)
        accuracy, recall, specificity = classification_metrics(counts)
        return accuracy, recall, specificity, hp, counts


def _fold_sweepers(
    labels: np.ndarray, plan: FoldPlan, age_feature: np.ndarray | None
) -> list[FoldSweeper]:
    sweepers = []
    for fold in range(plan.k):
        tr = plan.train_mask(fold)
        va = plan.val_mask(fold)
        base_tr = age_feature[tr].reshape(-1, 1) if age_feature is not None else None
        base_va = age_feature[va].reshape(-1, 1) if age_feature is not None else None
        sweepers.append(FoldSweeper(labels[tr], labels[va], base_tr, base_va))
    return sweepers


def _evaluate_point(k: int, sweepers: list[FoldSweeper], tune_cfg: TuneConfig) -> SweepPoint:
    accs, recs, specs, hps, counts = [], [], [], [], []
    for sweeper in sweepers:
        accuracy, recall, specificity, hp, c = sweeper.evaluate(tune_cfg)
        accs.append(accuracy)
        recs.append(recall)
        specs.append(specificity)
        hps.append(hp)
        counts.append(c)
    return SweepPoint(
        component_count=k,
        fold_accuracy=accs,
        fold_recall=recs,
        fold_specificity=specs,
        fold_hyperparams=hps,
        fold_counts=counts,
    )


def sweep_prepared(
    name: str,
    sweepers: list[FoldSweeper],
    additions: list[list[tuple[np.ndarray, np.ndarray]]],
    tune_cfg: TuneConfig,
) -> SweepCurve:
    """Sweep over pre-built per-fold column groups.

    ``additions[k][fold]`` holds the (train, val) columns appended at iteration
    k+1; used by the nested-preprocessing mode where features differ per fold.
    """
    points = []
    for k, per_fold in enumerate(additions, start=1):
        if len(per_fold) != len(sweepers):
            raise SweepError(f"iteration {k} provides {len(per_fold)} folds, expected {len(sweepers)}")
        for sweeper, (cols_train, cols_val) in zip(sweepers, per_fold):
            sweeper.add_columns(cols_train, cols_val)
        points.append(_evaluate_point(k, sweepers, tune_cfg))
    return SweepCurve(name=name, points=points)


def sweep_individual(
    scores: np.ndarray,
    age_feature: np.ndarray | None,
    labels: np.ndarray,
    plan: FoldPlan,
    tune_cfg: TuneConfig,
    name: str = "set",
    max_components: int | None = None,
) -> SweepCurve:
    """Sweep one metric set: iteration k trains on components 1..k plus age."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape[0] != len(labels):
        raise SweepError(f"{scores.shape[0]} score rows but {len(labels)} labels")
    length = scores.shape[1] if max_components is None else min(max_components, scores.shape[1])
    if length < 1:
        raise SweepError("sweep needs at least one component")
    sweepers = _fold_sweepers(labels, plan, age_feature)
    points = []
    for k in range(1, length + 1):
        col = scores[:, k - 1 : k]
        for fold in range(plan.k):
            sweepers[fold].add_columns(col[plan.train_mask(fold)], col[plan.val_mask(fold)])
        points.append(_evaluate_point(k, sweepers, tune_cfg))
    return SweepCurve(name=name, points=points)


def combined_column_groups(
    scores_a: np.ndarray, ka: int, scores_b: np.ndarray, kb: int
) -> list[np.ndarray]:
    """Columns appended at each combined-sweep iteration.

    Iteration k contributes component k from each set whose operating point has
    not been reached yet, so the features at k are components 1..min(k, c0) of
    each set; the sweep runs to max(ka, kb).
    """
    groups = []
    for k in range(1, max(ka, kb) + 1):
        cols = []
        if k <= ka:
            cols.append(scores_a[:, k - 1 : k])
        if k <= kb:
            cols.append(scores_b[:, k - 1 : k])
        groups.append(np.hstack(cols))
    return groups


def sweep_combined(
    scores_a: np.ndarray,
    c0_a: "OperatingPoint | int",
    scores_b: np.ndarray,
    c0_b: "OperatingPoint | int",
    age_feature: np.ndarray | None,
    labels: np.ndarray,
    plan: FoldPlan,
    tune_cfg: TuneConfig,
    name: str = "combined",
) -> SweepCurve:
    """Joint sweep: iteration k uses components 1..min(k, C0) from each set, plus age once."""
    ka = c0_a.c0 if isinstance(c0_a, OperatingPoint) else int(c0_a)
    kb = c0_b.c0 if isinstance(c0_b, OperatingPoint) else int(c0_b)
    scores_a = np.asarray(scores_a, dtype=float)
    scores_b = np.asarray(scores_b, dtype=float)
    if not (1 <= ka <= scores_a.shape[1]) or not (1 <= kb <= scores_b.shape[1]):
        raise SweepError(f"operating points ({ka}, {kb}) exceed available components")
    labels = np.asarray(labels)
    sweepers = _fold_sweepers(labels, plan, age_feature)
    points = []
    for k, cols in enumerate(combined_column_groups(scores_a, ka, scores_b, kb), start=1):
        for fold in range(plan.k):
            sweepers[fold].add_columns(cols[plan.train_mask(fold)], cols[plan.val_mask(fold)])
        points.append(_evaluate_point(k, sweepers, tune_cfg))
    return SweepCurve(name=name, points=points)


def select_c0(curve: SweepCurve) -> OperatingPoint:
    """Smallest component count attaining the maximum fold-averaged recall."""
    if not curve.points:
        raise SweepError("empty sweep curve")
    recalls = curve.mean_recalls()
    best = recalls.max()
    idx = int(np.flatnonzero(recalls == best)[0])
    return OperatingPoint(c0=curve.points[idx].component_count, point=curve.points[idx])
