"""Control-referenced manifold classification of small case/control cohorts.

Metric tables are z-scored against the control group, embedded with
control-only PCA, and swept component by component through cross-validated
RBF-SVM classifiers with per-fold hyperparameter tuning; retained components
are then rank-correlated with symptom scores under FDR control.
"""

__version__ = "0.1.0"

from .cohort import (
    CohortDataset,
    CohortError,
    MetricTable,
    Subject,
    SymptomTable,
    load_cohort,
    save_cohort,
    validate_cohort,
)
from .folds import FoldPlan, ConfusionCounts, aggregate_folds, classification_metrics, stratified_folds
from .normalize import NormalizationStats, apply_normalizer, fit_normalizer
from .pca import PcaModel, explained_variance_ratio, fit_pca, project
from .pipeline import RunArtifacts, RunConfig, emit_report, run_pipeline
from .rankstats import bh_fdr, correlate_symptoms, spearman_pvalue, spearman_rho
from .svm import SvmHyperparams, SvmModel, decision_values, predict, rbf_kernel, train_svm
from .sweep import OperatingPoint, SweepCurve, select_c0, sweep_combined, sweep_individual
from .synth import Coupling, SetSpec, SynthConfig, generate_cohort
from .tuning import TuneConfig, TuneTrace, inner_cv_loss, optimize_hyperparams

__all__ = [
    "__version__",
    "CohortDataset", "CohortError", "MetricTable", "Subject", "SymptomTable",
    "load_cohort", "save_cohort", "validate_cohort",
    "FoldPlan", "ConfusionCounts", "aggregate_folds", "classification_metrics", "stratified_folds",
    "NormalizationStats", "apply_normalizer", "fit_normalizer",
    "PcaModel", "explained_variance_ratio", "fit_pca", "project",
    "RunArtifacts", "RunConfig", "emit_report", "run_pipeline",
    "bh_fdr", "correlate_symptoms", "spearman_pvalue", "spearman_rho",
    "SvmHyperparams", "SvmModel", "decision_values", "predict", "rbf_kernel", "train_svm",
    "OperatingPoint", "SweepCurve", "select_c0", "sweep_combined", "sweep_individual",
    "Coupling", "SetSpec", "SynthConfig", "generate_cohort",
    "TuneConfig", "TuneTrace", "inner_cv_loss", "optimize_hyperparams",
]
