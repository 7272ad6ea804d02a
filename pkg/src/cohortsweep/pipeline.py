"""End-to-end orchestration: load, normalize, embed, sweep, correlate, report.

Two preprocessing modes:

* ``paper-faithful`` (default): the normalizer and PCA are fit once on all
  control subjects before cross-validation, and every sweep works in that
  single embedding.
* ``nested``: both are refit inside each outer fold using only the controls in
  that fold's training portion, which removes the preprocessing leak at the
  cost of fold-dependent embeddings. The sweep length is then bounded by the
  smallest per-fold component budget.

Every stage failure is re-raised as a PipelineStageError naming the stage.
"""

from __future__ import annotations

import datetime
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cohort import CohortDataset, ValidationReport, load_cohort, validate_cohort
from .folds import FoldPlan, stratified_folds
from .kvconfig import ConfigError, parse_bool, parse_kv, write_kv
from .normalize import apply_normalizer, fit_normalizer, zscore_feature, DEFAULT_SIGMA_FLOOR
from .pca import fit_pca, project
from .rankstats import CorrelationRecord, correlate_symptoms, write_correlations
from .svgplot import sweep_chart
from .sweep import (
    FoldSweeper,
    OperatingPoint,
    SweepCurve,
    select_c0,
    sweep_combined,
    sweep_individual,
    sweep_prepared,
)
from .tuning import TuneConfig

MODE_FAITHFUL = "paper-faithful"
MODE_NESTED = "nested"
COMBINED_NAME = "combined"
COMBINED_ENDPOINT_RULE = "sweep to max(c0_a, c0_b), clamping each set at its own c0"


class PipelineStageError(RuntimeError):
    def __init__(self, stage: str, message: str) -> None:
        super().__init__(message)
        self.stage = stage


@contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(name, str(exc)) from exc


@dataclass
class RunConfig:
    subjects_path: Path
    metric_paths: dict[str, Path]
    symptoms_path: Path | None = None
    outer_folds: int = 4
    tuner: str = "grid"
    mode: str = MODE_FAITHFUL
    fold_seed: int = 0
    tune_seed: int = 0
    tune_budget: int = 30
    inner_folds: int = 5
    alpha: float = 0.05
    q: float = 0.05
    raw_age: bool = False
    sigma_floor: float = DEFAULT_SIGMA_FLOOR

    _SCALARS = {
        "outer_folds": int,
        "tuner": str,
        "mode": str,
        "fold_seed": int,
        "tune_seed": int,
        "tune_budget": int,
        "inner_folds": int,
        "alpha": float,
        "q": float,
        "sigma_floor": float,
    }

    def __post_init__(self) -> None:
        if self.mode not in (MODE_FAITHFUL, MODE_NESTED):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.outer_folds < 2:
            raise ConfigError("outer_folds must be >= 2")
        if COMBINED_NAME in self.metric_paths:
            raise ConfigError(f"metric set name {COMBINED_NAME!r} is reserved")

    @classmethod
    def from_kv(cls, kv: dict[str, str], base_dir: Path) -> "RunConfig":
        def path_of(value: str) -> Path:
            p = Path(value)
            return (base_dir / p).resolve() if not p.is_absolute() else p

        known = set(cls._SCALARS) | {"subjects", "symptoms", "raw_age"}
        metric_paths: dict[str, Path] = {}
        fields: dict = {}
        for key, value in kv.items():
            if key.startswith("info."):
                continue
            if key.startswith("metric."):
                metric_paths[key[len("metric.") :]] = path_of(value)
            elif key == "subjects":
                fields["subjects_path"] = path_of(value)
            elif key == "symptoms":
                fields["symptoms_path"] = path_of(value)
            elif key == "raw_age":
                fields["raw_age"] = parse_bool(value, key)
            elif key in cls._SCALARS:
                fields[key] = cls._SCALARS[key](value)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        if "subjects_path" not in fields:
            raise ConfigError("config is missing the 'subjects' key")
        if not metric_paths:
            raise ConfigError("config defines no metric.<set> keys")
        return cls(metric_paths=metric_paths, **fields)

    def to_kv(self) -> dict[str, str]:
        pairs: dict[str, str] = {"subjects": str(self.subjects_path)}
        for name in sorted(self.metric_paths):
            pairs[f"metric.{name}"] = str(self.metric_paths[name])
        if self.symptoms_path is not None:
            pairs["symptoms"] = str(self.symptoms_path)
        for key in self._SCALARS:
            pairs[key] = str(getattr(self, key))
        pairs["raw_age"] = str(self.raw_age).lower()
        return pairs

    def tune_config(self) -> TuneConfig:
        return TuneConfig(
            budget=self.tune_budget,
            inner_folds=self.inner_folds,
            seed=self.tune_seed,
            tuner=self.tuner,
        )


@dataclass
class RunArtifacts:
    config: RunConfig
    validation: ValidationReport
    curves: dict[str, SweepCurve]
    operating_points: dict[str, OperatingPoint]
    combined_curve: SweepCurve | None
    combined_point: OperatingPoint | None
    correlations: list[CorrelationRecord]
    notes: list[str] = field(default_factory=list)


def _faithful_scores(ds: CohortDataset, cfg: RunConfig) -> dict[str, np.ndarray]:
    """Fit normalizer and PCA on all controls once; project every subject."""
    control_ids = set(ds.control_ids)
    control_mask = np.array([s.group == "control" for s in ds.subjects])
    scores: dict[str, np.ndarray] = {}
    for set_name in sorted(ds.metrics):
        table = ds.metrics[set_name]
        stats = fit_normalizer(table, control_ids, sigma_floor=cfg.sigma_floor)
        z = apply_normalizer(stats, table)
        model = fit_pca(z[control_mask])
        scores[set_name] = project(model, z, model.k_max)
    return scores


def _nested_fold_scores(
    ds: CohortDataset, cfg: RunConfig, plan: FoldPlan
) -> tuple[dict[str, list[tuple[np.ndarray, np.ndarray]]], dict[str, int]]:
    """Per-fold embeddings fit on that fold's training controls only.

    Returns per-set lists of (train scores, val scores) and the per-set sweep
    bound (the smallest fold k_max).
    """
    control_mask = np.array([s.group == "control" for s in ds.subjects])
    ids = np.array(ds.ids)
    per_set: dict[str, list[tuple[np.ndarray, np.ndarray]]] = {}
    bounds: dict[str, int] = {}
    for set_name in sorted(ds.metrics):
        table = ds.metrics[set_name]
        fold_scores = []
        k_bound = None
        for fold in range(plan.k):
            train = plan.train_mask(fold)
            train_controls = set(ids[train & control_mask])
            stats = fit_normalizer(table, train_controls, sigma_floor=cfg.sigma_floor)
            z = apply_normalizer(stats, table)
            model = fit_pca(z[train & control_mask])
            k_bound = model.k_max if k_bound is None else min(k_bound, model.k_max)
            fold_scores.append(
                (project(model, z[train], model.k_max), project(model, z[plan.val_mask(fold)], model.k_max))
            )
        per_set[set_name] = fold_scores
        bounds[set_name] = int(k_bound)
    return per_set, bounds


def _nested_age(ds: CohortDataset, cfg: RunConfig, plan: FoldPlan) -> list[tuple[np.ndarray, np.ndarray]]:
    ages = ds.ages()
    control_mask = np.array([s.group == "control" for s in ds.subjects])
    out = []
    for fold in range(plan.k):
        train = plan.train_mask(fold)
        val = plan.val_mask(fold)
        if cfg.raw_age:
            z = ages
        else:
            z = zscore_feature(ages, train & control_mask, name="age", sigma_floor=cfg.sigma_floor)
        out.append((z[train].reshape(-1, 1), z[val].reshape(-1, 1)))
    return out


def _nested_sweeps(
    ds: CohortDataset, cfg: RunConfig, plan: FoldPlan, labels: np.ndarray, tune_cfg: TuneConfig
) -> tuple[dict[str, SweepCurve], dict[str, OperatingPoint], SweepCurve | None, OperatingPoint | None]:
    per_set, bounds = _nested_fold_scores(ds, cfg, plan)
    age_cols = _nested_age(ds, cfg, plan)

    def sweepers() -> list[FoldSweeper]:
        return [
            FoldSweeper(labels[plan.train_mask(f)], labels[plan.val_mask(f)], *age_cols[f])
            for f in range(plan.k)
        ]

    curves: dict[str, SweepCurve] = {}
    points: dict[str, OperatingPoint] = {}
    for set_name in sorted(per_set):
        additions = [
            [
                (per_set[set_name][f][0][:, k : k + 1], per_set[set_name][f][1][:, k : k + 1])
                for f in range(plan.k)
            ]
            for k in range(bounds[set_name])
        ]
        curves[set_name] = sweep_prepared(set_name, sweepers(), additions, tune_cfg)
        points[set_name] = select_c0(curves[set_name])

    combined_curve = combined_point = None
    if len(per_set) == 2:
        name_a, name_b = sorted(per_set)
        ka, kb = points[name_a].c0, points[name_b].c0
        additions = []
        for k in range(max(ka, kb)):
            per_fold = []
            for f in range(plan.k):
                cols_tr, cols_va = [], []
                if k < ka:
                    cols_tr.append(per_set[name_a][f][0][:, k : k + 1])
                    cols_va.append(per_set[name_a][f][1][:, k : k + 1])
                if k < kb:
                    cols_tr.append(per_set[name_b][f][0][:, k : k + 1])
                    cols_va.append(per_set[name_b][f][1][:, k : k + 1])
                per_fold.append((np.hstack(cols_tr), np.hstack(cols_va)))
            additions.append(per_fold)
        combined_curve = sweep_prepared(COMBINED_NAME, sweepers(), additions, tune_cfg)
        combined_point = select_c0(combined_curve)
    return curves, points, combined_curve, combined_point


def run_pipeline(cfg: RunConfig) -> RunArtifacts:
    """Execute the full analysis over one cohort."""
    notes: list[str] = []
    with _stage("load"):
        ds = load_cohort(cfg.subjects_path, cfg.metric_paths, cfg.symptoms_path)
    with _stage("validate"):
        validation = validate_cohort(ds)
    labels = ds.labels()
    tune_cfg = cfg.tune_config()

    with _stage("folds"):
        n_pos = int((labels == 1).sum())
        if n_pos < cfg.outer_folds:
            raise ValueError(
                f"{n_pos} case subjects cannot stratify {cfg.outer_folds} outer folds"
            )
        plan = stratified_folds(labels, cfg.outer_folds, cfg.fold_seed)

    combined_curve = combined_point = None
    if cfg.mode == MODE_FAITHFUL:
        with _stage("embed"):
            scores = _faithful_scores(ds, cfg)
            control_mask = labels == -1
            age = ds.ages() if cfg.raw_age else zscore_feature(ds.ages(), control_mask, name="age")
        with _stage("sweep"):
            curves: dict[str, SweepCurve] = {}
            points: dict[str, OperatingPoint] = {}
            for set_name in sorted(scores):
                curves[set_name] = sweep_individual(
                    scores[set_name], age, labels, plan, tune_cfg, name=set_name
                )
                points[set_name] = select_c0(curves[set_name])
            if len(scores) == 2:
                name_a, name_b = sorted(scores)
                combined_curve = sweep_combined(
                    scores[name_a], points[name_a], scores[name_b], points[name_b],
                    age, labels, plan, tune_cfg, name=COMBINED_NAME,
                )
                combined_point = select_c0(combined_curve)
    else:
        with _stage("sweep"):
            curves, points, combined_curve, combined_point = _nested_sweeps(
                ds, cfg, plan, labels, tune_cfg
            )

    if len(curves) != 2:
        notes.append(f"combined sweep skipped: {len(curves)} metric set(s)")

    records: list[CorrelationRecord] = []
    if ds.symptoms is None:
        notes.append("symptom correlation skipped: no symptom table")
    elif cfg.mode == MODE_NESTED:
        notes.append("symptom correlation skipped: nested mode has no single embedding")
    else:
        with _stage("correlate"):
            case_mask = labels == 1
            case_ids = ds.case_ids
            retained: dict[str, int] = {}
            for set_name, op in points.items():
                retained[set_name] = (
                    min(combined_point.c0, op.c0) if combined_point is not None else op.c0
                )
            case_scores = {
                set_name: scores[set_name][case_mask][:, : retained[set_name]]
                for set_name in scores
            }
            records = correlate_symptoms(
                case_scores, case_ids, ds.symptoms, alpha=cfg.alpha, q=cfg.q
            )

    return RunArtifacts(
        config=cfg,
        validation=validation,
        curves=curves,
        operating_points=points,
        combined_curve=combined_curve,
        combined_point=combined_point,
        correlations=records,
        notes=notes,
    )


def _performance_rows(artifacts: RunArtifacts) -> list[tuple[str, OperatingPoint]]:
    rows = [(name, artifacts.operating_points[name]) for name in sorted(artifacts.operating_points)]
    if artifacts.combined_point is not None:
        rows.append((COMBINED_NAME, artifacts.combined_point))
    return rows


def emit_report(artifacts: RunArtifacts, out_dir: str | Path) -> dict[str, Path]:
    """Write the manifest, tables, sweep curves, and charts into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    manifest = artifacts.config.to_kv()
    manifest["info.tool_version"] = __version__
    manifest["info.timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    manifest["info.combined_endpoint"] = COMBINED_ENDPOINT_RULE
    for name, op in _performance_rows(artifacts):
        manifest[f"info.c0.{name}"] = str(op.c0)
    for idx, note in enumerate(artifacts.notes):
        manifest[f"info.note.{idx}"] = note
    manifest_path = out_dir / "manifest.txt"
    write_kv(manifest, manifest_path, header="run manifest")
    written["manifest"] = manifest_path

    perf_path = out_dir / "performance_table.csv"
    with open(perf_path, "w", newline="", encoding="utf-8") as fh:
        fh.write("set,c0,accuracy_mean,accuracy_sd,recall_mean,recall_sd,specificity_mean,specificity_sd\n")
        for name, op in _performance_rows(artifacts):
            p = op.point
            fh.write(
                f"{name},{op.c0},{p.acc_mean:.3f},{p.acc_sd:.3f},"
                f"{p.recall_mean:.3f},{p.recall_sd:.3f},{p.spec_mean:.3f},{p.spec_sd:.3f}\n"
            )
    written["performance_table"] = perf_path

    corr_path = out_dir / "correlations.csv"
    write_correlations(artifacts.correlations, corr_path)
    written["correlations"] = corr_path

    all_curves = dict(artifacts.curves)
    if artifacts.combined_curve is not None:
        all_curves[COMBINED_NAME] = artifacts.combined_curve
    ops = dict(artifacts.operating_points)
    if artifacts.combined_point is not None:
        ops[COMBINED_NAME] = artifacts.combined_point
    for name, curve in all_curves.items():
        curve_path = out_dir / f"sweep_curve_{name}.csv"
        curve.dump(curve_path)
        written[f"curve_{name}"] = curve_path
        svg_path = out_dir / f"sweep_{name}.svg"
        svg_path.write_text(_chart_for(curve, ops[name].c0), encoding="utf-8")
        written[f"chart_{name}"] = svg_path
    return written


def _chart_for(curve: SweepCurve, c0: int) -> str:
    counts = [p.component_count for p in curve.points]
    series = {
        "accuracy": [p.acc_mean for p in curve.points],
        "recall": [p.recall_mean for p in curve.points],
        "specificity": [p.spec_mean for p in curve.points],
    }
    return sweep_chart(f"sweep: {curve.name}", counts, series, c0=c0)


def rerender_report(artifacts_dir: str | Path) -> dict[str, Path]:
    """Rebuild performance_table.csv and the charts from emitted curve files."""
    artifacts_dir = Path(artifacts_dir)
    manifest = parse_kv(artifacts_dir / "manifest.txt")
    c0s = {
        key[len("info.c0.") :]: int(value)
        for key, value in manifest.items()
        if key.startswith("info.c0.")
    }
    written: dict[str, Path] = {}
    rows = []
    for name in sorted(c0s):
        curve_path = artifacts_dir / f"sweep_curve_{name}.csv"
        if not curve_path.exists():
            raise PipelineStageError("report", f"missing curve file {curve_path}")
        counts, series = _read_curve_csv(curve_path)
        svg_path = artifacts_dir / f"sweep_{name}.svg"
        svg_path.write_text(
            sweep_chart(f"sweep: {name}", counts, {k: v[0] for k, v in series.items()}, c0=c0s[name]),
            encoding="utf-8",
        )
        written[f"chart_{name}"] = svg_path
        at = counts.index(c0s[name])
        rows.append(
            (name, c0s[name])
            + tuple(series[s][i][at] for s in ("accuracy", "recall", "specificity") for i in (0, 1))
        )
    ordered = [r for r in rows if r[0] != COMBINED_NAME] + [r for r in rows if r[0] == COMBINED_NAME]
    perf_path = artifacts_dir / "performance_table.csv"
    with open(perf_path, "w", newline="", encoding="utf-8") as fh:
        fh.write("set,c0,accuracy_mean,accuracy_sd,recall_mean,recall_sd,specificity_mean,specificity_sd\n")
        for row in ordered:
            fh.write(f"{row[0]},{row[1]}," + ",".join(f"{v:.3f}" for v in row[2:]) + "\n")
    written["performance_table"] = perf_path
    return written


def _read_curve_csv(path: Path) -> tuple[list[int], dict[str, tuple[list[float], list[float]]]]:
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        idx = {name: header.index(name) for name in
               ("component_count", "acc_mean", "acc_sd", "recall_mean", "recall_sd", "spec_mean", "spec_sd")}
        counts: list[int] = []
        acc: tuple[list[float], list[float]] = ([], [])
        rec: tuple[list[float], list[float]] = ([], [])
        spec: tuple[list[float], list[float]] = ([], [])
        for row in reader:
            counts.append(int(row[idx["component_count"]]))
            acc[0].append(float(row[idx["acc_mean"]]))
            acc[1].append(float(row[idx["acc_sd"]]))
            rec[0].append(float(row[idx["recall_mean"]]))
            rec[1].append(float(row[idx["recall_sd"]]))
            spec[0].append(float(row[idx["spec_mean"]]))
            spec[1].append(float(row[idx["spec_sd"]]))
    return counts, {"accuracy": acc, "recall": rec, "specificity": spec}
