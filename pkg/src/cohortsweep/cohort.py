"""Cohort data model: subjects, named metric tables, optional symptom scores.

CSV schemas (UTF-8, comma-separated, ``.`` decimal point):

* ``subjects.csv``    header ``subject_id,group,age``; group is ``control`` or ``mtbi``
* ``metrics_<set>.csv`` header ``subject_id,<m1>,<m2>,...``; one row per subject
* ``symptoms.csv``    header ``subject_id,<symptom1>,...``; rows are case subjects,
  cells are integers 1..5, empty cell = missing

All matrices use the canonical subject order: ascending lexical subject id.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GROUP_CONTROL = "control"
GROUP_CASE = "mtbi"

# The 22-item symptom inventory used as the default symptom column set.
DEFAULT_SYMPTOMS = (
    "Dizziness",
    "Loss of Balance",
    "Poor Coordination",
    "Headaches",
    "Nausea",
    "Vision Problems",
    "Light Sensitivity",
    "Hearing Difficulty",
    "Noise Sensitivity",
    "Numbness",
    "Taste or Smell Changes",
    "Appetite Change",
    "Poor Concentration",
    "Forgetfulness",
    "Difficulty Making Decisions",
    "Slowed Thinking",
    "Fatigue",
    "Difficulty Sleeping",
    "Anxiety",
    "Feeling Depressed",
    "Irritability",
    "Frustration",
)


class CohortError(ValueError):
    """Malformed or internally inconsistent cohort input."""


@dataclass(frozen=True)
class Subject:
    id: str
    group: str
    age: float


@dataclass
class MetricTable:
    """One named set of per-subject metrics, rows aligned to the dataset subject order."""

    set_name: str
    columns: list[str]
    values: np.ndarray  # n_subjects x n_columns, finite floats
    subject_ids: list[str] = field(default_factory=list)  # row order, canonical ascending ids


@dataclass
class SymptomTable:
    """Per-case symptom scores; NaN marks a missing cell."""

    columns: list[str]
    subject_ids: list[str]  # case subjects, canonical order
    values: np.ndarray  # len(subject_ids) x len(columns), entries in {1..5} or NaN


@dataclass
class CohortDataset:
    subjects: list[Subject]  # canonical ascending-id order
    metrics: dict[str, MetricTable]
    symptoms: SymptomTable | None = None

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.subjects]

    @property
    def control_ids(self) -> list[str]:
        return [s.id for s in self.subjects if s.group == GROUP_CONTROL]

    @property
    def case_ids(self) -> list[str]:
        return [s.id for s in self.subjects if s.group == GROUP_CASE]

    def labels(self) -> np.ndarray:
        """+1 for case subjects, -1 for controls, in subject order."""
        return np.array([1 if s.group == GROUP_CASE else -1 for s in self.subjects])

    def ages(self) -> np.ndarray:
        return np.array([s.age for s in self.subjects], dtype=float)


@dataclass
class ValidationReport:
    n_control: int
    n_case: int
    metric_widths: dict[str, int]
    symptoms_present: bool
    symptom_missing: dict[str, int] = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = [
            f"controls: {self.n_control}",
            f"cases: {self.n_case}",
        ]
        for name in sorted(self.metric_widths):
            out.append(f"metrics[{name}]: {self.metric_widths[name]} columns")
        if not self.symptoms_present:
            out.append("symptoms: absent")
        else:
            total = sum(self.symptom_missing.values())
            out.append(f"symptoms: {len(self.symptom_missing)} columns, {total} missing cells")
        return out


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CohortError(f"{path}: empty file") from None
        return header, [row for row in reader if row]


def _parse_float(text: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CohortError(f"{where}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise CohortError(f"{where}: non-finite value {text!r}")
    return value


def load_subjects(path: str | Path) -> list[Subject]:
    path = Path(path)
    header, rows = _read_rows(path)
    if header != ["subject_id", "group", "age"]:
        raise CohortError(f"{path}: expected header subject_id,group,age, got {header}")
    subjects: list[Subject] = []
    seen: set[str] = set()
    for row in rows:
        if len(row) != 3:
            raise CohortError(f"{path}: row {row} has {len(row)} fields, expected 3")
        sid, group, age_text = row
        if not sid:
            raise CohortError(f"{path}: empty subject id")
        if sid in seen:
            raise CohortError(f"{path}: duplicate subject id {sid!r}")
        seen.add(sid)
        if group not in (GROUP_CONTROL, GROUP_CASE):
            raise CohortError(f"{path}: unknown group {group!r} for subject {sid!r}")
        age = _parse_float(age_text, f"{path}: subject {sid!r} age")
        if age < 0:
            raise CohortError(f"{path}: subject {sid!r} has negative age {age}")
        subjects.append(Subject(id=sid, group=group, age=age))
    subjects.sort(key=lambda s: s.id)
    return subjects


def load_metric_table(path: str | Path, set_name: str, subject_ids: list[str]) -> MetricTable:
    path = Path(path)
    header, rows = _read_rows(path)
    if not header or header[0] != "subject_id":
        raise CohortError(f"{path}: first header field must be subject_id")
    columns = header[1:]
    if len(columns) < 1:
        raise CohortError(f"{path}: metric table needs at least one metric column")
    if len(set(columns)) != len(columns):
        raise CohortError(f"{path}: duplicate metric column names")
    by_id: dict[str, list[float]] = {}
    known = set(subject_ids)
    for row in rows:
        if len(row) != len(header):
            raise CohortError(f"{path}: row for {row[0]!r} has {len(row)} fields, expected {len(header)}")
        sid = row[0]
        if sid not in known:
            raise CohortError(f"{path}: metric row for unknown subject {sid!r}")
        if sid in by_id:
            raise CohortError(f"{path}: duplicate metric row for subject {sid!r}")
        by_id[sid] = [_parse_float(cell, f"{path}: {sid!r}/{col}") for col, cell in zip(columns, row[1:])]
    missing = [sid for sid in subject_ids if sid not in by_id]
    if missing:
        raise CohortError(f"{path}: no metric row for subjects {missing}")
    values = np.array([by_id[sid] for sid in subject_ids], dtype=float)
    return MetricTable(set_name=set_name, columns=columns, values=values, subject_ids=list(subject_ids))


def load_symptom_table(path: str | Path, case_ids: list[str]) -> SymptomTable:
    path = Path(path)
    header, rows = _read_rows(path)
    if not header or header[0] != "subject_id":
        raise CohortError(f"{path}: first header field must be subject_id")
    columns = header[1:]
    if len(set(columns)) != len(columns):
        raise CohortError(f"{path}: duplicate symptom column names")
    cases = set(case_ids)
    by_id: dict[str, list[float]] = {}
    for row in rows:
        if len(row) != len(header):
            raise CohortError(f"{path}: row for {row[0]!r} has {len(row)} fields, expected {len(header)}")
        sid = row[0]
        if sid not in cases:
            raise CohortError(f"{path}: symptom row for non-case subject {sid!r}")
        if sid in by_id:
            raise CohortError(f"{path}: duplicate symptom row for subject {sid!r}")
        scores: list[float] = []
        for col, cell in zip(columns, row[1:]):
            if cell == "":
                scores.append(math.nan)
                continue
            try:
                score = int(cell)
            except ValueError:
                raise CohortError(f"{path}: {sid!r}/{col}: symptom score must be an integer 1..5, got {cell!r}") from None
            if not 1 <= score <= 5:
                raise CohortError(f"{path}: {sid!r}/{col}: symptom score {score} outside 1..5")
            scores.append(float(score))
        by_id[sid] = scores
    present = [sid for sid in case_ids if sid in by_id]
    values = (
        np.array([by_id[sid] for sid in present], dtype=float)
        if present
        else np.zeros((0, len(columns)))
    )
    return SymptomTable(columns=columns, subject_ids=present, values=values)


def load_cohort(
    subjects_path: str | Path,
    metric_paths: dict[str, str | Path],
    symptoms_path: str | Path | None = None,
) -> CohortDataset:
    """Load and validate a cohort from CSV files; rows realigned to canonical id order."""
    subjects = load_subjects(subjects_path)
    ids = [s.id for s in subjects]
    if sum(1 for s in subjects if s.group == GROUP_CONTROL) < 2:
        raise CohortError("cohort needs at least 2 control subjects")
    if not metric_paths:
        raise CohortError("at least one metric table is required")
    metrics = {
        name: load_metric_table(path, name, ids) for name, path in sorted(metric_paths.items())
    }
    symptoms = None
    if symptoms_path is not None:
        case_ids = [s.id for s in subjects if s.group == GROUP_CASE]
        symptoms = load_symptom_table(symptoms_path, case_ids)
    return CohortDataset(subjects=subjects, metrics=metrics, symptoms=symptoms)


def validate_cohort(ds: CohortDataset) -> ValidationReport:
    """Report-only summary: group counts, table widths, symptom completeness."""
    report = ValidationReport(
        n_control=len(ds.control_ids),
        n_case=len(ds.case_ids),
        metric_widths={name: len(t.columns) for name, t in ds.metrics.items()},
        symptoms_present=ds.symptoms is not None,
    )
    if ds.symptoms is not None:
        missing = np.isnan(ds.symptoms.values).sum(axis=0) if len(ds.symptoms.subject_ids) else np.zeros(len(ds.symptoms.columns))
        report.symptom_missing = {
            col: int(n) for col, n in zip(ds.symptoms.columns, missing)
        }
    return report


def format_float(value: float) -> str:
    """Shortest round-trip decimal form, stable across runs."""
    return repr(float(value))


def save_cohort(ds: CohortDataset, out_dir: str | Path) -> dict[str, Path]:
    """Write the dataset back out in the exact CSV schemas load_cohort reads."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    subjects_path = out_dir / "subjects.csv"
    with open(subjects_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "group", "age"])
        for s in ds.subjects:
            writer.writerow([s.id, s.group, format_float(s.age)])
    written["subjects"] = subjects_path

    for name, table in sorted(ds.metrics.items()):
        path = out_dir / f"metrics_{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["subject_id"] + list(table.columns))
            for sid, row in zip(ds.ids, table.values):
                writer.writerow([sid] + [format_float(v) for v in row])
        written[f"metrics_{name}"] = path

    if ds.symptoms is not None:
        path = out_dir / "symptoms.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["subject_id"] + list(ds.symptoms.columns))
            for sid, row in zip(ds.symptoms.subject_ids, ds.symptoms.values):
                writer.writerow([sid] + ["" if math.isnan(v) else str(int(v)) for v in row])
        written["symptoms"] = path

    return written
