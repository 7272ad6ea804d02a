import os
import sys
from pathlib import Path

# tiny matrices everywhere: BLAS threading is pure overhead, and the null-control
# acceptance test runs two worker processes side by side
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cohortsweep.cohort import CohortDataset, MetricTable, Subject, SymptomTable


def write_csv(path: Path, rows: list[list[str]]) -> Path:
    path.write_text("\n".join(",".join(row) for row in rows) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def tiny_cohort_files(tmp_path):
    """Two controls, one case, one 2-column metric set, symptoms for the case."""
    subjects = write_csv(
        tmp_path / "subjects.csv",
        [
            ["subject_id", "group", "age"],
            ["c01", "control", "30.0"],
            ["c02", "control", "40.0"],
            ["p01", "mtbi", "35.0"],
        ],
    )
    metrics = write_csv(
        tmp_path / "metrics_main.csv",
        [
            ["subject_id", "m1", "m2"],
            ["c01", "1.0", "10.0"],
            ["c02", "3.0", "30.0"],
            ["p01", "2.0", "50.0"],
        ],
    )
    symptoms = write_csv(
        tmp_path / "symptoms.csv",
        [
            ["subject_id", "Fatigue", "Anxiety"],
            ["p01", "4", ""],
        ],
    )
    return subjects, metrics, symptoms


def make_dataset(
    n_controls: int,
    n_cases: int,
    metric_values: dict[str, np.ndarray],
    ages: np.ndarray | None = None,
    symptoms: SymptomTable | None = None,
) -> CohortDataset:
    """In-memory dataset with ids ctrl_xx < mtbi_xx (canonical order)."""
    ids = [f"ctrl_{i:02d}" for i in range(1, n_controls + 1)] + [
        f"mtbi_{i:02d}" for i in range(1, n_cases + 1)
    ]
    if ages is None:
        ages = np.linspace(25, 55, n_controls + n_cases)
    subjects = [
        Subject(id=sid, group="control" if sid.startswith("ctrl") else "mtbi", age=float(a))
        for sid, a in zip(ids, ages)
    ]
    tables = {
        name: MetricTable(
            set_name=name,
            columns=[f"{name}_{j}" for j in range(values.shape[1])],
            values=np.asarray(values, dtype=float),
            subject_ids=ids,
        )
        for name, values in metric_values.items()
    }
    return CohortDataset(subjects=subjects, metrics=tables, symptoms=symptoms)
