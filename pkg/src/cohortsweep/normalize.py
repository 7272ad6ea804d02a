"""Control-referenced z-scoring of metric tables.

Statistics come from control subjects only: each retained column is centered on
the control mean and scaled by the control sample standard deviation (n-1
denominator). Columns whose control sd falls at or below ``sigma_floor`` carry
no usable information and are excluded rather than clamped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .cohort import CohortError, MetricTable

DEFAULT_SIGMA_FLOOR = 1e-12


@dataclass
class NormalizationStats:
    set_name: str
    columns: list[str]  # original column order
    mu: np.ndarray  # control means, one per original column
    sigma: np.ndarray  # control sample sds, one per original column
    excluded: set[str]  # columns with sigma <= sigma_floor
    sigma_floor: float

    @property
    def retained_columns(self) -> list[str]:
        return [c for c in self.columns if c not in self.excluded]

    @property
    def retained_mask(self) -> np.ndarray:
        return np.array([c not in self.excluded for c in self.columns])


def fit_normalizer(
    table: MetricTable,
    control_ids: Iterable[str],
    sigma_floor: float = DEFAULT_SIGMA_FLOOR,
) -> NormalizationStats:
    """Compute per-column control mean/sd for ``table``.

    Only the rows whose subject id is in ``control_ids`` enter the statistics;
    case rows never influence the result.
    """
    control_ids = set(control_ids)
    mask = np.array([sid in control_ids for sid in table.subject_ids])
    if mask.sum() < 2:
        raise CohortError(
            f"normalizer for {table.set_name!r} needs at least 2 control subjects, got {int(mask.sum())}"
        )
    controls = table.values[mask]
    mu = controls.mean(axis=0)
    sigma = controls.std(axis=0, ddof=1)
    excluded = {col for col, s in zip(table.columns, sigma) if s <= sigma_floor}
    if len(excluded) == len(table.columns):
        raise CohortError(f"all columns of {table.set_name!r} have control sd <= {sigma_floor}")
    return NormalizationStats(
        set_name=table.set_name,
        columns=list(table.columns),
        mu=mu,
        sigma=sigma,
        excluded=excluded,
        sigma_floor=sigma_floor,
    )


def apply_normalizer(stats: NormalizationStats, table: MetricTable) -> np.ndarray:
    """z-score ``table`` against the fitted control stats.

    Returns the z-matrix over retained columns only, original order preserved.
    """
    if list(table.columns) != stats.columns:
        raise CohortError(
            f"column mismatch for {table.set_name!r}: table has {len(table.columns)} columns, "
            f"stats were fit on {len(stats.columns)}"
        )
    keep = stats.retained_mask
    return (table.values[:, keep] - stats.mu[keep]) / stats.sigma[keep]


def zscore_feature(
    values: np.ndarray,
    control_mask: np.ndarray,
    name: str = "feature",
    sigma_floor: float = DEFAULT_SIGMA_FLOOR,
) -> np.ndarray:
    """Control-referenced z-score of a single feature column (used for age)."""
    values = np.asarray(values, dtype=float)
    ids = [f"r{i}" for i in range(len(values))]
    table = MetricTable(set_name=name, columns=[name], values=values.reshape(-1, 1), subject_ids=ids)
    controls = {ids[i] for i in np.flatnonzero(np.asarray(control_mask))}
    stats = fit_normalizer(table, controls, sigma_floor=sigma_floor)
    return apply_normalizer(stats, table)[:, 0]


def dump_stats(stats: NormalizationStats, path: str | Path) -> None:
    """Audit dump: column,mu,sigma,excluded."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["column", "mu", "sigma", "excluded"])
        for col, mu, sigma in zip(stats.columns, stats.mu, stats.sigma):
            writer.writerow([col, repr(float(mu)), repr(float(sigma)), str(col in stats.excluded).lower()])
