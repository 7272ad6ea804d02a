"""Spearman rank correlations with exact small-n p-values and BH-FDR control.

Symptom scores are small integers, so ties are the norm: ranks are averaged
over tied runs and rho is the Pearson correlation of the rank vectors. With at
most a handful of case subjects per test, the exact two-sided permutation
p-value (all n! orderings) is cheap and sidesteps approximation arguments; a
Student-t approximation is available for larger n.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np
from scipy.stats import t as student_t

from .cohort import SymptomTable

RHO_SLACK = 1e-12  # |rho_perm| >= |rho_obs| - slack counts as at least as extreme
EXACT_MAX_N = 10


class RankStatsError(ValueError):
    pass


class ConstantInputError(RankStatsError):
    """Correlation undefined: one of the vectors has zero rank variance."""


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they occupy."""
    values = np.asarray(values, dtype=float)
    if values.size < 1:
        raise RankStatsError("need at least one value to rank")
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts + 1
    return ((starts + ends) / 2.0)[inverse]


def spearman_rho(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation of average ranks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise RankStatsError(f"need equal-length vectors, got shapes {x.shape} and {y.shape}")
    if len(x) < 3:
        raise RankStatsError(f"need n >= 3, got {len(x)}")
    rx = average_ranks(x)
    ry = average_ranks(y)
    cx = rx - rx.mean()
    cy = ry - ry.mean()
    denom = math.sqrt(float(cx @ cx) * float(cy @ cy))
    if denom == 0.0:
        raise ConstantInputError("constant vector: rank correlation undefined")
    return float(cx @ cy) / denom


@lru_cache(maxsize=None)
def _perm_matrix(n: int) -> np.ndarray:
    return np.array(list(permutations(range(n))), dtype=np.int8)


def _exact_pvalue(rx: np.ndarray, ry: np.ndarray, rho_obs: float) -> float:
    n = len(rx)
    n_fact = math.factorial(n)
    cx = rx - rx.mean()
    cy = ry - ry.mean()
    denom = math.sqrt(float(cx @ cx) * float(cy @ cy))
    threshold = abs(rho_obs) - RHO_SLACK
    perms = _perm_matrix(n)
    hits = 0
    batch = 200_000  # keeps the permuted-rank block under ~20 MB at n = 10
    for start in range(0, n_fact, batch):
        rhos = ((ry[perms[start : start + batch]] - ry.mean()) @ cx) / denom
        hits += int(np.count_nonzero(np.abs(rhos) >= threshold))
    return hits / n_fact


def spearman_pvalue(x: np.ndarray, y: np.ndarray, method: str = "auto") -> float:
    """Two-sided p-value for the observed rho.

    ``exact`` enumerates all n! orderings of y (n <= 10); ``t_approx`` uses the
    Student-t transform; ``auto`` picks exact for n <= 10.
    """
    if method not in ("exact", "t_approx", "auto"):
        raise RankStatsError(f"unknown p-value method {method!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    rho = spearman_rho(x, y)
    if method == "auto":
        method = "exact" if n <= EXACT_MAX_N else "t_approx"
    if method == "exact":
        if n > EXACT_MAX_N:
            raise RankStatsError(f"exact enumeration limited to n <= {EXACT_MAX_N}, got {n}")
        return _exact_pvalue(average_ranks(x), average_ranks(y), rho)
    if abs(rho) >= 1.0 - RHO_SLACK:
        # t statistic diverges; the exact tail for |rho| = 1 is 2 of n! orderings
        if n <= EXACT_MAX_N:
            return _exact_pvalue(average_ranks(x), average_ranks(y), rho)
        return 2.0 / math.factorial(n)
    t_stat = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return float(2.0 * student_t.sf(abs(t_stat), df=n - 2))


def bh_fdr(pvalues: np.ndarray, q: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Benjamini-Hochberg step-up: (rejection flags, adjusted p-values)."""
    pvalues = np.asarray(pvalues, dtype=float)
    m = len(pvalues)
    if m == 0:
        return np.zeros(0, dtype=bool), np.zeros(0)
    order = np.argsort(pvalues, kind="stable")
    ranked = pvalues[order]
    scaled = ranked * m / np.arange(1, m + 1)
    adjusted_sorted = np.minimum(1.0, np.minimum.accumulate(scaled[::-1])[::-1])
    passing = np.flatnonzero(ranked <= q * np.arange(1, m + 1) / m)
    cutoff = passing[-1] + 1 if len(passing) else 0
    reject_sorted = np.arange(m) < cutoff
    reject = np.empty(m, dtype=bool)
    adjusted = np.empty(m)
    reject[order] = reject_sorted
    adjusted[order] = adjusted_sorted
    return reject, adjusted


@dataclass
class CorrelationRecord:
    metric_set: str
    symptom: str
    component: int  # 1-based
    n: int
    rho: float | None = None
    p: float | None = None
    p_bh: float | None = None
    significant_uncorrected: bool = False
    significant_fdr: bool = False
    status: str = "ok"  # ok | insufficient-n | undefined-correlation


def correlate_symptoms(
    case_component_scores: dict[str, np.ndarray],
    score_subject_ids: list[str],
    symptoms: SymptomTable,
    alpha: float = 0.05,
    q: float = 0.05,
    p_method: str = "auto",
) -> list[CorrelationRecord]:
    """One record per (metric set, component, symptom) over pairwise-complete cases.

    ``case_component_scores`` maps a set name to a (cases x retained components)
    score matrix whose rows follow ``score_subject_ids``. BH correction is
    applied jointly across every record that produced a p-value.
    """
    row_of = {sid: i for i, sid in enumerate(score_subject_ids)}
    missing_rows = [sid for sid in symptoms.subject_ids if sid not in row_of]
    if missing_rows:
        raise RankStatsError(f"symptom rows without component scores: {missing_rows}")
    symptom_rows = np.array([row_of[sid] for sid in symptoms.subject_ids], dtype=int)

    sorted_symptoms = sorted((name, idx) for idx, name in enumerate(symptoms.columns))
    records: list[CorrelationRecord] = []
    for set_name in sorted(case_component_scores):
        scores = np.asarray(case_component_scores[set_name], dtype=float)
        for comp in range(scores.shape[1]):
            component_values = scores[symptom_rows, comp]
            for symptom, col in sorted_symptoms:
                sym_values = symptoms.values[:, col]
                mask = ~np.isnan(sym_values)
                n = int(mask.sum())
                record = CorrelationRecord(
                    metric_set=set_name, symptom=symptom, component=comp + 1, n=n
                )
                if n < 3:
                    record.status = "insufficient-n"
                else:
                    try:
                        record.rho = spearman_rho(component_values[mask], sym_values[mask])
                        record.p = spearman_pvalue(component_values[mask], sym_values[mask], p_method)
                        record.significant_uncorrected = record.p < alpha
                    except ConstantInputError:
                        record.rho = None
                        record.p = None
                        record.status = "undefined-correlation"
                records.append(record)

    testable = [r for r in records if r.p is not None]
    if testable:
        reject, adjusted = bh_fdr(np.array([r.p for r in testable]), q=q)
        for record, flag, adj in zip(testable, reject, adjusted):
            record.p_bh = float(adj)
            record.significant_fdr = bool(flag)
    return records


def write_correlations(records: list[CorrelationRecord], path) -> None:
    """correlations.csv: metric_set,symptom,component,n,rho,p,p_bh,sig_uncorrected,sig_fdr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["metric_set", "symptom", "component", "n", "rho", "p", "p_bh", "sig_uncorrected", "sig_fdr"]
        )
        for r in records:
            writer.writerow(
                [
                    r.metric_set,
                    r.symptom,
                    r.component,
                    r.n,
                    "" if r.rho is None else f"{r.rho:.4f}",
                    "" if r.p is None else f"{r.p:.4f}",
                    "" if r.p_bh is None else f"{r.p_bh:.4f}",
                    str(r.significant_uncorrected).lower(),
                    str(r.significant_fdr).lower(),
                ]
            )
