import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cohortsweep.cohort import SymptomTable
from cohortsweep.rankstats import (
    ConstantInputError,
    RankStatsError,
    average_ranks,
    bh_fdr,
    correlate_symptoms,
    spearman_pvalue,
    spearman_rho,
    write_correlations,
)
from cohortsweep.normalize import apply_normalizer, fit_normalizer
from cohortsweep.pca import fit_pca, project
from cohortsweep.synth import Coupling, SetSpec, SynthConfig, generate_cohort

from oracles import bh_oracle, pearson_of_ranks_oracle, spearman_exact_oracle


def test_average_ranks_examples():
    assert list(average_ranks([10, 20, 30])) == [1, 2, 3]
    assert list(average_ranks([5, 5])) == [1.5, 1.5]
    assert list(average_ranks([7, 3, 7, 1])) == [3.5, 2, 3.5, 1]


def test_ranks_sum():
    rng = np.random.default_rng(0)
    for _ in range(20):
        values = rng.integers(1, 5, size=rng.integers(1, 12)).astype(float)
        ranks = average_ranks(values)
        n = len(values)
        assert ranks.sum() == pytest.approx(n * (n + 1) / 2)


def test_rho_concordance():
    x = np.array([1.0, 2.0, 5.0, 9.0])
    assert spearman_rho(x, x * 3 + 1) == pytest.approx(1.0)
    assert spearman_rho(x, -x) == pytest.approx(-1.0)


def test_rho_matches_pearson_of_ranks_oracle():
    x = [1.0, 2.0, 2.0, 4.0]
    y = [3.0, 1.0, 2.0, 4.0]
    assert spearman_rho(x, y) == pytest.approx(pearson_of_ranks_oracle(x, y), abs=1e-12)


def test_rho_monotone_invariance():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(9)
    y = rng.standard_normal(9)
    rho = spearman_rho(x, y)
    assert spearman_rho(np.exp(x), y) == pytest.approx(rho, abs=1e-12)
    assert spearman_rho(x, y**3) == pytest.approx(rho, abs=1e-12)


def test_rho_errors():
    with pytest.raises(RankStatsError):
        spearman_rho([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ConstantInputError):
        spearman_rho([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def test_exact_pvalue_n3():
    x = np.array([1.0, 2.0, 3.0])
    assert spearman_pvalue(x, np.array([10.0, 20.0, 30.0]), "exact") == pytest.approx(1 / 3)
    # observed rho 0.5: all six permutation rhos satisfy |rho| >= 0.5
    assert spearman_pvalue(x, np.array([2.0, 1.0, 3.0]), "exact") == pytest.approx(1.0)


def test_pvalue_symmetric_in_arguments():
    rng = np.random.default_rng(2)
    for _ in range(5):
        x = rng.standard_normal(6)
        y = rng.standard_normal(6)
        assert spearman_pvalue(x, y, "exact") == pytest.approx(
            spearman_pvalue(y, x, "exact"), abs=1e-12
        )


def test_exact_matches_fraction_oracle_with_ties():
    rng = np.random.default_rng(3)
    for n in (3, 4, 5, 6):
        for _ in range(4):
            x = rng.integers(1, 4, size=n).astype(float)
            y = rng.integers(1, 6, size=n).astype(float)
            if len(set(x)) < 2 or len(set(y)) < 2:
                continue
            ours = spearman_pvalue(x, y, "exact")
            oracle = spearman_exact_oracle(list(x), list(y))
            assert Fraction(ours).limit_denominator(math.factorial(n)) == oracle


def test_pvalue_symmetric_in_rho_sign():
    rng = np.random.default_rng(12)
    for _ in range(5):
        x = rng.standard_normal(6)
        y = rng.standard_normal(6)
        assert spearman_pvalue(x, y, "exact") == pytest.approx(
            spearman_pvalue(x, -y, "exact"), abs=1e-15
        )


def test_pvalues_live_on_permutation_lattice():
    rng = np.random.default_rng(4)
    for _ in range(10):
        x = rng.standard_normal(5)
        y = rng.standard_normal(5)
        p = spearman_pvalue(x, y, "exact")
        assert (p * math.factorial(5)) == pytest.approx(round(p * math.factorial(5)))


def test_perfect_rho_under_t_approx_falls_back_to_exact():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    p = spearman_pvalue(x, 2 * x, "t_approx")
    assert p == pytest.approx(2 / 24)


def test_t_approx_reasonable():
    rng = np.random.default_rng(5)
    x = np.arange(20.0)
    y = x + rng.normal(0, 4, size=20)
    p = spearman_pvalue(x, y, "auto")  # n > 10 routes to the t branch
    assert 0.0 < p < 0.01


def test_bh_examples():
    reject, adjusted = bh_fdr(np.array([0.01, 0.02, 0.04]), q=0.05)
    assert reject.all()
    reject, adjusted = bh_fdr(np.array([0.03]), q=0.05)
    assert reject[0] and adjusted[0] == pytest.approx(0.03)
    reject, adjusted = bh_fdr(np.array([]), q=0.05)
    assert len(reject) == 0 and len(adjusted) == 0


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.floats(min_value=1e-9, max_value=1.0), min_size=1, max_size=20),
    st.sampled_from([0.01, 0.05, 0.1]),
)
def test_bh_matches_bruteforce_oracle(pvalues, q):
    reject, adjusted = bh_fdr(np.array(pvalues), q=q)
    oracle_reject, oracle_adjusted = bh_oracle(pvalues, q)
    assert list(reject) == oracle_reject
    assert np.allclose(adjusted, oracle_adjusted, atol=1e-12)
    # flags coincide with thresholding the adjusted values
    assert list(reject) == [a <= q + 1e-12 for a in adjusted]
    order = np.argsort(pvalues, kind="stable")
    assert np.all(np.diff(adjusted[order]) >= -1e-12)


def coupled_records(seed, strength=0.9, missing=0.0):
    cfg = SynthConfig(
        n_controls=14,
        n_cases=8,
        sets={"a": SetSpec(width=8, latent_dim=3), "b": SetSpec(width=10, latent_dim=3)},
        couplings=[Coupling(set_name="a", latent=2, symptom="Fatigue", strength=strength)],
        missing_rate=missing,
        seed=seed,
    )
    ds, truth = generate_cohort(cfg)
    labels = ds.labels()
    control_mask = labels == -1
    case_mask = labels == 1
    case_scores = {}
    for name, table in ds.metrics.items():
        stats = fit_normalizer(table, set(ds.control_ids))
        z = apply_normalizer(stats, table)
        model = fit_pca(z[control_mask])
        case_scores[name] = project(model, z, 3)[case_mask]
    return correlate_symptoms(case_scores, ds.case_ids, ds.symptoms), ds


def test_record_count_matches_component_budget():
    rng = np.random.default_rng(6)
    case_ids = [f"p{i}" for i in range(8)]
    symptoms = SymptomTable(
        columns=[f"sym{i:02d}" for i in range(22)],
        subject_ids=case_ids,
        values=rng.integers(1, 6, size=(8, 22)).astype(float),
    )
    scores = {"dwi": rng.standard_normal((8, 11)), "t1w": rng.standard_normal((8, 11))}
    records = correlate_symptoms(scores, case_ids, symptoms)
    assert len(records) == 484
    assert all(r.n == 8 for r in records)
    # deterministic ordering: set, then component, then symptom
    keys = [(r.metric_set, r.component, r.symptom) for r in records]
    assert keys == sorted(keys)


def test_constant_symptom_flagged():
    case_ids = [f"p{i}" for i in range(6)]
    rng = np.random.default_rng(7)
    symptoms = SymptomTable(
        columns=["Flat", "Varies"],
        subject_ids=case_ids,
        values=np.column_stack([np.full(6, 3.0), rng.integers(1, 6, size=6)]).astype(float),
    )
    scores = {"s": rng.standard_normal((6, 2))}
    records = correlate_symptoms(scores, case_ids, symptoms)
    flat = [r for r in records if r.symptom == "Flat"]
    assert flat and all(r.status == "undefined-correlation" for r in flat)
    assert all(r.p is None for r in flat)


def test_insufficient_n_record():
    case_ids = ["p0", "p1", "p2", "p3"]
    symptoms = SymptomTable(
        columns=["Sparse"],
        subject_ids=case_ids,
        values=np.array([[2.0], [np.nan], [np.nan], [4.0]]),
    )
    scores = {"s": np.random.default_rng(8).standard_normal((4, 1))}
    records = correlate_symptoms(scores, case_ids, symptoms)
    assert records[0].status == "insufficient-n"
    assert records[0].n == 2
    assert records[0].p is None


def test_missing_cells_reduce_n():
    records, ds = coupled_records(seed=9, missing=0.2)
    ns = {r.n for r in records}
    assert min(ns) < 8
    counted = np.isnan(ds.symptoms.values).sum(axis=0)
    for r in records:
        col = ds.symptoms.columns.index(r.symptom)
        assert r.n == 8 - counted[col]


def test_symptom_coupled_to_component_score_has_smallest_p():
    # symptom built as a monotone transform of the observed PC5 score plus
    # light noise; its record must dominate the symptom row
    hits = 0
    for seed in range(20):
        cfg = SynthConfig(
            n_controls=16,
            n_cases=8,
            sets={"a": SetSpec(width=8, latent_dim=3), "b": SetSpec(width=10, latent_dim=3)},
            with_symptoms=False,
            seed=500 + seed,
        )
        ds, _ = generate_cohort(cfg)
        labels = ds.labels()
        control_mask, case_mask = labels == -1, labels == 1
        case_scores = {}
        for name, table in ds.metrics.items():
            stats = fit_normalizer(table, set(ds.control_ids))
            z = apply_normalizer(stats, table)
            model = fit_pca(z[control_mask])
            case_scores[name] = project(model, z, 5)[case_mask]
        rng = np.random.default_rng(seed)
        target = case_scores["b"][:, 4]
        zt = (target - target.mean()) / target.std()
        coupled = np.clip(np.round(3.0 + 0.9 * zt + 0.1 * rng.standard_normal(8)), 1, 5)
        columns = ["Coupled"] + [f"null{i}" for i in range(9)]
        values = np.column_stack(
            [coupled] + [np.clip(np.round(3 + rng.standard_normal(8)), 1, 5) for _ in range(9)]
        )
        symptoms = SymptomTable(columns=columns, subject_ids=ds.case_ids, values=values)
        records = correlate_symptoms(case_scores, ds.case_ids, symptoms)
        row = [r for r in records if r.symptom == "Coupled" and r.p is not None]
        best = min(row, key=lambda r: r.p)
        if best.metric_set == "b" and best.component == 5:
            hits += 1
    assert hits >= 16


def test_latent_coupling_recovered_through_embedding():
    # generator-level coupling: needs well-separated latent variances so the
    # embedding maps latent 1 onto component 1 stably
    hits = 0
    for seed in range(20):
        cfg = SynthConfig(
            n_controls=22,
            n_cases=8,
            sets={
                "a": SetSpec(width=10, latent_dim=3, latent_decay=0.4, signal_to_noise=16.0),
                "b": SetSpec(width=10, latent_dim=3),
            },
            couplings=[Coupling(set_name="a", latent=1, symptom="Fatigue", strength=0.9)],
            seed=1000 + seed,
        )
        ds, _ = generate_cohort(cfg)
        labels = ds.labels()
        control_mask, case_mask = labels == -1, labels == 1
        case_scores = {}
        for name, table in ds.metrics.items():
            stats = fit_normalizer(table, set(ds.control_ids))
            z = apply_normalizer(stats, table)
            model = fit_pca(z[control_mask])
            case_scores[name] = project(model, z, 3)[case_mask]
        records = correlate_symptoms(case_scores, ds.case_ids, ds.symptoms)
        row = [r for r in records if r.symptom == "Fatigue" and r.p is not None]
        best = min(row, key=lambda r: r.p)
        if best.metric_set == "a" and best.component == 1:
            hits += 1
    assert hits >= 16


def test_written_record_renders_in_table_order(tmp_path):
    from cohortsweep.rankstats import CorrelationRecord

    record = CorrelationRecord(
        metric_set="T1w",
        symptom="Appetite Change",
        component=5,
        n=8,
        rho=0.7910,
        p=0.0196,
        p_bh=0.95,
        significant_uncorrected=True,
        significant_fdr=False,
    )
    path = tmp_path / "one.csv"
    write_correlations([record], path)
    line = path.read_text().splitlines()[1]
    assert line == "T1w,Appetite Change,5,8,0.7910,0.0196,0.9500,true,false"


def test_write_correlations(tmp_path):
    records, _ = coupled_records(seed=11)
    path = tmp_path / "corr.csv"
    write_correlations(records, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "metric_set,symptom,component,n,rho,p,p_bh,sig_uncorrected,sig_fdr"
    assert len(lines) == len(records) + 1
    write_correlations([], tmp_path / "empty.csv")
    assert (tmp_path / "empty.csv").read_text().splitlines() == [lines[0]]
