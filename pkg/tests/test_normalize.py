import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cohortsweep.cohort import CohortError, MetricTable
from cohortsweep.normalize import apply_normalizer, fit_normalizer, zscore_feature


def table(values, ids=None, name="t"):
    values = np.asarray(values, dtype=float)
    ids = ids or [f"s{i}" for i in range(values.shape[0])]
    return MetricTable(
        set_name=name,
        columns=[f"c{j}" for j in range(values.shape[1])],
        values=values,
        subject_ids=ids,
    )


def test_sample_sd_convention():
    t = table([[1.0], [2.0], [3.0]])
    stats = fit_normalizer(t, {"s0", "s1", "s2"})
    assert stats.mu[0] == 2.0
    assert stats.sigma[0] == 1.0  # n-1 denominator


def test_constant_column_excluded():
    t = table([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]])
    stats = fit_normalizer(t, {"s0", "s1", "s2"})
    assert stats.excluded == {"c0"}
    assert stats.retained_columns == ["c1"]
    z = apply_normalizer(stats, t)
    assert z.shape == (3, 1)


def test_case_rows_never_influence_stats():
    values = np.array([[1.0, 4.0], [2.0, 5.0], [3.0, 6.0], [100.0, -7.0]])
    controls = {"s0", "s1", "s2"}
    stats_a = fit_normalizer(table(values), controls)
    perturbed = values.copy()
    perturbed[3] = [9999.0, 123.0]
    stats_b = fit_normalizer(table(perturbed), controls)
    assert np.array_equal(stats_a.mu, stats_b.mu)
    assert np.array_equal(stats_a.sigma, stats_b.sigma)


def test_z_values():
    t = table([[1.0], [2.0], [3.0]])
    stats = fit_normalizer(t, {"s0", "s1", "s2"})
    probe = table([[2.0], [3.0], [1.0]])
    z = apply_normalizer(stats, probe)
    assert z[0, 0] == 0.0  # value at the mean
    assert z[1, 0] == 1.0  # one sample sd above


def test_controls_become_standardized():
    rng = np.random.default_rng(3)
    values = rng.normal(50, 7, size=(10, 6)) * rng.uniform(0.1, 5, size=6)
    t = table(values)
    controls = set(t.subject_ids[:7])
    stats = fit_normalizer(t, controls)
    z = apply_normalizer(stats, t)[:7]
    assert np.abs(z.mean(axis=0)).max() < 1e-10
    assert np.abs(z.std(axis=0, ddof=1) - 1).max() < 1e-10


@settings(max_examples=50, deadline=None)
@given(
    a=st.floats(min_value=0.01, max_value=1e4),
    b=st.floats(min_value=-1e4, max_value=1e4),
)
def test_affine_invariance(a, b):
    values = np.array([[1.0], [2.5], [4.0], [8.0]])
    controls = {"s0", "s1", "s2"}
    z1 = apply_normalizer(fit_normalizer(table(values), controls), table(values))
    scaled = values * a + b
    z2 = apply_normalizer(fit_normalizer(table(scaled), controls), table(scaled))
    assert np.abs(z1 - z2).max() < 1e-9


def test_column_mismatch_rejected():
    t = table([[1.0], [2.0], [3.0]])
    stats = fit_normalizer(t, {"s0", "s1", "s2"})
    other = MetricTable(set_name="t", columns=["other"], values=t.values, subject_ids=t.subject_ids)
    with pytest.raises(CohortError, match="column mismatch"):
        apply_normalizer(stats, other)


def test_too_few_controls_rejected():
    t = table([[1.0], [2.0], [3.0]])
    with pytest.raises(CohortError, match="2 control"):
        fit_normalizer(t, {"s0"})


def test_all_columns_excluded_rejected():
    t = table([[7.0], [7.0], [7.0]])
    with pytest.raises(CohortError, match="all columns"):
        fit_normalizer(t, {"s0", "s1", "s2"})


def test_stats_dump(tmp_path):
    from cohortsweep.normalize import dump_stats

    t = table([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
    stats = fit_normalizer(t, {"s0", "s1", "s2"})
    path = tmp_path / "stats.csv"
    dump_stats(stats, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "column,mu,sigma,excluded"
    assert lines[1] == "c0,2.0,1.0,false"
    assert lines[2].startswith("c1,5.0,0.0,true")


def test_age_feature_zscore():
    ages = np.array([20.0, 30.0, 40.0, 99.0])
    control = np.array([True, True, True, False])
    z = zscore_feature(ages, control)
    assert abs(z[:3].mean()) < 1e-12
    assert abs(z[:3].std(ddof=1) - 1) < 1e-12
    assert z[3] > 3  # case far above control range
