"""
Tests for the study catalogue
"""

import numpy as np
import pytest

from api.models import ClusterConfig, StudyId, StudySpec
from core.exceptions import ExplorationAbortedError
from services.result_writer import render
from services.study_runner import STATESPACE_POINTS, STUDY_CATALOGUE, StudyRunnerService, is_cdf_nondecreasing


def run(study: StudyId, **kwargs):
    config = kwargs.pop("config", ClusterConfig(E_S=1))
    return StudyRunnerService(workers=1).run_study(StudySpec(id=study, config=config, **kwargs))


def assert_cdf_columns(table, names):
    for name in names:
        values = table.column(name)
        assert is_cdf_nondecreasing(values)
        assert all(0.0 <= v <= 1.0 for v in values)
        assert values[0] == pytest.approx(0.0, abs=1e-9)


def test_catalogue_covers_every_study():
    assert set(STUDY_CATALOGUE) == set(StudyId)


def test_cdf_by_cluster_size():
    table = run(StudyId.S1)
    assert table.columns == ["t_ms", "P_C3", "P_C5", "P_C7"]
    assert table.column("t_ms") == [float(t) for t in range(1001)]
    assert_cdf_columns(table, ["P_C3", "P_C5", "P_C7"])
    assert table.column("P_C3")[-1] > 0.5
    assert table.metadata["study"] == "S1-cdf-by-cluster-size"
    assert table.metadata["config.E_S"] == "1"
    assert table.metadata["method"] == "uniformization"


def test_studies_are_deterministic():
    assert render(run(StudyId.S1)) == render(run(StudyId.S1))


def test_workers_do_not_change_results():
    spec = StudySpec(id=StudyId.S8, config=ClusterConfig(E_S=1))
    sequential = StudyRunnerService(workers=1).run_study(spec)
    parallel = StudyRunnerService(workers=3).run_study(spec)
    assert render(sequential) == render(parallel)


def test_correlated_failures_columns():
    table = run(StudyId.S2)
    expected = [
        f"P_{mix}_NF{n}_wd{w}"
        for mix in ("mixed", "bundle")
        for n in (1, 2)
        for w in (0, 1)
    ]
    assert table.columns == ["t_ms"] + expected
    assert_cdf_columns(table, expected)


def test_unavailability_starts_at_zero_and_watchdog_helps():
    table = run(StudyId.S4)
    assert table.columns == ["t_h", "PCU_wd0", "PCU_wd1"]
    assert len(table.rows) == 1001
    assert table.rows[0][1] <= 1e-9 and table.rows[0][2] <= 1e-9
    without, with_watchdog = np.array(table.column("PCU_wd0")), np.array(table.column("PCU_wd1"))
    assert np.all(with_watchdog <= without + 1e-9)
    assert table.metadata["time_unit"] == "h"


def test_zero_failure_baseline():
    table = run(StudyId.S8)
    assert table.columns == ["t_ms", "P_C3", "P_C5", "P_C7"]
    assert_cdf_columns(table, ["P_C3", "P_C5", "P_C7"])
    assert table.column("P_C3")[-1] == pytest.approx(1.0, abs=1e-6)


def test_oracle_crosscheck_columns():
    table = run(StudyId.S6, config=ClusterConfig(E_S=2), runs=200, seed=5)
    assert table.columns == [
        "t_ms", "analytic", "des_mean", "des_ci_halfwidth", "within_ci",
        "des_exact_mean", "des_exact_ci_halfwidth",
    ]
    assert table.column("t_ms") == [50.0, 200.0, 500.0, 1000.0]
    assert set(table.column("within_ci")) <= {0.0, 1.0}
    assert table.metadata["seed"] == 5 and table.metadata["runs"] == 200
    assert "PCG64" in table.metadata["generator"]


def test_state_limit_propagates():
    with pytest.raises(ExplorationAbortedError):
        run(StudyId.S5, max_states=5)


def test_statespace_points_cover_both_failure_scenarios():
    for C in (3, 5):
        n_fs = {n_f for c, e_s, n_f in STATESPACE_POINTS if c == C and e_s == 5}
        assert n_fs == {C // 2 + 1, C}


@pytest.mark.slow
def test_larger_clusters_handle_failures_better():
    table = run(StudyId.S1, config=ClusterConfig(E_S=5))
    c3, c5, c7 = (np.array(table.column(name)) for name in ("P_C3", "P_C5", "P_C7"))
    assert np.all(c7 >= c5 - 1e-6)
    assert np.all(c5 >= c3 - 1e-6)


@pytest.mark.slow
def test_watchdog_unavailability_saturates():
    table = run(StudyId.S4, config=ClusterConfig())
    without = np.array(table.column("PCU_wd0"))
    with_watchdog = np.array(table.column("PCU_wd1"))
    assert np.all(with_watchdog <= without + 1e-9)
    early_slope = abs(without[11] - without[9]) / 2.0
    late_slope = abs(without[151] - without[149]) / 2.0
    assert late_slope < 0.1 * early_slope


@pytest.mark.slow
def test_statespace_grows_with_size_and_stages():
    table = run(StudyId.S5, config=ClusterConfig())
    states = {(row[0], row[1], row[2]): row[3] for row in table.rows}
    assert states[(3.0, 5.0, 2.0)] < states[(5.0, 5.0, 3.0)] < states[(7.0, 5.0, 4.0)]
    assert states[(5.0, 5.0, 3.0)] < states[(5.0, 10.0, 3.0)]
    assert states[(3.0, 5.0, 3.0)] > states[(3.0, 5.0, 2.0)]
    assert states[(5.0, 5.0, 5.0)] > states[(5.0, 5.0, 3.0)]


@pytest.mark.slow
def test_oracle_concordance():
    table = run(StudyId.S6, config=ClusterConfig(), runs=100_000, seed=2019)
    assert table.column("within_ci") == [1.0, 1.0, 1.0, 1.0]


@pytest.mark.slow
def test_erlang_accuracy_columns():
    table = run(StudyId.S7, config=ClusterConfig())
    assert table.columns[:5] == ["t_ms", "P_ES5", "P_ES10", "P_ES15", "P_ES20"]
    assert table.columns[5:] == ["dev_ES5", "dev_ES10", "dev_ES15"]
