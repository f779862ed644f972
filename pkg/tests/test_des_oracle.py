"""
Tests for the discrete-event oracle
"""

import numpy as np
import pytest

from core.ctmc_solver import RewardVariable
from core.exceptions import PreconditionError, VanishingLoopError
from core.san import Activity, Case, Place, SanModel, add_tokens
from core.state_space import expand_erlang
from database.presets import get_preset_registry
from services import des_oracle
from services.des_oracle import (
    Estimate,
    estimate_cdf,
    estimate_reward,
    first_passage_times,
    generator_description,
    simulate,
    write_trace,
)
from services.performability import PerformabilityService
from services.raft_models import Places
from tests.conftest import fixed_delay_model


def done(m) -> bool:
    return m["Done"] > 0


def test_estimate_from_samples():
    estimate = Estimate.from_samples(np.array([0.0, 1.0, 0.0, 1.0]), confidence=0.99)
    assert estimate.mean == 0.5
    assert estimate.std_error == pytest.approx(np.sqrt(1.0 / 3.0) / 2.0)
    assert estimate.ci_halfwidth == pytest.approx(2.5758293035489 * estimate.std_error)
    assert estimate.contains(0.9) and not estimate.contains(2.0)
    with pytest.raises(PreconditionError):
        Estimate.from_samples(np.array([1.0]))


def test_deterministic_delay_is_exact(fixed_delay):
    passages = first_passage_times(fixed_delay, done, 1000.0, 5, seed=1)
    assert passages.tolist() == [225.0] * 5


def test_horizon_cuts_runs(fixed_delay):
    passages = first_passage_times(fixed_delay, done, 100.0, 3, seed=1)
    assert np.all(np.isinf(passages))
    run = simulate(fixed_delay, 100.0, seed=1)
    assert run.final_marking["Start"] == 1


def test_same_seed_same_samples():
    model = expand_erlang(fixed_delay_model(), 5)
    first = first_passage_times(model, done, 2000.0, 50, seed=7)
    second = first_passage_times(model, done, 2000.0, 50, seed=7)
    other = first_passage_times(model, done, 2000.0, 50, seed=8)
    assert first.tolist() == second.tolist()
    assert first.tolist() != other.tolist()


def test_race_between_exponentials(race_model):
    estimate = estimate_reward(race_model, RewardVariable("B", lambda m: float(m["B"])), 100.0, 4000, seed=3)
    assert estimate.mean == pytest.approx(0.75, abs=0.03)


def test_erlang_moments_small_sample():
    model = expand_erlang(fixed_delay_model(), 20)
    passages = first_passage_times(model, done, 10_000.0, 2000, seed=11)
    assert np.all(np.isfinite(passages))
    std_error = passages.std(ddof=1) / np.sqrt(passages.size)
    assert abs(passages.mean() - 225.0) <= 4.0 * std_error
    assert passages.var(ddof=1) == pytest.approx(225.0 ** 2 / 20, rel=0.2)


@pytest.mark.slow
def test_erlang_moments():
    model = expand_erlang(fixed_delay_model(), 20)
    passages = first_passage_times(model, done, 10_000.0, 100_000, seed=2019)
    std_error = passages.std(ddof=1) / np.sqrt(passages.size)
    assert abs(passages.mean() - 225.0) <= 3.0 * std_error
    assert passages.var(ddof=1) == pytest.approx(225.0 ** 2 / 20, rel=0.1)


def test_estimate_cdf_is_monotone(fixed_delay):
    model = expand_erlang(fixed_delay, 4)
    points = estimate_cdf(model, done, [0.0, 100.0, 225.0, 500.0], 300, seed=5)
    means = [estimate.mean for _, estimate in points]
    assert means[0] == 0.0
    assert means == sorted(means)


def test_instantaneous_livelock(monkeypatch):
    monkeypatch.setattr(des_oracle, "MAX_INSTANTANEOUS_FIRINGS", 1000)
    model = SanModel(
        "ping-pong",
        (Place("P", 1), Place("Q", 0)),
        (
            Activity.instantaneous("ping", input_places=(("P", 1),), cases=(Case(actions=(add_tokens("Q"),)),)),
            Activity.instantaneous("pong", input_places=(("Q", 1),), cases=(Case(actions=(add_tokens("P"),)),)),
        ),
    )
    with pytest.raises(VanishingLoopError):
        simulate(model, 10.0, seed=0)


def test_trace_dump(tmp_path, fixed_delay):
    run = simulate(fixed_delay, 1000.0, seed=0, record_trace=True)
    path = tmp_path / "trace.txt"
    write_trace(run, path)
    assert path.read_text() == "225.000000\twork\n"
    with pytest.raises(PreconditionError):
        write_trace(simulate(fixed_delay, 1000.0, seed=0, record_trace=False), path)


def test_run_count_validation(race_model):
    with pytest.raises(PreconditionError):
        estimate_reward(race_model, RewardVariable("B", lambda m: float(m["B"])), 1.0, 1, seed=0)


def test_generator_description_names_algorithm():
    assert "PCG64" in generator_description()


def test_failure_free_path_inside_oracle_interval():
    cfg = get_preset_registry().config("fault-free").with_overrides(E_S=5)
    compiled = PerformabilityService().compile(cfg)
    times = [20.0, 34.0, 50.0]
    analytic = PerformabilityService().response_time_cdf(cfg, times)
    estimates = estimate_cdf(compiled.expanded, lambda m: m[Places.SEQUENCE_END] > 0, times, 2000, seed=2019)
    for (t, p), (_, estimate) in zip(analytic, estimates):
        assert abs(p - estimate.mean) <= 4.5 * estimate.std_error + 1e-9


@pytest.mark.slow
def test_failure_free_mean_inside_oracle_interval():
    cfg = get_preset_registry().config("fault-free")
    service = PerformabilityService()
    compiled = service.compile(cfg)
    analytic_mean = service.mean_completion_time(cfg)
    passages = first_passage_times(compiled.expanded, lambda m: m[Places.SEQUENCE_END] > 0, 1000.0, 100_000, seed=2019)
    estimate = Estimate.from_samples(passages)
    assert abs(analytic_mean - 34.0) <= 0.05 * 34.0
    assert estimate.contains(analytic_mean)
