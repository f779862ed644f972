"""
Tests for the RAFT cluster models
"""

import dataclasses
import math

import numpy as np
import pytest
from pydantic import ValidationError

from api.models import MS_PER_HOUR, MS_PER_WEEK, ClusterConfig, FailureCause, InjectionMix, ModelMode
from core.exceptions import ModelConstructionError, PreconditionError
from core.san import enabled_activities, fire, is_vanishing, select_instantaneous, validate
from core.state_space import expand_erlang, generate
from database.presets import get_preset_registry
from services.des_oracle import first_passage_times, simulate
from services.performability import PerformabilityService
from services.raft_models import (
    CAUSES,
    INJECTION_MIXES,
    ClusterStateView,
    Places,
    build_failure_model,
    build_recovery_model,
    build_response_time_model,
    compose,
    failure_role_probabilities,
    lagging_threshold,
    majority_delay,
    merged_failure_rate,
    repair_rates,
)

ODD_SIZES = range(3, 22, 2)


def test_role_probabilities_sum_to_one():
    for C in ODD_SIZES:
        for f_up in range(C):
            for l_up in (0, 1):
                probabilities = failure_role_probabilities(C, f_up, l_up)
                assert math.fsum(probabilities) == pytest.approx(1.0, abs=1e-15)
                assert all(p >= 0.0 for p in probabilities)


def test_role_probability_examples():
    assert failure_role_probabilities(5, 4, 1) == pytest.approx((0.8, 0.0, 0.2))
    assert failure_role_probabilities(5, 2, 1) == (0.0, 1.0, 0.0)
    assert failure_role_probabilities(7, 6, 0) == (0.0, 1.0, 0.0)
    with pytest.raises(PreconditionError):
        failure_role_probabilities(5, 5, 1)


def test_majority_delay_endpoints():
    for C in ODD_SIZES:
        cfg = ClusterConfig(C=C)
        assert majority_delay(cfg, C - 1) == cfg.T_M_best_ms
        assert majority_delay(cfg, C // 2) == 2.0 * cfg.T_M_best_ms
        assert majority_delay(cfg, C // 2 - 1) is None


def test_majority_delay_from_delay_set():
    cfg = ClusterConfig(C=5)
    delays = [2.0, 4.0, 7.0, 9.0]
    assert majority_delay(cfg, 4, delays) == 4.0
    assert majority_delay(cfg, 3, delays) == 7.0
    assert majority_delay(cfg, 2, delays) == 9.0
    with pytest.raises(PreconditionError):
        majority_delay(cfg, 4, [1.0, 2.0])


def test_merged_failure_rate():
    week = 1.0 / MS_PER_WEEK
    assert merged_failure_rate(week, 0.0) == week
    assert 1.0 / merged_failure_rate(week, week) / MS_PER_HOUR == pytest.approx(84.0)
    assert merged_failure_rate(0.0, 0.0) == 0.0
    with pytest.raises(PreconditionError):
        merged_failure_rate(-1.0, 0.0)


def test_config_invariants():
    with pytest.raises(ValidationError):
        ClusterConfig(C=4)
    with pytest.raises(ValidationError):
        ClusterConfig(C=3, N_F=4)
    with pytest.raises(ValidationError):
        ClusterConfig(T_R_ms=12.0)
    with pytest.raises(ValidationError):
        ClusterConfig(unknown_key=1)


def test_derived_rates():
    cfg = ClusterConfig()
    assert cfg.lambda_F_S == pytest.approx(1.0 / MS_PER_WEEK)
    assert cfg.lambda_F_Si == pytest.approx(1.0 / 30.0)
    assert cfg.with_overrides(N_F=2).lambda_F_Si == pytest.approx(2.0 / 30.0)
    assert cfg.lambda_R_Sbw == pytest.approx(1.0 / 182.9)
    assert 1.0 / cfg.lambda_f == pytest.approx(225.0)


def test_repair_rates_follow_watchdog():
    cfg = ClusterConfig()
    watched = repair_rates(cfg.with_overrides(watchdog=True))
    plain = repair_rates(cfg)
    assert plain[FailureCause.BUNDLE] == plain[FailureCause.PROCESS] == cfg.lambda_R_S
    assert watched[FailureCause.BUNDLE] == pytest.approx(1.0 / 182.9)
    assert watched[FailureCause.PROCESS] == pytest.approx(1.0 / 26_900.0)


def test_lagging_threshold():
    assert [lagging_threshold(C) for C in (3, 5, 7)] == [2, 3, 4]


def test_submodels_and_composition_validate():
    cfg = ClusterConfig()
    for model in (build_response_time_model(cfg), build_failure_model(cfg), build_recovery_model(cfg), compose(cfg)):
        assert validate(model).ok, validate(model).findings
    composed = compose(cfg)
    assert composed.name == "raft-C3-response"
    assert {"selectFailureType", "candidateElected", "clientToReplica"} <= set(composed.activity_index)


def test_invalid_config_is_a_construction_error():
    with pytest.raises(ModelConstructionError):
        compose({"C": 4})


def test_response_path_starts_at_client():
    model = compose(get_preset_registry().config("fault-free"))
    assert enabled_activities(model, model.initial_marking) == ["clientToReplica"]


def test_without_lagging_branch():
    model = build_response_time_model(ClusterConfig(R_M=0))
    assert "lateBringUpToDateNodes" not in model.activity_index


def test_availability_mode_has_no_client_event():
    cfg = ClusterConfig(mode=ModelMode.AVAILABILITY, N_F=3)
    model = compose(cfg)
    m0 = model.initial_marking
    assert m0[Places.IDLE] == 1 and m0[Places.QUEUED] == 0
    assert "selectFailureType" not in model.activity_index
    assert {"Hardware_F", "Process_F", "Bundle_F"} <= set(model.activity_index)


@pytest.mark.parametrize(
    "overrides",
    [
        {"N_F": 2, "E_S": 1},
        {"N_F": 3, "E_S": 1, "injection_mix": InjectionMix.BUNDLE, "watchdog": True},
        {"N_F": 3, "E_S": 1, "mode": ModelMode.AVAILABILITY},
    ],
)
def test_controller_count_is_conserved(small_config, overrides):
    cfg = small_config.with_overrides(**overrides)
    ctmc = generate(expand_erlang(compose(cfg), cfg.E_S))
    for m in ctmc.states:
        view = ClusterStateView.from_marking(cfg, m)
        view.check()
        assert view.total_down <= cfg.N_F
        assert 0 <= view.counter_failures <= lagging_threshold(cfg.C)


def test_failure_free_mean_response_time():
    cfg = get_preset_registry().config("fault-free").with_overrides(E_S=5)
    service = PerformabilityService()
    # T_CR + T_R + 2 T_M_best + T_C + T_A + T_R + T_CR
    expected = 1.0 + 10.0 + 5.0 + 5.0 + 1.0 + 1.0 + 10.0 + 1.0
    assert service.mean_completion_time(cfg) == pytest.approx(expected, rel=0.05)


def with_logged_failures(model, count: int):
    places = tuple(
        dataclasses.replace(place, initial_tokens=count) if place.id == Places.COUNTER_FAILURES else place
        for place in model.places
    )
    return dataclasses.replace(model, places=places)


def handled(m) -> bool:
    return m[Places.SEQUENCE_END] > 0


def test_lagging_followers_add_catch_up_delay():
    cfg = get_preset_registry().config("fault-free")
    model = compose(cfg)
    threshold = lagging_threshold(cfg.C)
    # 2 R_M T_M with every follower up
    catch_up = 2 * cfg.R_M * cfg.T_M_best_ms

    below = first_passage_times(with_logged_failures(model, threshold - 1), handled, 1000.0, 500, seed=3)
    lagging = first_passage_times(with_logged_failures(model, threshold), handled, 1000.0, 500, seed=3)
    assert below.min() >= 33.0 - 1e-9
    assert lagging.min() >= 33.0 + catch_up - 1e-9
    assert np.mean(below) == pytest.approx(34.0, abs=0.3)
    assert np.mean(lagging) == pytest.approx(34.0 + catch_up, abs=0.3)


def test_lagging_branch_resets_counter():
    cfg = get_preset_registry().config("fault-free")
    model = with_logged_failures(compose(cfg), lagging_threshold(cfg.C))
    run = simulate(model, 1000.0, seed=11)
    fired = [event.activity_id for event in run.trace]
    assert fired.index("majorFollowerNotUpToDate") < fired.index("lateBringUpToDateNodes")
    assert run.final_marking[Places.COUNTER_FAILURES] == 0
    assert handled(run.final_marking)


def test_leader_loss_sends_event_back_after_client_timeout():
    cfg = ClusterConfig(N_F=1)
    model = compose(cfg)
    m = model.initial_marking.update({
        Places.QUEUED: 0,
        Places.AT_LEADER: 1,
        Places.LEADER_UP: 0,
        Places.NODES_UP: cfg.C - 1,
        Places.nodes_down(FailureCause.HARDWARE): 1,
    })
    handler = select_instantaneous(model, m)
    assert handler.id == "CH2"
    waiting = fire(model, m, handler.id, 0)
    assert waiting[Places.CLIENT_TIMEOUT] == 1 and waiting[Places.AT_LEADER] == 0
    assert "clientTimeout" in enabled_activities(model, waiting)
    assert model.activity("clientTimeout").distribution.delay == cfg.T_CL_ms
    requeued = fire(model, waiting, "clientTimeout", 0)
    assert requeued[Places.QUEUED] == 1 and requeued[Places.CLIENT_TIMEOUT] == 0


def test_interrupted_events_retry_and_complete():
    cfg = ClusterConfig(N_F=1, injection_mix=InjectionMix.BUNDLE, watchdog=True)
    model = compose(cfg)
    retried = 0
    for seed in range(300):
        run = simulate(model, 2000.0, seed=seed)
        assert handled(run.final_marking)
        times = {}
        for event in run.trace:
            times.setdefault(event.activity_id, event.time)
        if "clientTimeout" not in times:
            continue
        retried += 1
        interrupted_at = min(t for activity_id, t in times.items() if activity_id.startswith("CH"))
        # the client timer runs from the moment the event is dropped
        assert times["clientTimeout"] - interrupted_at == pytest.approx(cfg.T_CL_ms)
        assert sum(event.activity_id == "clientToReplica" for event in run.trace) == 2
    assert retried >= 10


def test_role_selection_rates_match_role_probabilities():
    cfg = ClusterConfig(C=5, N_F=3)
    model = build_failure_model(cfg)
    ctmc = generate(model)
    mix = INJECTION_MIXES[cfg.injection_mix]
    outgoing = {}
    for i, j, rate in ctmc.transitions():
        outgoing.setdefault(i, {})[j] = rate

    split = 0
    for i, m in enumerate(ctmc.states):
        expected = {}
        if m[Places.BURSTY_TOKENS] > 0 and m[Places.NODES_UP] > 0:
            roles = failure_role_probabilities(cfg.C, m[Places.FOLLOWERS_UP], m[Places.LEADER_UP])
            split += sum(p > 0 for p in roles) > 1
            for c, cause in enumerate(CAUSES):
                selected = fire(model, m, "selectFailureType", c)
                for k, p in enumerate(roles):
                    if p > 0:
                        j = ctmc.index_of(fire(model, selected, f"failureSelectRole{cause.value}", k))
                        expected[j] = expected.get(j, 0.0) + cfg.lambda_F_Si * mix[c] * p
        actual = outgoing.get(i, {})
        assert actual.keys() == expected.keys()
        for j, rate in expected.items():
            assert actual[j] == pytest.approx(rate, rel=1e-12)
    assert split > 0


def test_candidate_without_quorum_waits_and_retries():
    cfg = ClusterConfig()
    model = build_recovery_model(cfg)
    hardware = Places.nodes_down(FailureCause.HARDWARE)
    m = model.initial_marking.update({
        Places.LEADER_UP: 0,
        Places.FOLLOWERS_UP: 0,
        Places.NODES_UP: 1,
        Places.ANNOUNCE_CANDIDATE: 1,
        hardware: 2,
    })
    assert select_instantaneous(model, m).id == "candidateNoQuorum"
    waiting = fire(model, m, "candidateNoQuorum", 0)
    assert not is_vanishing(model, waiting)
    enabled = enabled_activities(model, waiting)
    assert "candidateTimeout" in enabled and "candidateElected" not in enabled
    retry = fire(model, waiting, "candidateTimeout", 0)
    assert select_instantaneous(model, retry).id == "candidateNoQuorum"
    assert fire(model, retry, "candidateNoQuorum", 0) == waiting

    # one repair restores the quorum and the next attempt wins the election
    repaired = fire(model, waiting, f"repair{FailureCause.HARDWARE.value}", 0)
    candidate = fire(model, repaired, "candidateTimeout", 0)
    assert not is_vanishing(model, candidate)
    assert "candidateElected" in enabled_activities(model, candidate)
    elected = fire(model, candidate, "candidateElected", 0)
    assert elected[Places.LEADER_UP] == 1
    ClusterStateView.from_marking(cfg, elected).check()


def test_recovered_node_joins_as_follower_under_a_leader():
    cfg = ClusterConfig()
    model = build_recovery_model(cfg)
    m = model.initial_marking.update({
        Places.FOLLOWERS_UP: 1,
        Places.INIT_POOL: 1,
    })
    timeout = model.activity("followerTimeout")
    assert [case.name for _, case, _ in model.case_weights(timeout, m)] == ["leaderFound"]
    announced = fire(model, m, "followerTimeout", 0)
    assert select_instantaneous(model, announced).id == "setNewFollowerUp"
    joined = fire(model, announced, "setNewFollowerUp", 0)
    assert joined[Places.FOLLOWERS_UP] == 2 and joined[Places.INIT_POOL] == 0
    view = ClusterStateView.from_marking(cfg, joined)
    view.check()
    assert view.available and view.rejoining == 0


@pytest.mark.parametrize("preset, overrides", [("table2", {"N_F": 1, "E_S": 1}), ("fault-free", {"E_S": 1})])
def test_sequence_end_is_absorbing(preset, overrides):
    cfg = get_preset_registry().config(preset).with_overrides(**overrides)
    ctmc = generate(expand_erlang(compose(cfg), cfg.E_S))
    done = [handled(m) for m in ctmc.states]
    assert any(done)
    for i, j, _ in ctmc.transitions():
        if done[i]:
            assert done[j]
            assert ctmc.states[j][Places.CLIENT_TIMEOUT] == 0
    if preset == "fault-free":
        assert all(ctmc.exit_rates[i] == 0.0 for i, finished in enumerate(done) if finished)
