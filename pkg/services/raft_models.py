"""
RAFT Cluster Models
Response-time, failure and recovery SANs of a RAFT controller cluster, the
marking-dependent formulas they share, and their composition into one model.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from api.models import ClusterConfig, FailureCause, InjectionMix, ModelMode
from core.ctmc_solver import RewardVariable
from core.exceptions import ModelConstructionError, ModelIntegrityError, PreconditionError
from core.logging import get_logger
from core.san import (
    Activity,
    Case,
    Deterministic,
    Exponential,
    InputGate,
    Marking,
    OutputAction,
    Place,
    SanModel,
    add_tokens,
)

logger = get_logger()


class Places:
    """Place ids of the cluster models"""
    IDLE = "IdleState"
    QUEUED = "EventQueuedForLeader"
    AT_REPLICA = "EventAtReplica"
    AT_LEADER = "EventAtLeader"
    CATCH_UP = "BringFollowersUpToDate"
    AT_MAJORITY = "UpdateAtMajority"
    ACKED = "MajorityAcked"
    COMMITTED = "CommitDone"
    APPLIED = "ApplicationDone"
    RESPONSE_AT_REPLICA = "ResponseAtReplica"
    SEQUENCE_END = "SequenceEnd"
    CLIENT_TIMEOUT = "ClientTimeoutPending"

    LEADER_UP = "LeaderUp"
    FOLLOWERS_UP = "FollowersUp"
    NODES_UP = "NodesUp"
    COUNTER_FAILURES = "CounterFailures"

    BURSTY_TOKENS = "BurstyFailureTokens"
    INIT_POOL = "InitElectionPool"
    ANNOUNCE_FOLLOWER = "AnnounceFollowerRole"
    ANNOUNCE_CANDIDATE = "AnnounceCandidateRole"
    CANDIDATE_WAITING = "CandidateWaiting"

    # Places holding a restarted node that has not yet joined as leader or follower
    REJOINING = (INIT_POOL, ANNOUNCE_FOLLOWER, ANNOUNCE_CANDIDATE, CANDIDATE_WAITING)

    @staticmethod
    def nodes_down(cause: FailureCause) -> str:
        return f"NodesDown{cause.value}"

    @staticmethod
    def select_failure(cause: FailureCause) -> str:
        return f"NodeDownSelectFailure{cause.value}"


# Places an event can occupy while it needs the leader; a leader or majority loss sends it to the client timeout
IN_FLIGHT = (
    Places.AT_REPLICA,
    Places.AT_LEADER,
    Places.CATCH_UP,
    Places.AT_MAJORITY,
    Places.ACKED,
    Places.COMMITTED,
    Places.APPLIED,
)

CAUSES = (FailureCause.HARDWARE, FailureCause.PROCESS, FailureCause.BUNDLE)

INJECTION_MIXES: Dict[InjectionMix, Tuple[float, float, float]] = {
    InjectionMix.MIXED: (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
    InjectionMix.HARDWARE: (1.0, 0.0, 0.0),
    InjectionMix.PROCESS: (0.0, 1.0, 0.0),
    InjectionMix.BUNDLE: (0.0, 0.0, 1.0),
}

FAILURE_PRIORITY = 20
CLIENT_HANDLER_PRIORITY = 10


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

def majority_delay(cfg: ClusterConfig, f_up: int, delay_set: Optional[Sequence[float]] = None) -> Optional[float]:
    """Leader to follower-majority delay T_M with f_up followers available.

    By default T_M = (C-1)/f_up * T_M_best. With an explicit delay_set (one
    leader-to-follower delay per follower) the failed followers are assumed
    to be the closest ones and T_M is the delay of the farthest member of the
    nearest available majority. Returns None when no majority is available.
    """
    if not 0 <= f_up <= cfg.C - 1:
        raise PreconditionError(f"f_up must lie in [0, {cfg.C - 1}], got {f_up}")
    if f_up < cfg.majority_followers:
        return None
    if delay_set is None:
        return (cfg.C - 1) / f_up * cfg.T_M_best_ms
    delays = sorted(float(d) for d in delay_set)
    if len(delays) != cfg.C - 1 or any(d <= 0 for d in delays):
        raise PreconditionError(f"delay_set needs {cfg.C - 1} positive delays")
    failed = cfg.C - 1 - f_up
    return delays[failed + cfg.majority_followers - 1]


def role_threshold(C: int) -> int:
    return math.ceil((C - 1) / 2 + 1)


def failure_role_probabilities(C: int, f_up: int, l_up: int) -> Tuple[float, float, float]:
    """(safe follower, follower majority, leader) probabilities of the next failure"""
    if l_up not in (0, 1):
        raise PreconditionError(f"l_up must be 0 or 1, got {l_up}")
    if not 0 <= f_up <= C - 1:
        raise PreconditionError(f"f_up must lie in [0, {C - 1}], got {f_up}")
    if l_up == 0 or f_up < role_threshold(C):
        return 0.0, 1.0, 0.0
    p_ldr = 1.0 / (f_up + 1)
    return 1.0 - p_ldr, 0.0, p_ldr


def merged_failure_rate(lambda_c: float, lambda_d: float) -> float:
    """Rate of the superposition of two independent Poisson failure processes"""
    if lambda_c < 0 or lambda_d < 0:
        raise PreconditionError("failure rates must be >= 0")
    return lambda_c + lambda_d


def lagging_threshold(C: int) -> int:
    """Logged failures after which followers must be brought up to date"""
    return (C - 1) // 2 + 1


# ---------------------------------------------------------------------------
# Shared structure
# ---------------------------------------------------------------------------

def _checked(cfg) -> ClusterConfig:
    if isinstance(cfg, ClusterConfig):
        return cfg
    try:
        return ClusterConfig.model_validate(cfg)
    except ValidationError as exc:
        raise ModelConstructionError(f"Invalid cluster configuration: {exc}") from exc


def _shared_places(cfg: ClusterConfig) -> List[Place]:
    return [
        Place(Places.LEADER_UP, 1, "available leaders"),
        Place(Places.FOLLOWERS_UP, cfg.C - 1, "available followers"),
        Place(Places.NODES_UP, cfg.C, "controllers not failed"),
        Place(Places.COUNTER_FAILURES, 0, "failures logged since the last reconciliation"),
    ]


def _down_places() -> List[Place]:
    return [Place(Places.nodes_down(cause), 0, f"nodes down ({cause.value.lower()})") for cause in CAUSES]


def _rejoin_places() -> List[Place]:
    return [
        Place(Places.INIT_POOL, 0, "restarted nodes awaiting a follower timeout"),
        Place(Places.ANNOUNCE_FOLLOWER, 0, "nodes joining as follower"),
        Place(Places.ANNOUNCE_CANDIDATE, 0, "candidates"),
        Place(Places.CANDIDATE_WAITING, 0, "candidates waiting for a quorum"),
    ]


def leader_and_majority_up(cfg: ClusterConfig) -> Callable[[Marking], bool]:
    majority = cfg.majority_followers

    def predicate(m: Marking) -> bool:
        return m[Places.LEADER_UP] == 1 and m[Places.FOLLOWERS_UP] >= majority
    return predicate


# ---------------------------------------------------------------------------
# Response-time model
# ---------------------------------------------------------------------------

def build_response_time_model(cfg: ClusterConfig) -> SanModel:
    """Path of one client event through replica, leader, majority and back"""
    cfg = _checked(cfg)
    response_mode = cfg.mode is ModelMode.RESPONSE
    lam = leader_and_majority_up(cfg)
    threshold = lagging_threshold(cfg.C)

    places = [
        Place(Places.IDLE, 0 if response_mode else 1, "no client event"),
        Place(Places.QUEUED, 1 if response_mode else 0, "event waiting for an available leader"),
        Place(Places.AT_REPLICA, 0, "event at the contacted replica"),
        Place(Places.AT_LEADER, 0, "event at the leader"),
        Place(Places.CATCH_UP, 0, "leader reconciling lagging followers"),
        Place(Places.AT_MAJORITY, 0, "update distributed to the majority"),
        Place(Places.ACKED, 0, "majority acknowledgments at the leader"),
        Place(Places.COMMITTED, 0, "update committed"),
        Place(Places.APPLIED, 0, "application processed the update"),
        Place(Places.RESPONSE_AT_REPLICA, 0, "response at the contacted replica"),
        Place(Places.SEQUENCE_END, 0, "event handled"),
        Place(Places.CLIENT_TIMEOUT, 0, "client waiting to retry"),
    ] + _shared_places(cfg)

    gates = [
        InputGate("LeaderAndMajorityUp", lam),
        InputGate("LeaderOrMajorityDown", lambda m: not lam(m)),
        InputGate(
            "DisableConcurrentUpdates",
            lambda m: m[Places.AT_MAJORITY] == 0 and m[Places.CATCH_UP] == 0,
        ),
        InputGate("FollowersLagging", lambda m: m[Places.COUNTER_FAILURES] >= threshold),
    ]

    def t_m(m: Marking) -> Optional[float]:
        return majority_delay(cfg, m[Places.FOLLOWERS_UP])

    def hop(activity_id: str, source: str, target: str, distribution, guards=("LeaderAndMajorityUp",)) -> Activity:
        return Activity.timed(
            activity_id,
            distribution,
            input_places=((source, 1),),
            input_gates=tuple(guards),
            cases=(Case(actions=(add_tokens(target),)),),
        )

    activities = [
        hop("clientToReplica", Places.QUEUED, Places.AT_REPLICA, Deterministic(cfg.T_CR_ms)),
        hop("delayToLeader", Places.AT_REPLICA, Places.AT_LEADER, Deterministic(cfg.T_R_ms)),
        hop(
            "delayToMajorityFollowers",
            Places.AT_LEADER,
            Places.AT_MAJORITY,
            Deterministic(t_m, depends_on=(Places.FOLLOWERS_UP,)),
            guards=("LeaderAndMajorityUp", "DisableConcurrentUpdates"),
        ),
        hop(
            "delayFromMajorityToLeader",
            Places.AT_MAJORITY,
            Places.ACKED,
            Deterministic(t_m, depends_on=(Places.FOLLOWERS_UP,)),
        ),
        hop("applyCommit", Places.ACKED, Places.COMMITTED, Deterministic(cfg.T_C_ms)),
        hop("processApplication", Places.COMMITTED, Places.APPLIED, Exponential(1.0 / cfg.T_A_ms)),
        hop("responseToReplica", Places.APPLIED, Places.RESPONSE_AT_REPLICA, Deterministic(cfg.T_R_ms)),
        hop("responseToClient", Places.RESPONSE_AT_REPLICA, Places.SEQUENCE_END, Deterministic(cfg.T_CR_ms), guards=()),
    ]

    if cfg.R_M > 0:
        reset_counter = OutputAction(lambda m: m.set(Places.COUNTER_FAILURES, 0), "resetCounter")
        activities.append(Activity.instantaneous(
            "majorFollowerNotUpToDate",
            input_places=((Places.AT_LEADER, 1),),
            input_gates=("LeaderAndMajorityUp", "FollowersLagging"),
            cases=(Case(actions=(add_tokens(Places.CATCH_UP),)),),
        ))
        activities.append(Activity.timed(
            "lateBringUpToDateNodes",
            Deterministic(
                lambda m: 2 * cfg.R_M * t_m(m) if t_m(m) is not None else None,
                depends_on=(Places.FOLLOWERS_UP,),
            ),
            input_places=((Places.CATCH_UP, 1),),
            input_gates=("LeaderAndMajorityUp",),
            cases=(Case(actions=(add_tokens(Places.AT_LEADER), reset_counter)),),
        ))

    for k, place in enumerate(IN_FLIGHT, start=1):
        activities.append(Activity.instantaneous(
            f"CH{k}",
            input_places=((place, 1),),
            input_gates=("LeaderOrMajorityDown",),
            cases=(Case(actions=(OutputAction(lambda m: m.add(Places.CLIENT_TIMEOUT, 1), f"OGF{k}"),)),),
            priority=CLIENT_HANDLER_PRIORITY,
        ))
    activities.append(Activity.timed(
        "clientTimeout",
        Deterministic(cfg.T_CL_ms),
        input_places=((Places.CLIENT_TIMEOUT, 1),),
        cases=(Case(actions=(add_tokens(Places.QUEUED),)),),
    ))

    return SanModel(f"response-C{cfg.C}", tuple(places), tuple(activities), tuple(gates))


# ---------------------------------------------------------------------------
# Failure model
# ---------------------------------------------------------------------------

def _take_down(target_order: Sequence[str]) -> Callable[[Marking], Marking]:
    def transformation(m: Marking) -> Marking:
        for place_id in target_order:
            if m[place_id] > 0:
                if place_id == Places.LEADER_UP:
                    return m.set(place_id, 0)
                return m.add(place_id, -1)
        raise ModelIntegrityError(f"No live controller to fail in {m}")
    return transformation


def build_failure_model(cfg: ClusterConfig) -> SanModel:
    """Long-term failures or the injected burst, each routed through role selection"""
    cfg = _checked(cfg)
    response_mode = cfg.mode is ModelMode.RESPONSE
    threshold = lagging_threshold(cfg.C)

    places = (
        _shared_places(cfg)
        + [Place(Places.BURSTY_TOKENS, cfg.N_F if response_mode else 0, "pending injected failures")]
        + [Place(Places.select_failure(cause), 0, f"{cause.value.lower()} failure awaiting a role") for cause in CAUSES]
        + _down_places()
        + _rejoin_places()
    )
    gates = [
        InputGate("NodeAvailable", lambda m: m[Places.NODES_UP] > 0),
        InputGate(
            "FailureBudget",
            lambda m: m[Places.NODES_UP] > 0 and cfg.C - m[Places.NODES_UP] < cfg.N_F,
        ),
    ]
    activities: List[Activity] = []

    if response_mode:
        if cfg.lambda_F_Si > 0:
            mix = INJECTION_MIXES[cfg.injection_mix]
            activities.append(Activity.timed(
                "selectFailureType",
                Exponential(cfg.lambda_F_Si),
                input_places=((Places.BURSTY_TOKENS, 1),),
                input_gates=("NodeAvailable",),
                cases=tuple(
                    Case(p, (add_tokens(Places.select_failure(cause)),), cause.value)
                    for cause, p in zip(CAUSES, mix)
                ),
            ))
    else:
        base_rates = {
            FailureCause.HARDWARE: merged_failure_rate(cfg.lambda_F_H, cfg.lambda_d),
            FailureCause.PROCESS: cfg.lambda_F_S,
            FailureCause.BUNDLE: cfg.lambda_F_S,
        }
        for cause in CAUSES:
            rate = base_rates[cause]
            if rate <= 0:
                continue
            activities.append(Activity.timed(
                f"{cause.value}_F",
                Exponential((lambda r: lambda m: r * m[Places.NODES_UP])(rate)),
                input_gates=("FailureBudget",),
                cases=(Case(actions=(add_tokens(Places.select_failure(cause)),)),),
            ))

    count_failure = OutputAction(
        lambda m: m.set(Places.COUNTER_FAILURES, min(m[Places.COUNTER_FAILURES] + 1, threshold)),
        "count failure",
    )
    follower_first = _take_down((Places.FOLLOWERS_UP, Places.LEADER_UP) + Places.REJOINING)
    leader_only = _take_down((Places.LEADER_UP,))
    roles = (
        ("F_Sf", OutputAction(_take_down((Places.FOLLOWERS_UP,)), "safe follower down")),
        ("F_Mj", OutputAction(follower_first, "majority follower down")),
        ("F_Ldr", OutputAction(leader_only, "leader down")),
    )
    for cause in CAUSES:
        node_down = OutputAction(
            (lambda place: lambda m: m.add(place, 1).add(Places.NODES_UP, -1))(Places.nodes_down(cause)),
            f"{cause.value} node down",
        )
        cases = tuple(
            Case(
                (lambda k: lambda m: failure_role_probabilities(
                    cfg.C, m[Places.FOLLOWERS_UP], m[Places.LEADER_UP])[k])(k),
                (role_action, node_down, count_failure) if response_mode else (role_action, node_down),
                role,
            )
            for k, (role, role_action) in enumerate(roles)
        )
        activities.append(Activity.instantaneous(
            f"failureSelectRole{cause.value}",
            input_places=((Places.select_failure(cause), 1),),
            cases=cases,
            priority=FAILURE_PRIORITY,
        ))

    return SanModel(f"failure-C{cfg.C}", tuple(places), tuple(activities), tuple(gates))


# ---------------------------------------------------------------------------
# Recovery model
# ---------------------------------------------------------------------------

def repair_rates(cfg: ClusterConfig) -> Dict[FailureCause, float]:
    """Per-node repair rate (per ms) of each failure cause"""
    return {
        FailureCause.HARDWARE: cfg.lambda_R_H,
        FailureCause.PROCESS: cfg.lambda_R_Spw if cfg.watchdog else cfg.lambda_R_S,
        FailureCause.BUNDLE: cfg.lambda_R_Sbw if cfg.watchdog else cfg.lambda_R_S,
    }


def build_recovery_model(cfg: ClusterConfig) -> SanModel:
    """Repair of failed nodes and their return through leader election"""
    cfg = _checked(cfg)
    quorum = cfg.C // 2 + 1

    places = _shared_places(cfg) + _down_places() + _rejoin_places()
    gates = [
        InputGate("LeaderKnown", lambda m: m[Places.LEADER_UP] == 1),
        InputGate("LeaderLost", lambda m: m[Places.LEADER_UP] == 0 and m[Places.FOLLOWERS_UP] > 0),
        InputGate(
            "ElectionQuorum",
            lambda m: m[Places.LEADER_UP] == 0 and m[Places.NODES_UP] >= quorum,
        ),
        InputGate(
            "NoElectionQuorum",
            lambda m: m[Places.LEADER_UP] == 0 and m[Places.NODES_UP] < quorum,
        ),
    ]
    activities: List[Activity] = []

    for cause, rate in repair_rates(cfg).items():
        if rate <= 0:
            continue
        down = Places.nodes_down(cause)
        activities.append(Activity.timed(
            f"repair{cause.value}",
            Exponential((lambda r, place: lambda m: r * m[place])(rate, down)),
            input_places=((down, 1),),
            cases=(Case(actions=(add_tokens(Places.INIT_POOL), add_tokens(Places.NODES_UP))),),
        ))

    def leader_known(m: Marking) -> float:
        return 1.0 if m[Places.LEADER_UP] == 1 else 0.0

    activities += [
        Activity.timed(
            "followerTimeout",
            Exponential(lambda m: cfg.lambda_f * m[Places.INIT_POOL]),
            input_places=((Places.INIT_POOL, 1),),
            cases=(
                Case(leader_known, (add_tokens(Places.ANNOUNCE_FOLLOWER),), "leaderFound"),
                Case(lambda m: 1.0 - leader_known(m), (add_tokens(Places.ANNOUNCE_CANDIDATE),), "noLeader"),
            ),
        ),
        Activity.instantaneous(
            "setNewFollowerUp",
            input_places=((Places.ANNOUNCE_FOLLOWER, 1),),
            cases=(Case(actions=(add_tokens(Places.FOLLOWERS_UP),)),),
        ),
        Activity.timed(
            "leaderLostTimeout",
            Exponential(lambda m: cfg.lambda_f * m[Places.FOLLOWERS_UP]),
            input_gates=("LeaderLost",),
            cases=(Case(actions=(
                add_tokens(Places.FOLLOWERS_UP, -1),
                add_tokens(Places.ANNOUNCE_CANDIDATE),
            )),),
        ),
        Activity.timed(
            "candidateElected",
            Deterministic(cfg.T_R_ms),
            input_places=((Places.ANNOUNCE_CANDIDATE, 1),),
            input_gates=("ElectionQuorum",),
            cases=(Case(actions=(OutputAction(lambda m: m.set(Places.LEADER_UP, 1), "setLeaderUp"),)),),
        ),
        Activity.instantaneous(
            "candidateNoQuorum",
            input_places=((Places.ANNOUNCE_CANDIDATE, 1),),
            input_gates=("NoElectionQuorum",),
            cases=(Case(actions=(add_tokens(Places.CANDIDATE_WAITING),)),),
        ),
        Activity.timed(
            "candidateTimeout",
            Exponential(lambda m: cfg.lambda_ca * m[Places.CANDIDATE_WAITING]),
            input_places=((Places.CANDIDATE_WAITING, 1),),
            cases=(Case(actions=(add_tokens(Places.ANNOUNCE_CANDIDATE),)),),
        ),
        Activity.instantaneous(
            "candidateDiscoversLeader",
            input_places=((Places.ANNOUNCE_CANDIDATE, 1),),
            input_gates=("LeaderKnown",),
            cases=(Case(actions=(add_tokens(Places.FOLLOWERS_UP),)),),
        ),
        Activity.instantaneous(
            "waitingCandidateDiscoversLeader",
            input_places=((Places.CANDIDATE_WAITING, 1),),
            input_gates=("LeaderKnown",),
            cases=(Case(actions=(add_tokens(Places.FOLLOWERS_UP),)),),
        ),
    ]

    return SanModel(f"recovery-C{cfg.C}", tuple(places), tuple(activities), tuple(gates))


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------

def compose(cfg: ClusterConfig) -> SanModel:
    """Fuse the three submodels over their shared places"""
    cfg = _checked(cfg)
    parts = [build_response_time_model(cfg), build_failure_model(cfg), build_recovery_model(cfg)]

    places: Dict[str, Place] = {}
    gates: Dict[str, InputGate] = {}
    activities: Dict[str, Activity] = {}
    for part in parts:
        for place in part.places:
            existing = places.get(place.id)
            if existing is None:
                places[place.id] = place
            elif existing != place:
                raise ModelConstructionError(
                    f"Place '{place.id}' differs between submodels: {existing} vs {place}"
                )
        for gate in part.gates:
            if gate.id in gates and gates[gate.id] is not gate:
                raise ModelConstructionError(f"Gate '{gate.id}' defined by more than one submodel")
            gates[gate.id] = gate
        for activity in part.activities:
            if activity.id in activities:
                raise ModelConstructionError(f"Activity '{activity.id}' defined by more than one submodel")
            activities[activity.id] = activity

    model = SanModel(
        f"raft-C{cfg.C}-{cfg.mode.value}",
        tuple(places.values()),
        tuple(activities.values()),
        tuple(gates.values()),
    )
    logger.debug(
        f"Composed '{model.name}': {len(model.places)} places, "
        f"{len(model.activities)} activities, {len(model.gates)} gates"
    )
    return model


# ---------------------------------------------------------------------------
# Views and rewards
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClusterStateView:
    """Controller roles and failures read off a composed-model marking"""
    C: int
    F_up: int
    L_up: int
    nodes_down: Dict[FailureCause, int] = field(default_factory=dict, hash=False)
    rejoining: int = 0
    counter_failures: int = 0

    @classmethod
    def from_marking(cls, cfg: ClusterConfig, m: Marking) -> "ClusterStateView":
        return cls(
            C=cfg.C,
            F_up=m[Places.FOLLOWERS_UP],
            L_up=m[Places.LEADER_UP],
            nodes_down={cause: m[Places.nodes_down(cause)] for cause in CAUSES},
            rejoining=sum(m[p] for p in Places.REJOINING),
            counter_failures=m[Places.COUNTER_FAILURES],
        )

    @property
    def total_down(self) -> int:
        return sum(self.nodes_down.values())

    def _roles(self) -> Tuple[float, float, float]:
        return failure_role_probabilities(self.C, self.F_up, self.L_up)

    @property
    def F_Sf(self) -> bool:
        """A further failure may hit a follower without losing the majority"""
        return self._roles()[0] > 0

    @property
    def F_Mj(self) -> bool:
        return self._roles()[1] > 0

    @property
    def F_Ldr(self) -> bool:
        return self._roles()[2] > 0

    @property
    def available(self) -> bool:
        return self.L_up == 1 and self.F_up >= self.C // 2

    def check(self) -> None:
        if self.L_up not in (0, 1):
            raise ModelIntegrityError(f"LeaderUp={self.L_up}")
        total = self.L_up + self.F_up + self.total_down + self.rejoining
        if total != self.C:
            raise ModelIntegrityError(f"Controller count {total} != C={self.C}")


def event_completed() -> RewardVariable:
    """Indicator of the client event having been handled"""
    return RewardVariable("event_completed", lambda m: 1.0 if m[Places.SEQUENCE_END] > 0 else 0.0)


def cluster_available(cfg: ClusterConfig) -> RewardVariable:
    """Elected leader with a live follower majority"""
    lam = leader_and_majority_up(cfg)
    return RewardVariable("cluster_available", lambda m: 1.0 if lam(m) else 0.0)
