"""
State-Space Generation
Erlang expansion of deterministic activities, breadth-first reachability
with on-the-fly vanishing-marking elimination, and the resulting CTMC.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Dict, Generic, Hashable, Iterator, List, Mapping, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
import scipy.sparse as sp

from core.config import get_settings
from core.exceptions import (
    ExplorationAbortedError,
    ModelIntegrityError,
    PreconditionError,
    VanishingLoopError,
)
from core.logging import get_logger
from core.san import (
    DEFAULT_MAX_TOKENS,
    PROBABILITY_TOLERANCE,
    Activity,
    Case,
    Deterministic,
    Exponential,
    InputGate,
    Marking,
    OutputAction,
    Place,
    SanModel,
    select_instantaneous,
)

logger = get_logger()

K = TypeVar("K", bound=Hashable)

# Auxiliary latch/abort activities settle after every model-defined instantaneous activity
AUXILIARY_PRIORITY = -1_000_000
MAX_VANISHING_FIRINGS = 1_000_000


@dataclass(frozen=True)
class ExplorationLimits:
    """Bounds that abort state-space exploration"""
    max_states: int = 20_000_000
    max_tokens_per_place: int = DEFAULT_MAX_TOKENS

    def __post_init__(self):
        if self.max_states <= 0 or self.max_tokens_per_place <= 0:
            raise PreconditionError("Exploration limits must be positive")

    @classmethod
    def from_settings(cls) -> "ExplorationLimits":
        settings = get_settings()
        return cls(max_states=settings.max_states, max_tokens_per_place=settings.max_tokens_per_place)


@dataclass
class Ctmc:
    """Tangible state space with sparse transition rates and an initial distribution"""
    states: List[Hashable]
    sources: np.ndarray
    targets: np.ndarray
    rates: np.ndarray
    initial: np.ndarray
    name: str = ""
    index: Dict[Hashable, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.index:
            self.index = {state: i for i, state in enumerate(self.states)}

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_transitions(self) -> int:
        return int(self.rates.size)

    def transitions(self) -> Iterator[Tuple[int, int, float]]:
        for i, j, rate in zip(self.sources.tolist(), self.targets.tolist(), self.rates.tolist()):
            yield i, j, rate

    def index_of(self, state: Hashable) -> int:
        try:
            return self.index[state]
        except KeyError:
            raise PreconditionError(f"{state!r} is not a state of this CTMC") from None

    @cached_property
    def rate_matrix(self) -> sp.csr_matrix:
        """Off-diagonal transition rates R[i, j]"""
        n = self.n_states
        return sp.csr_matrix((self.rates, (self.sources, self.targets)), shape=(n, n))

    @cached_property
    def exit_rates(self) -> np.ndarray:
        return np.asarray(self.rate_matrix.sum(axis=1)).ravel()

    def generator(self) -> sp.csr_matrix:
        """Infinitesimal generator Q = R - diag(exit rates)"""
        return (self.rate_matrix - sp.diags(self.exit_rates)).tocsr()

    def write_dump(self, path: Union[str, Path]) -> None:
        """Text dump: header line, then one tab-separated line per transition"""
        support = ",".join(
            f"{i}:{p:.17g}" for i, p in enumerate(self.initial.tolist()) if p > 0.0
        )
        lines = [f"states={self.n_states} initial={support}"]
        lines.extend(f"{i}\t{j}\t{rate:.17g}" for i, j, rate in self.transitions())
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.info(f"CTMC dump written to {path} ({self.n_states} states, {self.n_transitions} transitions)")


class VanishingResolver(Generic[K]):
    """Absorbs vanishing states into probability distributions over tangible states.

    branches(key) returns None for a tangible key, otherwise the successors of
    the instantaneous step taken in that key with their probabilities.
    """

    def __init__(self, branches: Callable[[K], Optional[List[Tuple[K, float]]]]):
        self._branches = branches
        self._memo: Dict[K, Tuple[Tuple[K, float], ...]] = {}
        self.firings = 0

    @property
    def vanishing_seen(self) -> int:
        return len(self._memo)

    def resolve(self, key: K) -> Tuple[Tuple[K, float], ...]:
        memo = self._memo.get(key)
        if memo is not None:
            return memo
        first = self._branches(key)
        if first is None:
            return ((key, 1.0),)

        # Iterative depth-first absorption; frames are [node, successors, position, accumulator]
        stack = [[key, first, 0, {}]]
        on_stack = {key}
        while stack:
            frame = stack[-1]
            node, successors, position, accumulator = frame
            if position == len(successors):
                stack.pop()
                on_stack.discard(node)
                self._memo[node] = tuple(accumulator.items())
                continue
            child, p = successors[position]
            resolved = self._memo.get(child)
            if resolved is not None:
                for target, q in resolved:
                    accumulator[target] = accumulator.get(target, 0.0) + p * q
                frame[2] += 1
                continue
            if child in on_stack:
                raise VanishingLoopError(f"Vanishing states cycle through {child!r}")
            self.firings += 1
            if self.firings > MAX_VANISHING_FIRINGS:
                raise VanishingLoopError("Instantaneous firing chain does not terminate")
            child_branches = self._branches(child)
            if child_branches is None:
                accumulator[child] = accumulator.get(child, 0.0) + p
                frame[2] += 1
                continue
            stack.append([child, child_branches, 0, {}])
            on_stack.add(child)
        return self._memo[key]


def _san_branches(model: SanModel) -> Callable[[Marking], Optional[List[Tuple[Marking, float]]]]:
    def branches(m: Marking):
        activity = select_instantaneous(model, m)
        if activity is None:
            return None
        return [(model.apply(activity, case, m), p) for _, case, p in model.case_weights(activity, m)]
    return branches


def _consume(input_places: Tuple[Tuple[str, int], ...]) -> OutputAction:
    def transformation(m: Marking) -> Marking:
        for place_id, n in input_places:
            m = m.add(place_id, -n)
        return m
    return OutputAction(transformation, "consume inputs")


def _erlang_chain(model: SanModel, activity: Activity, stages: int):
    """Places, gates and activities replacing one deterministic activity"""
    distribution: Deterministic = activity.distribution
    if not distribution.marking_dependent and stages == 1:
        rate = 1.0 / float(distribution.delay)
        return [], [], [Activity.timed(
            activity.id,
            Exponential(rate),
            cases=activity.cases,
            input_places=activity.input_places,
            input_gates=activity.input_gates,
            name=activity.name,
        )]

    latched = distribution.marking_dependent
    stage_place = f"{activity.id}__stage"
    armed_place = f"{activity.id}__armed"
    latch_places = {p: f"{activity.id}__latch__{p}" for p in distribution.depends_on}

    places: List[Place] = []
    if stages > 1:
        places.append(Place(stage_place, name=f"{activity.name or activity.id} stage"))
    if latched:
        places.append(Place(armed_place, name=f"{activity.name or activity.id} armed"))
        places.extend(Place(latch, name=f"latched {p}") for p, latch in latch_places.items())

    def original_enabled(m: Marking) -> bool:
        return model.is_enabled(activity, m)

    def in_progress(m: Marking) -> bool:
        if latched and m[armed_place] > 0:
            return True
        return stages > 1 and m[stage_place] > 0

    def reset(m: Marking) -> Marking:
        counts = {latch: 0 for latch in latch_places.values()}
        if stages > 1:
            counts[stage_place] = 0
        if latched:
            counts[armed_place] = 0
        return m.update(counts)

    def final(m: Marking) -> bool:
        return stages == 1 or m[stage_place] == stages - 1

    if latched:
        def stage_rate(m: Marking) -> float:
            view = m.update({p: m[latch] for p, latch in latch_places.items()})
            delay = distribution.delay_at(view)
            if delay is None or not delay > 0:
                raise ModelIntegrityError(f"Latched delay of '{activity.id}' is {delay} in {m}")
            return stages / delay
        progress_gate = InputGate(f"{activity.id}__progress", lambda m: m[armed_place] > 0 and original_enabled(m))
    else:
        constant_rate = stages / float(distribution.delay)

        def stage_rate(m: Marking) -> float:
            return constant_rate
        progress_gate = InputGate(f"{activity.id}__progress", original_enabled)

    gates = [progress_gate]
    abort_gate = InputGate(f"{activity.id}__abort", lambda m: in_progress(m) and not original_enabled(m))
    gates.append(abort_gate)

    cases: List[Case] = []
    if stages > 1:
        cases.append(Case(
            probability=lambda m: 0.0 if final(m) else 1.0,
            actions=(OutputAction(lambda m: m.add(stage_place, 1), "next stage"),),
            name="advance",
        ))
    consume = _consume(activity.input_places)
    reset_action = OutputAction(reset, "reset chain")
    for case in activity.cases:
        cases.append(Case(
            probability=(lambda c: lambda m: c.probability_at(m) if final(m) else 0.0)(case),
            actions=(consume,) + tuple(case.actions) + (reset_action,),
            name=case.name,
        ))

    activities = [Activity.timed(
        activity.id,
        Exponential(stage_rate),
        cases=tuple(cases),
        input_gates=(progress_gate.id,),
        name=activity.name,
    )]
    if latched:
        arm_gate = InputGate(f"{activity.id}__arm", lambda m: m[armed_place] == 0 and original_enabled(m))
        gates.append(arm_gate)

        def arm(m: Marking) -> Marking:
            counts = {latch: m[p] for p, latch in latch_places.items()}
            counts[armed_place] = 1
            return m.update(counts)
        activities.append(Activity.instantaneous(
            f"{activity.id}__latch",
            cases=(Case(actions=(OutputAction(arm, "latch delay inputs"),)),),
            input_gates=(arm_gate.id,),
            priority=AUXILIARY_PRIORITY,
        ))
    activities.append(Activity.instantaneous(
        f"{activity.id}__abort",
        cases=(Case(actions=(reset_action,)),),
        input_gates=(abort_gate.id,),
        priority=AUXILIARY_PRIORITY,
    ))
    return places, gates, activities


def expand_erlang(model: SanModel, stages: int) -> SanModel:
    """Replace every deterministic activity with an Erlang chain of the given length.

    Each stage fires at rate stages/T. A marking-dependent T is evaluated once
    when the chain starts, on latched copies of the places it reads, and held
    until the chain completes or the activity is disabled.
    """
    if stages < 1:
        raise PreconditionError(f"Erlang stage count must be >= 1, got {stages}")
    if not any(activity.is_deterministic for activity in model.activities):
        return model

    places = list(model.places)
    gates = list(model.gates)
    activities: List[Activity] = []
    for activity in model.activities:
        if not activity.is_deterministic:
            activities.append(activity)
            continue
        chain_places, chain_gates, chain_activities = _erlang_chain(model, activity, stages)
        places.extend(chain_places)
        gates.extend(chain_gates)
        activities.extend(chain_activities)

    expanded = SanModel(
        name=f"{model.name}[E{stages}]",
        places=tuple(places),
        activities=tuple(activities),
        gates=tuple(gates),
        max_tokens=model.max_tokens,
    )
    logger.debug(
        f"Erlang-expanded '{model.name}' with {stages} stages: "
        f"{len(model.places)} -> {len(expanded.places)} places, "
        f"{len(model.activities)} -> {len(expanded.activities)} activities"
    )
    return expanded


def generate(model: SanModel, limits: Optional[ExplorationLimits] = None) -> Ctmc:
    """Breadth-first reachability over tangible markings.

    States are indexed in discovery order with activities visited in
    declaration order, so identical inputs give identical chains.
    """
    limits = limits or ExplorationLimits.from_settings()
    deterministic = [activity.id for activity in model.timed_activities if activity.is_deterministic]
    if deterministic:
        raise PreconditionError(f"Expand deterministic activities before generation: {deterministic}")

    started = time.perf_counter()
    resolver: VanishingResolver[Marking] = VanishingResolver(_san_branches(model))
    index: Dict[Marking, int] = {}
    states: List[Marking] = []
    cursor = 0

    def register(m: Marking) -> int:
        slot = index.get(m)
        if slot is not None:
            return slot
        if len(states) >= limits.max_states:
            raise ExplorationAbortedError(
                f"State limit {limits.max_states} exceeded", len(states), len(states) - cursor
            )
        if max(m.tokens) > limits.max_tokens_per_place:
            raise ExplorationAbortedError(
                f"Token limit {limits.max_tokens_per_place} exceeded", len(states), len(states) - cursor
            )
        slot = len(states)
        index[m] = slot
        states.append(m)
        return slot

    initial_support = [(register(m), p) for m, p in resolver.resolve(model.initial_marking)]

    sources: List[int] = []
    targets: List[int] = []
    rates: List[float] = []
    timed = model.timed_activities
    while cursor < len(states):
        m = states[cursor]
        outgoing: Dict[int, float] = {}
        for activity in timed:
            if not model.is_enabled(activity, m):
                continue
            rate = activity.distribution.rate_at(m)
            if not rate > 0 or not math.isfinite(rate):
                raise ModelIntegrityError(f"Activity '{activity.id}' has rate {rate} in {m}")
            for _, case, p in model.case_weights(activity, m):
                successor = model.apply(activity, case, m)
                for target, q in resolver.resolve(successor):
                    j = register(target)
                    if j != cursor:
                        outgoing[j] = outgoing.get(j, 0.0) + rate * p * q
        for j, rate in outgoing.items():
            sources.append(cursor)
            targets.append(j)
            rates.append(rate)
        cursor += 1

    initial = np.zeros(len(states))
    for slot, p in initial_support:
        initial[slot] += p

    ctmc = Ctmc(
        states=states,
        sources=np.asarray(sources, dtype=np.int64),
        targets=np.asarray(targets, dtype=np.int64),
        rates=np.asarray(rates, dtype=np.float64),
        initial=initial,
        name=model.name,
        index=index,
    )
    logger.info(
        f"Generated CTMC for '{model.name}': {ctmc.n_states} states, "
        f"{ctmc.n_transitions} transitions in {time.perf_counter() - started:.2f}s"
    )
    logger.debug(f"Absorbed {resolver.vanishing_seen} vanishing markings ({resolver.firings} instantaneous firings)")
    return ctmc


@dataclass
class RawGraph:
    """Reachability graph mixing timed and instantaneous transitions.

    vanishing[i] marks states in which an instantaneous step is taken;
    instantaneous edges carry case probabilities, timed edges carry rates.
    """
    states: Sequence[Hashable]
    vanishing: Sequence[bool]
    timed: Sequence[Tuple[int, int, float]] = ()
    instantaneous: Sequence[Tuple[int, int, float]] = ()
    initial: Mapping[int, float] = field(default_factory=lambda: {0: 1.0})


def eliminate_vanishing(raw: RawGraph) -> Ctmc:
    """Collapse vanishing states of a raw graph into a tangible CTMC"""
    n = len(raw.states)
    if len(raw.vanishing) != n:
        raise PreconditionError("vanishing flags must cover every state")

    timed_out: List[List[Tuple[int, float]]] = [[] for _ in range(n)]
    switch_out: List[List[Tuple[int, float]]] = [[] for _ in range(n)]
    for i, j, rate in raw.timed:
        if not rate > 0:
            raise ModelIntegrityError(f"Timed edge {i}->{j} has rate {rate}")
        timed_out[i].append((j, rate))
    for i, j, p in raw.instantaneous:
        if not raw.vanishing[i]:
            raise ModelIntegrityError(f"Instantaneous edge leaves tangible state {i}")
        switch_out[i].append((j, p))
    for i in range(n):
        if raw.vanishing[i]:
            total = sum(p for _, p in switch_out[i])
            if abs(total - 1.0) > PROBABILITY_TOLERANCE:
                raise ModelIntegrityError(f"Instantaneous branches of state {i} sum to {total!r}")

    def branches(i: int):
        return switch_out[i] if raw.vanishing[i] else None

    resolver: VanishingResolver[int] = VanishingResolver(branches)
    order: List[int] = []
    renumber: Dict[int, int] = {}

    def register(i: int) -> int:
        slot = renumber.get(i)
        if slot is None:
            slot = len(order)
            renumber[i] = slot
            order.append(i)
        return slot

    initial_support = []
    for i, p in raw.initial.items():
        for target, q in resolver.resolve(i):
            initial_support.append((register(target), p * q))

    sources: List[int] = []
    targets: List[int] = []
    rates: List[float] = []
    cursor = 0
    while cursor < len(order):
        i = order[cursor]
        outgoing: Dict[int, float] = {}
        for j, rate in timed_out[i]:
            for target, q in resolver.resolve(j):
                slot = register(target)
                if slot != cursor:
                    outgoing[slot] = outgoing.get(slot, 0.0) + rate * q
        for slot, rate in outgoing.items():
            sources.append(cursor)
            targets.append(slot)
            rates.append(rate)
        cursor += 1

    initial = np.zeros(len(order))
    for slot, p in initial_support:
        initial[slot] += p
    return Ctmc(
        states=[raw.states[i] for i in order],
        sources=np.asarray(sources, dtype=np.int64),
        targets=np.asarray(targets, dtype=np.int64),
        rates=np.asarray(rates, dtype=np.float64),
        initial=initial,
    )
