"""
Stochastic Activity Networks
Places, markings, timed and instantaneous activities with gates and cases,
and the firing semantics shared by the state-space generator and the
Monte Carlo oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from core.exceptions import ModelIntegrityError, PreconditionError

DEFAULT_MAX_TOKENS = 2 ** 16
PROBABILITY_TOLERANCE = 1e-12


class Marking:
    """Immutable token assignment over the places of one model"""

    __slots__ = ("_index", "_tokens", "_hash")

    def __init__(self, index: Mapping[str, int], tokens: Sequence[int]):
        self._index = index
        self._tokens = tuple(tokens)
        self._hash = hash(self._tokens)

    @classmethod
    def from_counts(cls, place_ids: Sequence[str], counts: Mapping[str, int]) -> "Marking":
        index = {place_id: slot for slot, place_id in enumerate(place_ids)}
        unknown = sorted(set(counts) - set(index))
        if unknown:
            raise ModelIntegrityError(f"Unknown places in marking: {unknown}")
        return cls(index, [int(counts.get(place_id, 0)) for place_id in place_ids])

    @property
    def tokens(self) -> Tuple[int, ...]:
        return self._tokens

    @property
    def index(self) -> Mapping[str, int]:
        return self._index

    @property
    def place_ids(self) -> List[str]:
        return list(self._index)

    def slot(self, place_id: str) -> int:
        try:
            return self._index[place_id]
        except KeyError:
            raise ModelIntegrityError(f"Unknown place '{place_id}'") from None

    def __getitem__(self, place_id: str) -> int:
        return self._tokens[self.slot(place_id)]

    def __contains__(self, place_id: object) -> bool:
        return place_id in self._index

    def __iter__(self) -> Iterator[str]:
        return iter(self._index)

    def __len__(self) -> int:
        return len(self._tokens)

    def get(self, place_id: str, default: int = 0) -> int:
        slot = self._index.get(place_id)
        return default if slot is None else self._tokens[slot]

    def add(self, place_id: str, n: int = 1) -> "Marking":
        """Return a copy with n tokens added to place_id (n may be negative)"""
        tokens = list(self._tokens)
        tokens[self.slot(place_id)] += n
        return Marking(self._index, tokens)

    def set(self, place_id: str, n: int) -> "Marking":
        tokens = list(self._tokens)
        tokens[self.slot(place_id)] = n
        return Marking(self._index, tokens)

    def update(self, counts: Mapping[str, int]) -> "Marking":
        """Return a copy with the given places set to absolute counts"""
        tokens = list(self._tokens)
        for place_id, n in counts.items():
            tokens[self.slot(place_id)] = n
        return Marking(self._index, tokens)

    def as_dict(self) -> Dict[str, int]:
        return {place_id: self._tokens[slot] for place_id, slot in self._index.items()}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Marking):
            return NotImplemented
        if self._tokens != other._tokens:
            return False
        return self._index is other._index or list(self._index) == list(other._index)

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        occupied = ", ".join(f"{p}={n}" for p, n in self.as_dict().items() if n)
        return f"Marking({occupied})"


MarkingFunction = Callable[[Marking], float]
Value = Union[float, int, MarkingFunction]


def _evaluate(value: Value, m: Marking):
    return value(m) if callable(value) else value


@dataclass(frozen=True)
class Place:
    """A token holder of a SAN"""
    id: str
    initial_tokens: int = 0
    name: str = ""

    def __post_init__(self):
        if self.initial_tokens < 0:
            raise ModelIntegrityError(f"Place '{self.id}' has negative initial tokens")


@dataclass(frozen=True)
class Exponential:
    """Exponentially distributed firing delay; rate may depend on the marking"""
    rate: Value

    @property
    def marking_dependent(self) -> bool:
        return callable(self.rate)

    def rate_at(self, m: Marking) -> float:
        return float(_evaluate(self.rate, m))


@dataclass(frozen=True)
class Deterministic:
    """Fixed firing delay.

    A marking-dependent delay must name the places it reads in depends_on.
    """
    delay: Value
    depends_on: Tuple[str, ...] = ()

    def __post_init__(self):
        if callable(self.delay) and not self.depends_on:
            raise ModelIntegrityError("Marking-dependent deterministic delay needs depends_on places")

    @property
    def marking_dependent(self) -> bool:
        return callable(self.delay)

    def delay_at(self, m: Marking) -> Optional[float]:
        value = _evaluate(self.delay, m)
        return None if value is None else float(value)


Distribution = Union[Exponential, Deterministic]


@dataclass(frozen=True)
class OutputAction:
    """Pure marking transformation applied after the input tokens are removed"""
    transformation: Callable[[Marking], Marking]
    name: str = ""

    def __call__(self, m: Marking) -> Marking:
        return self.transformation(m)


def move(source: str, target: str, n: int = 1) -> OutputAction:
    return OutputAction(lambda m: m.add(source, -n).add(target, n), f"move {source}->{target}")


def add_tokens(place_id: str, n: int = 1) -> OutputAction:
    return OutputAction(lambda m: m.add(place_id, n), f"add {place_id}{n:+d}")


def set_tokens(place_id: str, n: int) -> OutputAction:
    return OutputAction(lambda m: m.set(place_id, n), f"set {place_id}={n}")


@dataclass(frozen=True)
class Case:
    """One probabilistic outcome of an activity"""
    probability: Value = 1.0
    actions: Tuple[OutputAction, ...] = ()
    name: str = ""

    def probability_at(self, m: Marking) -> float:
        return float(_evaluate(self.probability, m))


@dataclass(frozen=True)
class InputGate:
    """Enabling predicate; must be pure"""
    id: str
    predicate: Callable[[Marking], bool]


class ActivityKind(str, Enum):
    """Activity timing class"""
    TIMED = "timed"
    INSTANTANEOUS = "instantaneous"


@dataclass(frozen=True)
class Activity:
    """A SAN activity.

    Instantaneous activities fire before any timed one; among several enabled
    instantaneous activities the highest priority wins, ties going to the one
    declared first.
    """
    id: str
    kind: ActivityKind
    cases: Tuple[Case, ...] = (Case(),)
    distribution: Optional[Distribution] = None
    input_places: Tuple[Tuple[str, int], ...] = ()
    input_gates: Tuple[str, ...] = ()
    priority: int = 0
    name: str = ""

    def __post_init__(self):
        if not self.cases:
            raise ModelIntegrityError(f"Activity '{self.id}' has no cases")
        if self.kind is ActivityKind.TIMED and self.distribution is None:
            raise ModelIntegrityError(f"Timed activity '{self.id}' has no distribution")
        if self.kind is ActivityKind.INSTANTANEOUS and self.distribution is not None:
            raise ModelIntegrityError(f"Instantaneous activity '{self.id}' carries a distribution")
        for place_id, n in self.input_places:
            if n <= 0:
                raise ModelIntegrityError(f"Activity '{self.id}' consumes {n} tokens from '{place_id}'")

    @classmethod
    def timed(cls, id: str, distribution: Distribution, **kwargs) -> "Activity":
        return cls(id=id, kind=ActivityKind.TIMED, distribution=distribution, **kwargs)

    @classmethod
    def instantaneous(cls, id: str, **kwargs) -> "Activity":
        return cls(id=id, kind=ActivityKind.INSTANTANEOUS, **kwargs)

    @property
    def is_timed(self) -> bool:
        return self.kind is ActivityKind.TIMED

    @property
    def is_deterministic(self) -> bool:
        return isinstance(self.distribution, Deterministic)


@dataclass(frozen=True)
class SanModel:
    """Places, activities and gates of one network"""
    name: str
    places: Tuple[Place, ...]
    activities: Tuple[Activity, ...] = ()
    gates: Tuple[InputGate, ...] = ()
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self):
        if not self.places:
            raise ModelIntegrityError(f"Model '{self.name}' has no places")
        for label, ids in (
            ("place", [p.id for p in self.places]),
            ("activity", [a.id for a in self.activities]),
            ("gate", [g.id for g in self.gates]),
        ):
            if len(ids) != len(set(ids)):
                duplicates = sorted({i for i in ids if ids.count(i) > 1})
                raise ModelIntegrityError(f"Model '{self.name}' has duplicate {label} ids: {duplicates}")

    @cached_property
    def place_index(self) -> Dict[str, int]:
        return {place.id: slot for slot, place in enumerate(self.places)}

    @cached_property
    def activity_index(self) -> Dict[str, Activity]:
        return {activity.id: activity for activity in self.activities}

    @cached_property
    def gate_index(self) -> Dict[str, InputGate]:
        return {gate.id: gate for gate in self.gates}

    @cached_property
    def timed_activities(self) -> Tuple[Activity, ...]:
        return tuple(a for a in self.activities if a.is_timed)

    @cached_property
    def instantaneous_activities(self) -> Tuple[Activity, ...]:
        """Instantaneous activities in firing precedence order"""
        ordered = sorted(
            enumerate(a for a in self.activities if not a.is_timed),
            key=lambda item: (-item[1].priority, item[0]),
        )
        return tuple(a for _, a in ordered)

    @cached_property
    def _enabling(self) -> Dict[str, Tuple[Tuple[Tuple[int, int], ...], Tuple[Callable[[Marking], bool], ...]]]:
        return {}

    def _resolve(self, activity: Activity):
        resolved = self._enabling.get(activity.id)
        if resolved is not None:
            return resolved
        consumption = []
        for place_id, n in activity.input_places:
            if place_id not in self.place_index:
                raise ModelIntegrityError(f"Activity '{activity.id}' reads unknown place '{place_id}'")
            consumption.append((self.place_index[place_id], n))
        predicates = []
        for gate_id in activity.input_gates:
            gate = self.gate_index.get(gate_id)
            if gate is None:
                raise ModelIntegrityError(f"Activity '{activity.id}' references unknown gate '{gate_id}'")
            predicates.append(gate.predicate)
        resolved = (tuple(consumption), tuple(predicates))
        self._enabling[activity.id] = resolved
        return resolved

    @property
    def place_ids(self) -> List[str]:
        return [place.id for place in self.places]

    @property
    def initial_marking(self) -> Marking:
        return Marking(self.place_index, [place.initial_tokens for place in self.places])

    def marking(self, counts: Mapping[str, int]) -> Marking:
        """Marking of this model with the given counts and zero elsewhere"""
        return Marking.from_counts(self.place_ids, counts)

    def activity(self, activity_id: str) -> Activity:
        try:
            return self.activity_index[activity_id]
        except KeyError:
            raise ModelIntegrityError(f"Unknown activity '{activity_id}' in model '{self.name}'") from None

    def is_enabled(self, activity: Activity, m: Marking) -> bool:
        consumption, predicates = self._resolve(activity)
        tokens = m.tokens
        for slot, n in consumption:
            if tokens[slot] < n:
                return False
        for predicate in predicates:
            if not predicate(m):
                return False
        return True

    def apply(self, activity: Activity, case: Case, m: Marking) -> Marking:
        """Remove input tokens, run the case's output actions and check bounds"""
        consumption, _ = self._resolve(activity)
        tokens = list(m.tokens)
        for slot, n in consumption:
            tokens[slot] -= n
        result = Marking(m.index, tokens)
        for action in case.actions:
            result = action(result)
        lowest = min(result.tokens)
        if lowest < 0:
            raise ModelIntegrityError(
                f"Firing '{activity.id}' on {m} yields a negative token count ({result})"
            )
        if max(result.tokens) > self.max_tokens:
            raise ModelIntegrityError(
                f"Firing '{activity.id}' exceeds the token cap {self.max_tokens} ({result})"
            )
        return result

    def case_weights(self, activity: Activity, m: Marking) -> List[Tuple[int, Case, float]]:
        """Selectable cases of an enabled activity with their probabilities"""
        weights = []
        total = 0.0
        for index, case in enumerate(activity.cases):
            p = case.probability_at(m)
            if p < 0.0 or p > 1.0 + PROBABILITY_TOLERANCE or math.isnan(p):
                raise ModelIntegrityError(f"Activity '{activity.id}' case {index} has probability {p} in {m}")
            total += p
            if p > 0.0:
                weights.append((index, case, p))
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise ModelIntegrityError(
                f"Case probabilities of '{activity.id}' sum to {total!r} in {m}"
            )
        return weights

    def check_marking(self, m: Marking) -> None:
        if len(m) != len(self.places) or list(m.index) != self.place_ids:
            raise PreconditionError(f"Marking does not belong to model '{self.name}'")


def enabled_activities(model: SanModel, m: Marking) -> List[str]:
    """Ids of the activities enabled in m, in declaration order"""
    model.check_marking(m)
    return [activity.id for activity in model.activities if model.is_enabled(activity, m)]


def fire(model: SanModel, m: Marking, activity_id: str, case_index: int) -> Marking:
    """Fire one case of an enabled activity; m is left untouched"""
    model.check_marking(m)
    activity = model.activity(activity_id)
    if not model.is_enabled(activity, m):
        raise PreconditionError(f"Activity '{activity_id}' is not enabled in {m}")
    if not 0 <= case_index < len(activity.cases):
        raise PreconditionError(f"Activity '{activity_id}' has no case {case_index}")
    case = activity.cases[case_index]
    if case.probability_at(m) <= 0.0:
        raise PreconditionError(f"Case {case_index} of '{activity_id}' has probability 0 in {m}")
    return model.apply(activity, case, m)


def select_instantaneous(model: SanModel, m: Marking) -> Optional[Activity]:
    """The instantaneous activity that fires next in m, if any"""
    for activity in model.instantaneous_activities:
        if model.is_enabled(activity, m):
            return activity
    return None


def is_vanishing(model: SanModel, m: Marking) -> bool:
    return select_instantaneous(model, m) is not None


@dataclass(frozen=True)
class ValidationFinding:
    """One defect found by validate()"""
    code: str
    subject: str
    message: str


@dataclass
class ValidationReport:
    """Findings of a model check; empty means well formed"""
    model_name: str
    findings: List[ValidationFinding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def codes(self) -> List[str]:
        return [finding.code for finding in self.findings]

    def raise_for_findings(self) -> None:
        if self.findings:
            details = "; ".join(f"{f.subject}: {f.message}" for f in self.findings)
            raise ModelIntegrityError(f"Model '{self.model_name}' is invalid: {details}")


def validate(model: SanModel) -> ValidationReport:
    """Check references, constant parameters and the initial marking"""
    report = ValidationReport(model.name)

    def finding(code: str, subject: str, message: str):
        report.findings.append(ValidationFinding(code, subject, message))

    dangling = set()
    for activity in model.activities:
        for place_id, _ in activity.input_places:
            if place_id not in model.place_index:
                finding("dangling-place", activity.id, f"input place '{place_id}' does not exist")
                dangling.add(activity.id)
        for gate_id in activity.input_gates:
            if gate_id not in model.gate_index:
                finding("dangling-gate", activity.id, f"input gate '{gate_id}' does not exist")
                dangling.add(activity.id)
        distribution = activity.distribution
        if isinstance(distribution, Deterministic):
            for place_id in distribution.depends_on:
                if place_id not in model.place_index:
                    finding("dangling-place", activity.id, f"delay reads unknown place '{place_id}'")
                    dangling.add(activity.id)
            if not distribution.marking_dependent and not distribution.delay > 0:
                finding("nonpositive-delay", activity.id, f"delay {distribution.delay}")
        elif isinstance(distribution, Exponential):
            if not distribution.marking_dependent and not distribution.rate > 0:
                finding("nonpositive-rate", activity.id, f"rate {distribution.rate}")
        if not any(callable(case.probability) for case in activity.cases):
            total = math.fsum(float(case.probability) for case in activity.cases)
            if abs(total - 1.0) > PROBABILITY_TOLERANCE:
                finding("case-probabilities", activity.id, f"case probabilities sum to {total!r}")

    for place in model.places:
        if place.initial_tokens > model.max_tokens:
            finding("token-cap", place.id, f"{place.initial_tokens} initial tokens exceed {model.max_tokens}")

    m0 = model.initial_marking
    for activity in model.activities:
        if activity.id in dangling:
            continue
        try:
            if not model.is_enabled(activity, m0):
                continue
            if any(callable(case.probability) for case in activity.cases):
                total = sum(case.probability_at(m0) for case in activity.cases)
                if abs(total - 1.0) > PROBABILITY_TOLERANCE:
                    finding("case-probabilities", activity.id, f"case probabilities sum to {total!r}")
            distribution = activity.distribution
            if isinstance(distribution, Exponential) and distribution.marking_dependent:
                rate = distribution.rate_at(m0)
                if not rate > 0:
                    finding("nonpositive-rate", activity.id, f"rate {rate} in the initial marking")
            elif isinstance(distribution, Deterministic) and distribution.marking_dependent:
                delay = distribution.delay_at(m0)
                if delay is None or not delay > 0:
                    finding("nonpositive-delay", activity.id, f"delay {delay} in the initial marking")
        except ModelIntegrityError as exc:
            finding("evaluation", activity.id, str(exc))
    return report
