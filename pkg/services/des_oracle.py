"""
Discrete-Event Oracle
Monte Carlo execution of SAN models with race semantics, used to check the
analytic results statistically.
"""

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence
from scipy.stats import norm

from core.ctmc_solver import RewardVariable
from core.exceptions import ModelIntegrityError, PreconditionError, VanishingLoopError
from core.logging import get_logger
from core.san import Activity, Deterministic, Marking, SanModel, select_instantaneous, validate

logger = get_logger()

MAX_INSTANTANEOUS_FIRINGS = 1_000_000
DEFAULT_CONFIDENCE = 0.99


def generator_description() -> str:
    """Random source named in result metadata"""
    return f"numpy {np.__version__} PCG64 via SeedSequence.spawn"


def marking_hash(m: Marking) -> str:
    return hashlib.blake2b(np.asarray(m.tokens, dtype=np.int64).tobytes(), digest_size=8).hexdigest()


@dataclass(frozen=True)
class TraceEvent:
    time: float
    activity_id: str
    marking_hash: str


@dataclass
class SimRun:
    """One replication of a model up to a horizon"""
    seed: int
    horizon: float
    final_marking: Marking
    clock: float
    firings: int
    first_passage: Optional[float] = None
    trace: Optional[List[TraceEvent]] = None


@dataclass(frozen=True)
class Estimate:
    """Sample mean with a normal-approximation confidence interval"""
    mean: float
    ci_halfwidth: float
    runs: int
    confidence: float = DEFAULT_CONFIDENCE
    std_error: float = 0.0

    @classmethod
    def from_samples(cls, samples: np.ndarray, confidence: float = DEFAULT_CONFIDENCE) -> "Estimate":
        samples = np.asarray(samples, dtype=np.float64)
        runs = samples.size
        if runs < 2:
            raise PreconditionError("An estimate needs at least 2 samples")
        std_error = float(samples.std(ddof=1) / math.sqrt(runs))
        z = float(norm.ppf(0.5 + confidence / 2.0))
        return cls(float(samples.mean()), z * std_error, runs, confidence, std_error)

    @property
    def lower(self) -> float:
        return self.mean - self.ci_halfwidth

    @property
    def upper(self) -> float:
        return self.mean + self.ci_halfwidth

    def contains(self, value: float) -> bool:
        return abs(value - self.mean) <= self.ci_halfwidth


class _Simulator:
    """Event loop over one validated model"""

    def __init__(self, model: SanModel):
        validate(model).raise_for_findings()
        self.model = model
        self.timed = model.timed_activities

    def _choose(self, activity: Activity, m: Marking, rng: Generator):
        weights = self.model.case_weights(activity, m)
        if len(weights) == 1:
            return weights[0][1]
        u = rng.random()
        cumulative = 0.0
        for _, case, p in weights:
            cumulative += p
            if u < cumulative:
                return case
        return weights[-1][1]

    def _settle(self, m: Marking, clock: float, rng: Generator, trace: Optional[List[TraceEvent]]) -> Tuple[Marking, int]:
        firings = 0
        while True:
            activity = select_instantaneous(self.model, m)
            if activity is None:
                return m, firings
            firings += 1
            if firings > MAX_INSTANTANEOUS_FIRINGS:
                raise VanishingLoopError(
                    f"{MAX_INSTANTANEOUS_FIRINGS} consecutive instantaneous firings at t={clock}"
                )
            m = self.model.apply(activity, self._choose(activity, m, rng), m)
            if trace is not None:
                trace.append(TraceEvent(clock, activity.id, marking_hash(m)))

    def run(
        self,
        rng: Generator,
        horizon: float,
        stop: Optional[Callable[[Marking], bool]] = None,
        record_trace: bool = False,
        seed: int = 0,
    ) -> SimRun:
        trace: Optional[List[TraceEvent]] = [] if record_trace else None
        clock = 0.0
        m, firings = self._settle(self.model.initial_marking, clock, rng, trace)
        if stop is not None and stop(m):
            return SimRun(seed, horizon, m, clock, firings, 0.0, trace)

        # Deterministic activities keep their firing time while continuously enabled;
        # exponential ones are resampled after every event
        scheduled: Dict[str, float] = {}
        while True:
            earliest: Optional[Activity] = None
            earliest_time = math.inf
            for activity in self.timed:
                if not self.model.is_enabled(activity, m):
                    scheduled.pop(activity.id, None)
                    continue
                distribution = activity.distribution
                if isinstance(distribution, Deterministic):
                    when = scheduled.get(activity.id)
                    if when is None:
                        delay = distribution.delay_at(m)
                        if delay is None or not delay > 0:
                            raise ModelIntegrityError(f"Activity '{activity.id}' has delay {delay} in {m}")
                        when = clock + delay
                        scheduled[activity.id] = when
                else:
                    rate = distribution.rate_at(m)
                    if not rate > 0:
                        raise ModelIntegrityError(f"Activity '{activity.id}' has rate {rate} in {m}")
                    when = clock + rng.exponential(1.0 / rate)
                if when < earliest_time:
                    earliest, earliest_time = activity, when
            if earliest is None or earliest_time > horizon:
                return SimRun(seed, horizon, m, clock, firings, None, trace)

            clock = earliest_time
            scheduled.pop(earliest.id, None)
            m = self.model.apply(earliest, self._choose(earliest, m, rng), m)
            firings += 1
            if trace is not None:
                trace.append(TraceEvent(clock, earliest.id, marking_hash(m)))
            m, settled = self._settle(m, clock, rng, trace)
            firings += settled
            if stop is not None and stop(m):
                return SimRun(seed, horizon, m, clock, firings, clock, trace)


def _streams(seed: int, runs: int) -> List[Generator]:
    """Independent generator per replication, derived from (seed, replication index)"""
    return [Generator(PCG64(child)) for child in SeedSequence(seed).spawn(runs)]


def simulate(model: SanModel, horizon: float, seed: int, record_trace: bool = True) -> SimRun:
    """Run one replication up to the horizon"""
    if horizon < 0:
        raise PreconditionError(f"horizon must be >= 0, got {horizon}")
    simulator = _Simulator(model)
    rng = Generator(PCG64(SeedSequence(seed)))
    return simulator.run(rng, horizon, record_trace=record_trace, seed=seed)


def estimate_reward(
    model: SanModel,
    reward: RewardVariable,
    t: float,
    runs: int,
    seed: int,
    confidence: float = DEFAULT_CONFIDENCE,
) -> Estimate:
    """Mean reward of the marking at time t over independent replications"""
    if runs < 2:
        raise PreconditionError("estimate_reward needs runs >= 2")
    simulator = _Simulator(model)
    values = np.empty(runs)
    for r, rng in enumerate(_streams(seed, runs)):
        values[r] = reward.value(simulator.run(rng, t, seed=seed).final_marking)
    estimate = Estimate.from_samples(values, confidence)
    logger.debug(f"Reward '{reward.name}' at t={t}: {estimate.mean:.6f} +/- {estimate.ci_halfwidth:.2e} ({runs} runs)")
    return estimate


def first_passage_times(
    model: SanModel,
    predicate: Callable[[Marking], bool],
    horizon: float,
    runs: int,
    seed: int,
) -> np.ndarray:
    """Time each replication first reaches a marking satisfying predicate (inf if never by the horizon)"""
    if runs < 1:
        raise PreconditionError("first_passage_times needs runs >= 1")
    simulator = _Simulator(model)
    passages = np.full(runs, np.inf)
    unfinished = 0
    for r, rng in enumerate(_streams(seed, runs)):
        run = simulator.run(rng, horizon, stop=predicate, seed=seed)
        if run.first_passage is None:
            unfinished += 1
        else:
            passages[r] = run.first_passage
    if unfinished:
        logger.debug(f"{unfinished} of {runs} replications did not reach the target by {horizon}")
    return passages


def estimate_cdf(
    model: SanModel,
    predicate: Callable[[Marking], bool],
    times: Sequence[float],
    runs: int,
    seed: int,
    confidence: float = DEFAULT_CONFIDENCE,
) -> List[Tuple[float, Estimate]]:
    """P(first passage <= t) for every t, from one set of replications"""
    if runs < 2:
        raise PreconditionError("estimate_cdf needs runs >= 2")
    grid = list(times)
    passages = first_passage_times(model, predicate, max(grid), runs, seed)
    return [(float(t), Estimate.from_samples((passages <= t).astype(np.float64), confidence)) for t in grid]


def write_trace(run: SimRun, path: Union[str, Path]) -> None:
    """Trace dump: one 'time_ms<TAB>activity' line per firing"""
    if run.trace is None:
        raise PreconditionError("The run was simulated without a trace")
    lines = [f"{event.time:.6f}\t{event.activity_id}" for event in run.trace]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
