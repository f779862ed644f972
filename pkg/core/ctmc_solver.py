"""
Transient CTMC Solver
Uniformization with Fox-Glynn style Poisson truncation, transient sweeps over
time grids, and reward evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.integrate import simpson
from scipy.linalg import expm
from scipy.stats import poisson

from core.config import get_settings
from core.exceptions import PreconditionError, SolverError
from core.logging import get_logger
from core.san import Marking
from core.state_space import Ctmc

logger = get_logger()

UNIFORMIZATION_HEADROOM = 1.02
ACCUMULATION_BLOCK = 256
BLOCK_BUDGET = 2 ** 22


@dataclass(frozen=True)
class SolverSettings:
    """Poisson truncation tolerances; eps_left + eps_right is the total tolerance"""
    eps_left: float = 5e-10
    eps_right: float = 5e-10
    max_steps: int = 5_000_000
    dense_state_limit: int = 4000

    def __post_init__(self):
        for name in ("eps_left", "eps_right"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise PreconditionError(f"{name} must lie in (0, 1), got {value}")

    @property
    def eps(self) -> float:
        return self.eps_left + self.eps_right

    @classmethod
    def from_eps(cls, eps: float, **kwargs) -> "SolverSettings":
        return cls(eps_left=eps / 2.0, eps_right=eps / 2.0, **kwargs)

    @classmethod
    def from_settings(cls, eps: Optional[float] = None) -> "SolverSettings":
        settings = get_settings()
        return cls.from_eps(
            settings.solver_eps if eps is None else eps,
            max_steps=settings.max_uniformization_steps,
            dense_state_limit=settings.dense_state_limit,
        )


@dataclass(frozen=True)
class RewardVariable:
    """Named pure function of a marking"""
    name: str
    value: Callable[[Marking], float]

    def vector(self, ctmc: Ctmc) -> np.ndarray:
        return np.fromiter((float(self.value(m)) for m in ctmc.states), dtype=np.float64, count=ctmc.n_states)


@dataclass(frozen=True)
class PoissonWindow:
    """Truncated Poisson weights for indices left..right"""
    qt: float
    left: int
    right: int
    weights: np.ndarray

    @property
    def total(self) -> float:
        return float(self.weights.sum())


@dataclass
class TransientSolution:
    """State distributions of one CTMC at a grid of time points"""
    ctmc: Ctmc
    times: np.ndarray
    distributions: np.ndarray
    method: str = "uniformization"
    rate: float = 0.0

    def at(self, k: int) -> np.ndarray:
        return self.distributions[k]


def uniformize(ctmc: Ctmc) -> Tuple[sp.csr_matrix, float]:
    """One-step matrix P = I + Q/q with q 2% above the largest exit rate"""
    if ctmc.n_states == 0:
        raise SolverError("Cannot uniformize an empty CTMC")
    exit_rates = ctmc.exit_rates
    q = float(exit_rates.max()) * UNIFORMIZATION_HEADROOM
    if q <= 0.0:
        q = 1.0
    P = (ctmc.rate_matrix / q + sp.diags(1.0 - exit_rates / q)).tocsr()
    return P, q


def _left_point(qt: float, eps_left: float) -> int:
    """Largest l whose left tail P(N < l) stays within eps_left"""
    left = int(poisson.ppf(eps_left, qt))
    while left > 0 and poisson.cdf(left - 1, qt) > eps_left:
        left -= 1
    while poisson.cdf(left, qt) <= eps_left:
        left += 1
    return left


def _right_point(qt: float, eps_right: float) -> int:
    """Smallest r whose right tail P(N > r) stays within eps_right"""
    right = int(poisson.isf(eps_right, qt))
    while poisson.sf(right, qt) > eps_right:
        right += 1
    while right > 0 and poisson.sf(right - 1, qt) <= eps_right:
        right -= 1
    return right


def poisson_terms(qt: float, settings: Optional[SolverSettings] = None) -> PoissonWindow:
    """Truncation points and normalized weights of a Poisson(qt) variable.

    Weights are built by the ratio recursion outward from the mode starting
    from a unit weight and rescaled to the window's Poisson mass, so no
    factorial or power of qt is ever formed.
    """
    settings = settings or SolverSettings.from_settings()
    if qt < 0 or not math.isfinite(qt):
        raise PreconditionError(f"qt must be finite and >= 0, got {qt}")
    if qt == 0.0:
        return PoissonWindow(0.0, 0, 0, np.ones(1))

    left = _left_point(qt, settings.eps_left)
    right = max(_right_point(qt, settings.eps_right), left)
    mode = min(max(int(math.floor(qt)), left), right)

    scaled = np.empty(right - left + 1)
    scaled[mode - left] = 1.0
    for k in range(mode, left, -1):
        scaled[k - 1 - left] = scaled[k - left] * (k / qt)
    for k in range(mode, right):
        scaled[k + 1 - left] = scaled[k - left] * (qt / (k + 1))
    left_tail = poisson.cdf(left - 1, qt) if left > 0 else 0.0
    mass = 1.0 - left_tail - poisson.sf(right, qt)
    weights = scaled * (mass / math.fsum(scaled))
    return PoissonWindow(float(qt), left, right, weights)


def _normalize(vector: np.ndarray, label: str) -> np.ndarray:
    """Clip tiny negatives and renormalize, reporting the correction"""
    negative = float(-vector[vector < 0.0].sum()) if np.any(vector < 0.0) else 0.0
    if negative:
        vector = np.clip(vector, 0.0, None)
    total = float(vector.sum())
    if total <= 0.0:
        raise SolverError(f"Transient vector at {label} has no probability mass")
    correction = abs(1.0 - total) + negative
    if correction > 1e-12:
        logger.debug(f"Normalized transient vector at {label}: clipped {negative:.3e}, mass {total:.15f}")
    if correction > 1e-6:
        logger.warning(f"Large normalization correction {correction:.3e} at {label}")
    return vector / total


def _check_times(times: Sequence[float]) -> np.ndarray:
    grid = np.asarray(times, dtype=np.float64)
    if grid.ndim != 1:
        raise PreconditionError("times must be a flat sequence")
    if grid.size and (grid[0] < 0 or np.any(np.diff(grid) < 0)):
        raise PreconditionError("times must be sorted ascending and nonnegative")
    return grid


def transient_from(
    ctmc: Ctmc,
    start: np.ndarray,
    t: float,
    settings: Optional[SolverSettings] = None,
) -> np.ndarray:
    """Distribution at time t for a chain started in the given distribution"""
    settings = settings or SolverSettings.from_settings()
    if t < 0:
        raise PreconditionError(f"t must be >= 0, got {t}")
    start = np.asarray(start, dtype=np.float64)
    if t == 0:
        return start.copy()
    P, q = uniformize(ctmc)
    steps = _right_point(q * t, settings.eps_right)
    if steps > settings.max_steps:
        if ctmc.n_states <= settings.dense_state_limit:
            propagator = expm(ctmc.generator().toarray() * t)
            return _normalize(start @ propagator, f"t={t}")
        raise SolverError(
            f"Uniformization needs {steps} steps at t={t}; reduce E_S or the horizon"
        )
    window = poisson_terms(q * t, settings)
    PT = P.transpose().tocsr()
    v = start.copy()
    result = np.zeros_like(v)
    for i in range(window.right + 1):
        if i >= window.left:
            result += window.weights[i - window.left] * v
        if i < window.right:
            v = PT @ v
    return _normalize(result, f"t={t}")


def transient(ctmc: Ctmc, t: float, settings: Optional[SolverSettings] = None) -> np.ndarray:
    """Transient distribution pi(t) from the CTMC's initial distribution"""
    return transient_from(ctmc, ctmc.initial, t, settings)


def _block_rows(n_columns: int) -> int:
    return max(1, min(ACCUMULATION_BLOCK, BLOCK_BUDGET // max(n_columns, 1)))


def _power_sweep(
    ctmc: Ctmc,
    P: sp.csr_matrix,
    windows: List[PoissonWindow],
    projection: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Poisson-weighted sums of one power sequence, optionally projected onto reward columns"""
    n = ctmc.n_states
    width = n if projection is None else projection.shape[1]
    out = np.zeros((len(windows), width))
    initial = ctmc.initial.astype(np.float64)
    for k, w in enumerate(windows):
        if w.qt == 0.0:
            out[k] = initial if projection is None else initial @ projection

    active = [k for k, w in enumerate(windows) if w.qt > 0.0]
    if not active:
        return out
    lefts = np.array([windows[k].left for k in active])
    rights = np.array([windows[k].right for k in active])
    last = int(rights.max())
    PT = P.transpose().tocsr()

    # Iterates are buffered in blocks and folded into every window overlapping the block
    rows = _block_rows(n)
    v = initial.copy()
    block = np.empty((rows, n))
    start = 0
    while start <= last:
        stop = min(start + rows, last + 1)
        for i in range(start, stop):
            block[i - start] = v
            if i < last:
                v = PT @ v
        used = block[:stop - start] if projection is None else block[:stop - start] @ projection
        hits = np.nonzero((lefts < stop) & (rights >= start))[0]
        for h in hits:
            k = active[h]
            w = windows[k]
            lo = max(w.left, start)
            hi = min(w.right, stop - 1)
            out[k] += w.weights[lo - w.left:hi - w.left + 1] @ used[lo - start:hi - start + 1]
        start = stop
    return out


def _grid_expm_sweep(ctmc: Ctmc, grid: np.ndarray, projection: Optional[np.ndarray] = None) -> np.ndarray:
    """Step the grid with dense propagators exp(Q*dt), one per distinct spacing"""
    Q = ctmc.generator().toarray()
    propagators: Dict[float, np.ndarray] = {}
    width = ctmc.n_states if projection is None else projection.shape[1]
    out = np.zeros((grid.size, width))
    current = ctmc.initial.astype(np.float64).copy()
    previous = 0.0
    for k, t in enumerate(grid):
        dt = float(t - previous)
        if dt > 0.0:
            key = float(f"{dt:.12g}")
            propagator = propagators.get(key)
            if propagator is None:
                propagator = expm(Q * dt)
                propagators[key] = propagator
            current = _normalize(current @ propagator, f"t={t}")
        out[k] = current if projection is None else current @ projection
        previous = float(t)
    logger.debug(f"Grid stepping used {len(propagators)} distinct propagators")
    return out


def _plan(ctmc: Ctmc, grid: np.ndarray, settings: SolverSettings):
    """Uniformized chain and Poisson windows, or None when the horizon is too stiff"""
    P, q = uniformize(ctmc)
    steps = _right_point(q * float(grid[-1]), settings.eps_right) if grid[-1] > 0 else 0
    if steps > settings.max_steps:
        if ctmc.n_states > settings.dense_state_limit:
            raise SolverError(
                f"Horizon {grid[-1]} needs {steps} uniformization steps on "
                f"{ctmc.n_states} states; reduce E_S or the horizon"
            )
        logger.warning(
            f"Stiff horizon ({steps} uniformization steps); "
            f"stepping {grid.size} points with dense propagators"
        )
        return None, q
    windows = [poisson_terms(q * float(t), settings) for t in grid]
    logger.debug(f"Uniformization rate q={q:.6g}, {steps + 1} power iterates for {grid.size} points")
    return (P, windows), q


def transient_sweep(
    ctmc: Ctmc,
    times: Sequence[float],
    settings: Optional[SolverSettings] = None,
) -> TransientSolution:
    """Transient distributions at every point of a sorted time grid.

    A single power sequence of the uniformized chain serves all points. When
    the largest horizon needs more steps than max_steps, small chains are
    stepped with cached dense propagators instead.
    """
    settings = settings or SolverSettings.from_settings()
    grid = _check_times(times)
    if grid.size == 0:
        return TransientSolution(ctmc, grid, np.zeros((0, ctmc.n_states)))

    plan, q = _plan(ctmc, grid, settings)
    if plan is None:
        return TransientSolution(ctmc, grid, _grid_expm_sweep(ctmc, grid), method="grid-expm", rate=q)
    P, windows = plan
    raw = _power_sweep(ctmc, P, windows)
    distributions = np.empty_like(raw)
    for k, t in enumerate(grid):
        distributions[k] = raw[k] if windows[k].qt == 0.0 else _normalize(raw[k], f"t={t}")
    return TransientSolution(ctmc, grid, distributions, method="uniformization", rate=q)


def reward_instant(solution: TransientSolution, reward: RewardVariable) -> List[Tuple[float, float]]:
    """Expected instantaneous reward at each solved time point"""
    values = solution.distributions @ reward.vector(solution.ctmc)
    return [(float(t), float(v)) for t, v in zip(solution.times, values)]


@dataclass
class RewardCurves:
    """Reward values over a time grid, without the underlying distributions"""
    times: np.ndarray
    values: Dict[str, np.ndarray]
    method: str

    def pairs(self, name: str) -> List[Tuple[float, float]]:
        return [(float(t), float(v)) for t, v in zip(self.times, self.values[name])]


def reward_sweep(
    ctmc: Ctmc,
    times: Sequence[float],
    rewards: Sequence[RewardVariable],
    settings: Optional[SolverSettings] = None,
) -> RewardCurves:
    """Same numbers as transient_sweep followed by reward_instant, in memory
    proportional to the number of rewards rather than the number of states."""
    settings = settings or SolverSettings.from_settings()
    grid = _check_times(times)
    # Last column carries the probability mass used for renormalization
    projection = np.column_stack([r.vector(ctmc) for r in rewards] + [np.ones(ctmc.n_states)])
    if grid.size == 0:
        return RewardCurves(grid, {r.name: np.zeros(0) for r in rewards}, "uniformization")

    plan, _ = _plan(ctmc, grid, settings)
    if plan is None:
        projected = _grid_expm_sweep(ctmc, grid, projection)
        method = "grid-expm"
    else:
        P, windows = plan
        projected = _power_sweep(ctmc, P, windows, projection)
        method = "uniformization"
    mass = projected[:, -1]
    if np.any(mass <= 0.0):
        raise SolverError("Transient distribution lost its probability mass")
    deviation = float(np.max(np.abs(mass - 1.0)))
    if deviation > 1e-12:
        logger.debug(f"Renormalized reward curves, largest mass deviation {deviation:.3e}")
    values = {r.name: projected[:, c] / mass for c, r in enumerate(rewards)}
    return RewardCurves(grid, values, method)


def mean_from_cdf(times: Sequence[float], values: Sequence[float]) -> float:
    """Mean of a nonnegative variable from its CDF sampled on [0, horizon]"""
    grid = np.asarray(times, dtype=np.float64)
    survival = 1.0 - np.asarray(values, dtype=np.float64)
    return float(simpson(survival, x=grid))
