"""
Performability Service
Compiles composed cluster models to CTMCs and evaluates the response-time
CDF and the unavailability curve on time grids.
"""

import threading
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from api.models import ClusterConfig, ModelMode
from core.config import get_settings
from core.ctmc_solver import SolverSettings, mean_from_cdf, reward_sweep
from core.logging import get_logger
from core.san import SanModel, validate
from core.state_space import Ctmc, ExplorationLimits, expand_erlang, generate
from services.raft_models import cluster_available, compose, event_completed

logger = get_logger()


@dataclass
class CompiledModel:
    """A composed model together with its CTMC"""
    config: ClusterConfig
    model: SanModel
    expanded: SanModel
    ctmc: Ctmc
    generation_s: float


@dataclass
class Curve:
    """Reward curve with the solution method that produced it"""
    points: List[Tuple[float, float]]
    method: str
    solve_s: float


class PerformabilityService:
    """Service turning cluster configurations into transient measures"""

    def __init__(self, solver_settings: Optional[SolverSettings] = None, limits: Optional[ExplorationLimits] = None):
        """Initialize the service with solver tolerances and exploration limits"""
        self.settings = get_settings()
        self.solver_settings = solver_settings or SolverSettings.from_settings()
        self.limits = limits or ExplorationLimits.from_settings()
        self._compiled: Dict[ClusterConfig, CompiledModel] = {}
        self._lock = threading.Lock()
        logger.debug("Performability Service initialized")

    def compile(self, cfg: ClusterConfig) -> CompiledModel:
        """
        Compose, validate, Erlang-expand and generate the CTMC of a configuration

        Args:
            cfg: Cluster configuration

        Returns:
            CompiledModel, cached per configuration
        """
        with self._lock:
            cached = self._compiled.get(cfg)
        if cached is not None:
            return cached

        started = time.perf_counter()
        model = compose(cfg)
        validate(model).raise_for_findings()
        expanded = expand_erlang(model, cfg.E_S)
        ctmc = generate(expanded, self.limits)
        compiled = CompiledModel(cfg, model, expanded, ctmc, time.perf_counter() - started)
        logger.info(
            f"Compiled {model.name} (E_S={cfg.E_S}, N_F={cfg.N_F}, watchdog={cfg.watchdog}): "
            f"{ctmc.n_states} states in {compiled.generation_s:.2f}s"
        )
        with self._lock:
            self._compiled.setdefault(cfg, compiled)
        return compiled

    def compiled_models(self) -> List[CompiledModel]:
        """Compiled models in compilation order"""
        with self._lock:
            return list(self._compiled.values())

    def response_time_curve(self, cfg: ClusterConfig, times: Sequence[float]) -> Curve:
        """Probability that the client event has been handled by each time (ms)"""
        if cfg.mode is not ModelMode.RESPONSE:
            cfg = cfg.with_overrides(mode=ModelMode.RESPONSE)
        compiled = self.compile(cfg)
        started = time.perf_counter()
        reward = event_completed()
        curves = reward_sweep(compiled.ctmc, times, [reward], self.solver_settings)
        values = np.clip(curves.values[reward.name], 0.0, 1.0)
        points = [(float(t), float(p)) for t, p in zip(curves.times, values)]
        return Curve(points, curves.method, time.perf_counter() - started)

    def unavailability(self, cfg: ClusterConfig, times: Sequence[float]) -> Curve:
        """Probability that the cluster lacks a leader or a follower majority at each time (ms)"""
        if cfg.mode is not ModelMode.AVAILABILITY:
            cfg = cfg.with_overrides(mode=ModelMode.AVAILABILITY)
        compiled = self.compile(cfg)
        started = time.perf_counter()
        reward = cluster_available(cfg)
        curves = reward_sweep(compiled.ctmc, times, [reward], self.solver_settings)
        values = np.clip(1.0 - curves.values[reward.name], 0.0, 1.0)
        points = [(float(t), float(p)) for t, p in zip(curves.times, values)]
        return Curve(points, curves.method, time.perf_counter() - started)

    def response_time_cdf(self, cfg: ClusterConfig, times: Sequence[float]) -> List[Tuple[float, float]]:
        return self.response_time_curve(cfg, times).points

    def unavailability_curve(self, cfg: ClusterConfig, times: Sequence[float]) -> List[Tuple[float, float]]:
        return self.unavailability(cfg, times).points

    def mean_completion_time(self, cfg: ClusterConfig, horizon_ms: float = 200.0, step_ms: float = 0.25) -> float:
        """Mean time (ms) to handle the event, integrating 1 - CDF up to the horizon"""
        grid = np.arange(0.0, horizon_ms + step_ms / 2, step_ms)
        points = self.response_time_cdf(cfg, grid)
        tail = 1.0 - points[-1][1]
        if tail > 1e-6:
            logger.warning(f"CDF reaches only {points[-1][1]:.6f} by {horizon_ms} ms; mean is truncated")
        return mean_from_cdf(grid, [p for _, p in points])


# Global service instance
performability_service: Optional[PerformabilityService] = None


def get_performability_service() -> PerformabilityService:
    """Get the shared performability service, creating it on first use"""
    global performability_service
    if performability_service is None:
        performability_service = PerformabilityService()
    return performability_service


def response_time_cdf(cfg: ClusterConfig, times: Sequence[float]) -> List[Tuple[float, float]]:
    """P(event handled by t) for every t of a sorted ms grid"""
    return get_performability_service().response_time_cdf(cfg, times)


def unavailability_curve(cfg: ClusterConfig, times: Sequence[float]) -> List[Tuple[float, float]]:
    """P_CU(t) = 1 - P(cluster available at t) for every t of a sorted ms grid"""
    return get_performability_service().unavailability_curve(cfg, times)
