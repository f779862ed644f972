"""
Study Runner Service
Predefined studies turning cluster configurations into result tables
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np

from api.models import MS_PER_HOUR, ClusterConfig, InjectionMix, ModelMode, ResultTable, StudyId, StudySpec
from core.config import get_settings
from core.ctmc_solver import SolverSettings
from core.exceptions import PreconditionError
from core.logging import get_logger
from core.state_space import ExplorationLimits
from services.config_loader import METADATA_PREFIX, config_items
from services.des_oracle import DEFAULT_CONFIDENCE, estimate_cdf, generator_description
from services.performability import Curve, PerformabilityService
from services.raft_models import Places

logger = get_logger()

T = TypeVar("T")

RESPONSE_GRID_MS = np.arange(0.0, 1001.0, 1.0)
AVAILABILITY_GRID_H = np.arange(0.0, 1001.0, 1.0)
ORACLE_TIMES_MS = (50.0, 200.0, 500.0, 1000.0)
CLUSTER_SIZES = (3, 5, 7)
# (C, E_S, N_F): N_F = C//2 + 1 per cluster size, plus every node failing for C in {3, 5}
STATESPACE_POINTS = ((3, 5, 2), (3, 5, 3), (5, 5, 3), (5, 5, 5), (7, 5, 4), (5, 10, 3))
ERLANG_STAGES = (5, 10, 15, 20)
FAULT_FREE = {
    "lambda_F_H_per_month": 0.0,
    "lambda_F_S_per_week": 0.0,
    "lambda_F_Si_per_ms": 0.0,
    "lambda_d_per_hour": 0.0,
}

STUDY_CATALOGUE: Dict[StudyId, str] = {
    StudyId.S1: "Response-time CDF for C in {3,5,7}, one injected mixed failure, 0-1000 ms",
    StudyId.S2: "Response-time CDF for N_F in 1..C/2+1, mixed and bundle-only injection, watchdog on/off",
    StudyId.S3: "Response-time CDF of a 7-controller cluster for N_F in 1..4, watchdog on/off",
    StudyId.S4: "Cluster unavailability over 0-1000 h for C=3, watchdog on/off",
    StudyId.S5: "State and transition counts with generation and solve times per (C, E_S, N_F)",
    StudyId.S6: "Analytic response-time CDF against discrete-event estimates with 99% intervals",
    StudyId.S7: "Response-time CDF of a 7-controller cluster for E_S in {5,10,15,20}",
    StudyId.S8: "Response-time CDF without failures for C in {3,5,7}",
}


def is_cdf_nondecreasing(values: Sequence[float], tolerance: float = 1e-9) -> bool:
    return bool(np.all(np.diff(np.asarray(values, dtype=np.float64)) >= -tolerance))


@dataclass
class StudyOutcome:
    table: ResultTable
    configs: List[ClusterConfig]
    elapsed_s: float


class StudyRunnerService:
    """Service running the study catalogue"""

    def __init__(self, workers: Optional[int] = None):
        self.settings = get_settings()
        self.workers = max(1, workers or self.settings.study_workers)
        self.service: Optional[PerformabilityService] = None
        self._configs: List[ClusterConfig] = []
        self._methods: List[str] = []
        self._handlers: Dict[StudyId, Callable[[StudySpec, ClusterConfig], Tuple[List[str], List[List[float]], Dict[str, Any]]]] = {
            StudyId.S1: self._cdf_by_cluster_size,
            StudyId.S2: self._correlated_failures,
            StudyId.S3: self._watchdog_response,
            StudyId.S4: self._unavailability,
            StudyId.S5: self._statespace_report,
            StudyId.S6: self._oracle_crosscheck,
            StudyId.S7: self._erlang_accuracy,
            StudyId.S8: self._zero_failure_baseline,
        }
        logger.debug(f"Study Runner Service initialized with {self.workers} worker(s)")

    # -- plumbing ----------------------------------------------------------

    def _eps(self, spec: StudySpec) -> float:
        return spec.eps if spec.eps is not None else self.settings.solver_eps

    def _max_states(self, spec: StudySpec) -> int:
        return spec.max_states if spec.max_states is not None else self.settings.max_states

    def _map(self, fn: Callable[[ClusterConfig], T], configs: Sequence[ClusterConfig]) -> List[T]:
        """Evaluate configurations, possibly in parallel; results keep the input order"""
        self._configs.extend(configs)
        if self.workers == 1 or len(configs) == 1:
            return [fn(cfg) for cfg in configs]
        with ThreadPoolExecutor(max_workers=min(self.workers, len(configs))) as pool:
            return list(pool.map(fn, configs))

    def _curves(self, configs: Sequence[ClusterConfig], times: Sequence[float], availability: bool = False) -> List[Curve]:
        assert self.service is not None
        evaluate = self.service.unavailability if availability else self.service.response_time_curve
        curves = self._map(lambda cfg: evaluate(cfg, times), configs)
        self._methods.extend(curve.method for curve in curves)
        return curves

    @staticmethod
    def _columns_by_time(first: str, times: Sequence[float], named: Sequence[Tuple[str, Curve]]) -> Tuple[List[str], List[List[float]]]:
        columns = [first] + [name for name, _ in named]
        rows = [
            [float(t)] + [curve.points[i][1] for _, curve in named]
            for i, t in enumerate(times)
        ]
        return columns, rows

    def run(self, spec: StudySpec) -> StudyOutcome:
        """
        Run one study

        Args:
            spec: Study id, base configuration and solver overrides

        Returns:
            StudyOutcome with the table and the configurations evaluated, in canonical order
        """
        base = spec.effective_config()
        self.service = PerformabilityService(
            SolverSettings.from_settings(self._eps(spec)),
            ExplorationLimits(self._max_states(spec), self.settings.max_tokens_per_place),
        )
        self._configs = []
        self._methods = []

        logger.info(f"Starting study {spec.id.value}")
        started = time.perf_counter()
        columns, rows, extra = self._handlers[spec.id](spec, base)
        elapsed = time.perf_counter() - started

        metadata: Dict[str, Any] = {
            "study": spec.id.value,
            "tool": f"{self.settings.app_name} {self.settings.app_version}",
            "solver_eps": self._eps(spec),
            "max_states": self._max_states(spec),
        }
        metadata.update(extra)
        if self._methods:
            metadata["method"] = ",".join(sorted(set(self._methods)))
        for key, text in config_items(base):
            metadata[f"{METADATA_PREFIX}{key}"] = text

        table = ResultTable(columns=columns, rows=rows, metadata=metadata)
        logger.success(f"Study {spec.id.value} finished: {len(rows)} rows in {elapsed:.1f}s")
        return StudyOutcome(table, list(self._configs), elapsed)

    def run_study(self, spec: StudySpec) -> ResultTable:
        return self.run(spec).table

    def dump_ctmc(self, cfg: ClusterConfig, path: Union[str, Path]) -> None:
        """Write the CTMC of a configuration evaluated by the last study"""
        if self.service is None:
            raise PreconditionError("No study has been run")
        self.service.compile(cfg).ctmc.write_dump(path)
        logger.info(f"Wrote CTMC of {cfg.mode.value} C={cfg.C} N_F={cfg.N_F} to {path}")

    # -- studies -----------------------------------------------------------

    def _cdf_by_cluster_size(self, spec: StudySpec, base: ClusterConfig):
        configs = [
            base.with_overrides(C=c, N_F=1, injection_mix=InjectionMix.MIXED, mode=ModelMode.RESPONSE)
            for c in CLUSTER_SIZES
        ]
        curves = self._curves(configs, RESPONSE_GRID_MS)
        columns, rows = self._columns_by_time(
            "t_ms", RESPONSE_GRID_MS, [(f"P_C{cfg.C}", curve) for cfg, curve in zip(configs, curves)]
        )
        return columns, rows, {"time_unit": "ms"}

    def _correlated_failures(self, spec: StudySpec, base: ClusterConfig):
        named = []
        for mix in (InjectionMix.MIXED, InjectionMix.BUNDLE):
            for n_f in range(1, base.C // 2 + 2):
                for watchdog in (False, True):
                    named.append((
                        f"P_{mix.value}_NF{n_f}_wd{int(watchdog)}",
                        base.with_overrides(N_F=n_f, injection_mix=mix, watchdog=watchdog, mode=ModelMode.RESPONSE),
                    ))
        curves = self._curves([cfg for _, cfg in named], RESPONSE_GRID_MS)
        columns, rows = self._columns_by_time(
            "t_ms", RESPONSE_GRID_MS, [(name, curve) for (name, _), curve in zip(named, curves)]
        )
        return columns, rows, {"time_unit": "ms"}

    def _watchdog_response(self, spec: StudySpec, base: ClusterConfig):
        named = [
            (
                f"P_NF{n_f}_wd{int(watchdog)}",
                base.with_overrides(C=7, N_F=n_f, watchdog=watchdog, mode=ModelMode.RESPONSE),
            )
            for n_f in range(1, 5)
            for watchdog in (False, True)
        ]
        curves = self._curves([cfg for _, cfg in named], RESPONSE_GRID_MS)
        columns, rows = self._columns_by_time(
            "t_ms", RESPONSE_GRID_MS, [(name, curve) for (name, _), curve in zip(named, curves)]
        )
        return columns, rows, {"time_unit": "ms"}

    def _unavailability(self, spec: StudySpec, base: ClusterConfig):
        configs = [
            base.with_overrides(C=3, N_F=3, watchdog=watchdog, mode=ModelMode.AVAILABILITY)
            for watchdog in (False, True)
        ]
        times_ms = AVAILABILITY_GRID_H * MS_PER_HOUR
        curves = self._curves(configs, times_ms, availability=True)
        columns, rows = self._columns_by_time(
            "t_h", AVAILABILITY_GRID_H,
            [(f"PCU_wd{int(cfg.watchdog)}", curve) for cfg, curve in zip(configs, curves)],
        )
        return columns, rows, {"time_unit": "h"}

    def _statespace_report(self, spec: StudySpec, base: ClusterConfig):
        assert self.service is not None
        configs = [
            base.with_overrides(C=c, E_S=e_s, N_F=n_f, mode=ModelMode.RESPONSE)
            for c, e_s, n_f in STATESPACE_POINTS
        ]

        def measure(cfg: ClusterConfig) -> List[float]:
            compiled = self.service.compile(cfg)
            curve = self.service.response_time_curve(cfg, RESPONSE_GRID_MS)
            self._methods.append(curve.method)
            return [
                float(cfg.C), float(cfg.E_S), float(cfg.N_F),
                float(compiled.ctmc.n_states), float(compiled.ctmc.n_transitions),
                compiled.generation_s, curve.solve_s,
            ]

        rows = self._map(measure, configs)
        columns = ["C", "E_S", "N_F", "states", "transitions", "generation_s", "solve_s"]
        return columns, rows, {"time_unit": "s"}

    def _oracle_crosscheck(self, spec: StudySpec, base: ClusterConfig):
        assert self.service is not None
        cfg = base.with_overrides(C=3, N_F=1, injection_mix=InjectionMix.BUNDLE, mode=ModelMode.RESPONSE)
        seed = spec.seed if spec.seed is not None else self.settings.des_seed
        runs = spec.runs if spec.runs is not None else self.settings.des_runs

        curve = self._curves([cfg], ORACLE_TIMES_MS)[0]
        compiled = self.service.compile(cfg)

        def handled(m) -> bool:
            return m[Places.SEQUENCE_END] > 0

        logger.info(f"Simulating {runs} replications of the Erlang-expanded model")
        expanded = estimate_cdf(compiled.expanded, handled, ORACLE_TIMES_MS, runs, seed)
        logger.info(f"Simulating {runs} replications of the deterministic-delay model")
        exact = estimate_cdf(compiled.model, handled, ORACLE_TIMES_MS, runs, seed)

        rows = []
        for (t, analytic), (_, est), (_, est_exact) in zip(curve.points, expanded, exact):
            rows.append([
                t, analytic, est.mean, est.ci_halfwidth, 1.0 if est.contains(analytic) else 0.0,
                est_exact.mean, est_exact.ci_halfwidth,
            ])
            if not est.contains(analytic):
                logger.warning(f"Analytic value {analytic:.6f} at t={t} ms lies outside [{est.lower:.6f}, {est.upper:.6f}]")
        columns = [
            "t_ms", "analytic", "des_mean", "des_ci_halfwidth", "within_ci",
            "des_exact_mean", "des_exact_ci_halfwidth",
        ]
        extra = {
            "time_unit": "ms",
            "seed": seed,
            "runs": runs,
            "confidence": DEFAULT_CONFIDENCE,
            "generator": generator_description(),
        }
        return columns, rows, extra

    def _erlang_accuracy(self, spec: StudySpec, base: ClusterConfig):
        configs = [
            base.with_overrides(C=7, N_F=1, E_S=e_s, injection_mix=InjectionMix.MIXED, mode=ModelMode.RESPONSE)
            for e_s in ERLANG_STAGES
        ]
        curves = self._curves(configs, RESPONSE_GRID_MS)
        reference = np.array([p for _, p in curves[-1].points])
        columns = ["t_ms"] + [f"P_ES{e_s}" for e_s in ERLANG_STAGES] + [f"dev_ES{e_s}" for e_s in ERLANG_STAGES[:-1]]
        values = [np.array([p for _, p in curve.points]) for curve in curves]
        deviations = [v - reference for v in values[:-1]]
        rows = [
            [float(t)] + [float(v[i]) for v in values] + [float(d[i]) for d in deviations]
            for i, t in enumerate(RESPONSE_GRID_MS)
        ]
        return columns, rows, {"time_unit": "ms"}

    def _zero_failure_baseline(self, spec: StudySpec, base: ClusterConfig):
        configs = [base.with_overrides(C=c, mode=ModelMode.RESPONSE, **FAULT_FREE) for c in CLUSTER_SIZES]
        curves = self._curves(configs, RESPONSE_GRID_MS)
        columns, rows = self._columns_by_time(
            "t_ms", RESPONSE_GRID_MS, [(f"P_C{cfg.C}", curve) for cfg, curve in zip(configs, curves)]
        )
        return columns, rows, {"time_unit": "ms"}


# Global service instance
study_runner_service: Optional[StudyRunnerService] = None


def get_study_runner_service() -> StudyRunnerService:
    """Get the shared study runner, creating it on first use"""
    global study_runner_service
    if study_runner_service is None:
        study_runner_service = StudyRunnerService()
    return study_runner_service


def run_study(spec: StudySpec) -> ResultTable:
    """Run a predefined study and return its table"""
    return get_study_runner_service().run_study(spec)
