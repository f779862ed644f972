"""
API Models and Data Structures
Cluster parameters, study requests and result tables
"""

import math
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

MS_PER_SECOND = 1_000.0
MS_PER_MINUTE = 60.0 * MS_PER_SECOND
MS_PER_HOUR = 60.0 * MS_PER_MINUTE
MS_PER_WEEK = 168.0 * MS_PER_HOUR
MS_PER_MONTH = 730.0 * MS_PER_HOUR


class ModelMode(str, Enum):
    """Which dynamics the composed model carries"""
    RESPONSE = "response"
    AVAILABILITY = "availability"


class InjectionMix(str, Enum):
    """Failure causes drawn by the injection chain"""
    MIXED = "mixed"
    HARDWARE = "hardware"
    PROCESS = "process"
    BUNDLE = "bundle"


class FailureCause(str, Enum):
    """Why a controller went down"""
    HARDWARE = "Hardware"
    PROCESS = "Process"
    BUNDLE = "Bundle"


class OutputFormat(str, Enum):
    """Result file formats"""
    CSV = "csv"
    JSON = "json"


class StudyId(str, Enum):
    """Predefined studies"""
    S1 = "S1-cdf-by-cluster-size"
    S2 = "S2-correlated-failures"
    S3 = "S3-watchdog-response"
    S4 = "S4-unavailability-1000h"
    S5 = "S5-statespace-report"
    S6 = "S6-oracle-crosscheck"
    S7 = "S7-erlang-accuracy"
    S8 = "S8-zero-failure-baseline"


class ClusterConfig(BaseModel):
    """Parameters of the controller cluster models.

    Defaults are the table2 preset. Times are in milliseconds; rates carry
    their unit in the field name and are converted to per-ms by the
    properties below.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", use_enum_values=False)

    C: int = Field(default=3, description="Number of controllers (odd, >= 3)")
    N_F: int = Field(default=1, description="Injected failures (response) or max concurrent failures (availability)")
    watchdog: bool = Field(default=False, description="Watchdog agent restarts failed bundles/processes")
    mode: ModelMode = Field(default=ModelMode.RESPONSE, description="Response-time or availability dynamics")
    injection_mix: InjectionMix = Field(default=InjectionMix.MIXED, description="Causes drawn by injected failures")

    T_A_ms: float = Field(default=1.0, gt=0, description="Mean application processing time (exponential)")
    T_C_ms: float = Field(default=1.0, gt=0, description="Commit delay")
    T_CL_ms: float = Field(default=50.0, gt=0, description="Client timeout")
    T_R_ms: float = Field(default=10.0, gt=0, description="Worst-case replica-leader delay")
    T_M_best_ms: float = Field(default=5.0, gt=0, description="Leader to majority delay with all followers up")
    T_CR_ms: float = Field(default=1.0, gt=0, description="Client to replica delay")
    mean_follower_timeout_ms: float = Field(default=225.0, gt=0, description="1/lambda_f")
    mean_candidate_timeout_ms: float = Field(default=225.0, gt=0, description="1/lambda_ca")

    lambda_F_H_per_month: float = Field(default=1.0 / 6.0, ge=0, description="Hardware failure rate per node")
    lambda_F_S_per_week: float = Field(default=1.0, ge=0, description="Software failure rate per node and cause")
    lambda_F_Si_per_ms: Optional[float] = Field(default=None, ge=0, description="Injection rate; N_F/30 when unset")
    lambda_R_H_per_hour: float = Field(default=1.0 / 12.0, ge=0, description="Hardware repair rate")
    lambda_R_S_per_minute: float = Field(default=1.0 / 3.0, ge=0, description="Software repair rate without watchdog")
    lambda_R_Sbw_per_ms: float = Field(default=1.0 / 182.9, ge=0, description="Bundle repair rate with watchdog")
    lambda_R_Spw_per_s: float = Field(default=1.0 / 26.9, ge=0, description="Process repair rate with watchdog")
    lambda_d_per_hour: float = Field(default=0.0, ge=0, description="Critical data-plane failure rate")

    E_S: int = Field(default=20, ge=1, description="Erlang stages per deterministic delay")
    R_M: int = Field(default=10, ge=0, description="Max inconsistent RAFT terms of a lagging follower")

    @field_validator("C")
    @classmethod
    def validate_cluster_size(cls, v: int) -> int:
        if v < 3 or v % 2 == 0:
            raise ValueError(f"C must be odd and >= 3, got {v}")
        return v

    @model_validator(mode="after")
    def validate_consistency(self):
        if not 1 <= self.N_F <= self.C:
            raise ValueError(f"N_F must lie in [1, C={self.C}], got {self.N_F}")
        if not math.isclose(self.T_R_ms, 2.0 * self.T_M_best_ms, rel_tol=1e-12):
            raise ValueError(
                f"T_R_ms ({self.T_R_ms}) must equal 2*T_M_best_ms ({2.0 * self.T_M_best_ms})"
            )
        return self

    # Derived quantities, all per millisecond
    @property
    def majority_followers(self) -> int:
        return self.C // 2

    @property
    def T_M_worst_ms(self) -> float:
        return self.T_R_ms

    @property
    def lambda_f(self) -> float:
        return 1.0 / self.mean_follower_timeout_ms

    @property
    def lambda_ca(self) -> float:
        return 1.0 / self.mean_candidate_timeout_ms

    @property
    def lambda_F_H(self) -> float:
        return self.lambda_F_H_per_month / MS_PER_MONTH

    @property
    def lambda_F_S(self) -> float:
        return self.lambda_F_S_per_week / MS_PER_WEEK

    @property
    def lambda_F_Si(self) -> float:
        if self.lambda_F_Si_per_ms is not None:
            return self.lambda_F_Si_per_ms
        return self.N_F / 30.0

    @property
    def lambda_R_H(self) -> float:
        return self.lambda_R_H_per_hour / MS_PER_HOUR

    @property
    def lambda_R_S(self) -> float:
        return self.lambda_R_S_per_minute / MS_PER_MINUTE

    @property
    def lambda_R_Sbw(self) -> float:
        return self.lambda_R_Sbw_per_ms

    @property
    def lambda_R_Spw(self) -> float:
        return self.lambda_R_Spw_per_s / MS_PER_SECOND

    @property
    def lambda_d(self) -> float:
        return self.lambda_d_per_hour / MS_PER_HOUR

    def with_overrides(self, **overrides: Any) -> "ClusterConfig":
        """Validated copy with some fields replaced"""
        return ClusterConfig.model_validate({**self.model_dump(), **overrides})

    def echo(self) -> Dict[str, Any]:
        """Flat key -> plain value mapping in declaration order"""
        return self.model_dump(mode="json")


class StudySpec(BaseModel):
    """One study invocation"""
    id: StudyId
    config: ClusterConfig = Field(default_factory=ClusterConfig)
    config_overrides: Dict[str, Any] = Field(default_factory=dict)
    output_path: Optional[str] = None
    seed: Optional[int] = Field(default=None, ge=0)
    eps: Optional[float] = Field(default=None, gt=0, lt=1)
    max_states: Optional[int] = Field(default=None, gt=0)
    runs: Optional[int] = Field(default=None, ge=2)

    @field_validator("config_overrides")
    @classmethod
    def validate_override_keys(cls, v: Dict[str, Any]) -> Dict[str, Any]:
        unknown = sorted(set(v) - set(ClusterConfig.model_fields))
        if unknown:
            raise ValueError(f"Unknown ClusterConfig keys: {unknown}")
        return v

    def effective_config(self) -> ClusterConfig:
        if not self.config_overrides:
            return self.config
        return self.config.with_overrides(**self.config_overrides)


class ResultTable(BaseModel):
    """Rectangular numeric table with a metadata block"""
    columns: List[str]
    rows: List[List[float]]
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def validate_shape(self):
        if not self.columns:
            raise ValueError("A result table needs at least one column")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError(f"Duplicate column names: {self.columns}")
        width = len(self.columns)
        for index, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"Row {index} has {len(row)} cells, expected {width}")
        return self

    def column(self, name: str) -> List[float]:
        position = self.columns.index(name)
        return [row[position] for row in self.rows]
