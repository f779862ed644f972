"""
Parameter Presets
Named bundles of ClusterConfig values
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from loguru import logger

from api.models import ClusterConfig


@dataclass
class ParameterPreset:
    """Named set of ClusterConfig values layered over the defaults"""
    name: str
    description: str
    values: Dict[str, Any] = field(default_factory=dict)

    def config(self) -> ClusterConfig:
        return ClusterConfig.model_validate(self.values)


class PresetRegistry:
    """In-memory preset table"""

    def __init__(self):
        self._data: Dict[str, ParameterPreset] = {}
        self._initialize_presets()

    def _initialize_presets(self):
        """Register the measured parameter sets"""
        presets = [
            ParameterPreset(
                "table2",
                "Measured testbed parameters: 1 ms processing and commit, 225 ms timeouts, "
                "50 ms client timeout, 10 ms replica-leader delay, 5 ms best majority delay, "
                "6 month hardware and 1 week software MTTF, 12 h / 3 min repairs, E_S=20, R_M=10",
                {},
            ),
            ParameterPreset(
                "table2-watchdog",
                "table2 with the watchdog agent: bundle repair 182.9 ms, process repair 26.9 s",
                {"watchdog": True},
            ),
            ParameterPreset(
                "fault-free",
                "table2 with every failure and injection rate set to 0",
                {
                    "lambda_F_H_per_month": 0.0,
                    "lambda_F_S_per_week": 0.0,
                    "lambda_F_Si_per_ms": 0.0,
                    "lambda_d_per_hour": 0.0,
                },
            ),
        ]
        for preset in presets:
            self._data[preset.name] = preset

        logger.debug(f"Initialized preset registry with {len(self._data)} presets")

    def get(self, name: str) -> Optional[ParameterPreset]:
        return self._data.get(name)

    def config(self, name: str) -> ClusterConfig:
        """ClusterConfig of a preset; unknown names raise KeyError"""
        preset = self._data.get(name)
        if preset is None:
            raise KeyError(f"Unknown preset '{name}'. Available: {self.names()}")
        return preset.config()

    def names(self) -> List[str]:
        return list(self._data)


# Global registry instance
preset_registry = PresetRegistry()


def get_preset_registry() -> PresetRegistry:
    """Get preset registry instance"""
    return preset_registry
