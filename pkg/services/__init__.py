"""
Services Package
Cluster models, analysis and studies
"""

from .performability import PerformabilityService
from .study_runner import StudyRunnerService

__all__ = [
    "PerformabilityService",
    "StudyRunnerService",
]
