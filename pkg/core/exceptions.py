"""
Error hierarchy shared by the engine, the model builders and the CLI
"""

from typing import Optional


class RaftPerfError(Exception):
    """Base class of every error raised by the toolkit"""


class ModelIntegrityError(RaftPerfError):
    """Structural or semantic defect of a SAN (dangling reference, bad probability, token bound)"""


class ModelConstructionError(ModelIntegrityError):
    """A model builder or the composer could not assemble a consistent model"""


class PreconditionError(RaftPerfError, ValueError):
    """An operation was called outside its precondition"""


class VanishingLoopError(ModelIntegrityError):
    """Instantaneous activities cycle without reaching a tangible marking"""


class ExplorationAbortedError(RaftPerfError):
    """State-space exploration exceeded its limits"""

    def __init__(self, reason: str, explored: int, frontier: int):
        self.reason = reason
        self.explored = explored
        self.frontier = frontier
        super().__init__(
            f"{reason}: {explored} states explored, {frontier} still on the frontier. "
            "Reduce the Erlang stage count E_S or the injected failure count N_F."
        )


class SolverError(RaftPerfError):
    """Transient analysis cannot be carried out"""


class ConfigError(RaftPerfError):
    """Invalid configuration input"""


class ConfigParseError(ConfigError):
    """Malformed configuration file"""

    def __init__(self, message: str, line_no: Optional[int] = None, path: Optional[str] = None):
        self.line_no = line_no
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line_no is not None:
            where = f"{where}{line_no}: "
        elif where:
            where = f"{where} "
        super().__init__(f"{where}{message}")


class ConfigValidationError(ConfigError):
    """Configuration values violate a model invariant"""
