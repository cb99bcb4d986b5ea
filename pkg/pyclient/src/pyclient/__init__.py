"""Gym-style HTTP adapter for the gril session service."""

from .client import (
    AdapterError,
    NotFoundError,
    RemoteEnvHandle,
    SessionConflictError,
    SessionNotStartedError,
    StepResult,
    TransportError,
    run_episode,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterError",
    "NotFoundError",
    "RemoteEnvHandle",
    "SessionConflictError",
    "SessionNotStartedError",
    "StepResult",
    "TransportError",
    "run_episode",
    "__version__",
]
