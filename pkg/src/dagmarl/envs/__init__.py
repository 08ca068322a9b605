"""Simulation environments, one agent per task-DAG node."""

from .base import DagEnv, EnvSnapshot, InvalidAction, VersionMismatch, snapshots_equal
from .factory import FactoryEnv
from .logistics import LogisticsEnv
from .micro import MicroDagEnv
from .prey import PreyEnv

ENV_NAMES = ("factory", "logistics", "prey", "micro")


def make_env(name: str, options: dict | None = None) -> DagEnv:
    """Builds a named environment; unknown names or option keys fail loudly."""
    from ..config import ConfigError

    options = dict(options or {})
    builders = {
        "factory": FactoryEnv,
        "logistics": LogisticsEnv,
        "prey": PreyEnv,
        "micro": MicroDagEnv.from_options,
    }
    if name not in builders:
        raise ConfigError(f"unknown environment {name!r}; pick from {ENV_NAMES}")
    try:
        return builders[name](**options)
    except TypeError as err:
        raise ConfigError(f"bad options for environment {name!r}: {err}") from None


__all__ = [
    "DagEnv",
    "EnvSnapshot",
    "InvalidAction",
    "VersionMismatch",
    "snapshots_equal",
    "FactoryEnv",
    "LogisticsEnv",
    "PreyEnv",
    "MicroDagEnv",
    "make_env",
    "ENV_NAMES",
]
