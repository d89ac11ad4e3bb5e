"""
Configuration management for consensus-halt.

Handles environment variables and runner defaults.
"""

import os
import sys
from typing import Optional
from dataclasses import dataclass
from functools import lru_cache
import logging

logger = logging.getLogger(__name__)

LOG_LEVELS = ("debug", "info", "warning")


def _env_int(name: str, default: int, minimum: int = 1) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}") from None
    if value < minimum:
        raise ValueError(f"{name} must be at least {minimum}, got {value}")
    return value


@dataclass
class LoggingConfig:
    """Verbosity of the stderr log stream."""
    level: str = "warning"

    @classmethod
    def from_env(cls) -> "LoggingConfig":
        level = os.getenv("CONSENSUS_HALT_LOG", "warning").strip().lower()
        if level not in LOG_LEVELS:
            raise ValueError(f"CONSENSUS_HALT_LOG must be one of {LOG_LEVELS}, got {level!r}")
        return cls(level=level)


@dataclass
class RunnerConfig:
    """Defaults for simulation runs."""
    max_steps: int = 100000
    workers: int = 1
    k_max: int = 100000

    @classmethod
    def from_env(cls) -> "RunnerConfig":
        return cls(
            max_steps=_env_int("CONSENSUS_HALT_MAX_STEPS", 100000),
            workers=_env_int("CONSENSUS_HALT_WORKERS", 1),
            k_max=_env_int("CONSENSUS_HALT_KMAX", 100000),
        )


@dataclass
class AppConfig:
    """Main application configuration."""
    logging: LoggingConfig
    runner: RunnerConfig

    @classmethod
    def from_env(cls) -> "AppConfig":
        """Load full application configuration from environment."""
        return cls(logging=LoggingConfig.from_env(), runner=RunnerConfig.from_env())


@lru_cache()
def get_config() -> AppConfig:
    """Get cached application configuration."""
    return AppConfig.from_env()


def configure_logging(config: Optional[AppConfig] = None):
    """Send package logs to stderr; stdout is reserved for results."""
    if config is None:
        config = get_config()

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s"))
    root = logging.getLogger("src")
    root.handlers[:] = [handler]
    root.setLevel(getattr(logging, config.logging.level.upper()))
    root.propagate = False


# Environment variable documentation
ENV_VARS = """
# Logging
CONSENSUS_HALT_LOG=warning        # debug | info | warning

# Runner defaults
CONSENSUS_HALT_MAX_STEPS=100000   # slots before a run gives up
CONSENSUS_HALT_WORKERS=1          # eps levels simulated in parallel
CONSENSUS_HALT_KMAX=100000        # horizon of the consensus-time oracle
"""
