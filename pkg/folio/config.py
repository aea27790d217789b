import logging
import os

from dotenv import dotenv_values
from dotenv import find_dotenv
from dotenv import load_dotenv

from .errors import ConfigError

__all__ = ["RUN_CONFIG_KEYS", "Configuration", "env_flag", "normalize_key"]

logger = logging.getLogger(__name__)

_FALSY = {"", "0", "false", "no", "off"}

# Long flag names accepted in a run-config file, in canonical (underscore) form.
RUN_CONFIG_KEYS = (
    "algorithm",
    "market",
    "n",
    "T",
    "r_min",
    "r_min_policy",
    "delta",
    "cost",
    "eta",
    "s",
    "noise",
    "seed",
    "replications",
    "out",
    "format",
    "verbose",
)


def env_flag(name: str) -> bool:
    """Return True unless the variable is unset or one of the usual falsy spellings."""
    value = os.getenv(name)
    if value is None:
        return False
    return value.strip().lower() not in _FALSY


def normalize_key(key: str) -> str:
    """Map ``--r-min``, ``r-min``, ``R_MIN`` etc. onto the canonical key ``r_min``."""
    cleaned = key.strip().lstrip("-").replace("-", "_")
    for canonical in RUN_CONFIG_KEYS:
        if cleaned.lower() == canonical.lower():
            return canonical
    raise ConfigError(f"unknown config key: {key!r}")


class Configuration:
    """Environment-level settings for the folio CLI."""

    def __init__(self) -> None:
        """Initialize configuration with environment variables."""
        self.load_env()
        self.log_level = os.getenv("FOLIO_LOG_LEVEL", "INFO").upper()
        self.verbose_log = env_flag("FOLIO_VERBOSE_LOG")
        self.offline_tol = self._float_env("FOLIO_OFFLINE_TOL", 1e-8)
        self.offline_max_iter = int(self._float_env("FOLIO_OFFLINE_MAX_ITER", 100_000))

    @staticmethod
    def load_env() -> None:
        """Load environment variables from .env file."""
        load_dotenv(find_dotenv())

    @staticmethod
    def _float_env(name: str, default: float) -> float:
        raw = os.getenv(name)
        if raw is None or not raw.strip():
            return default
        try:
            return float(raw)
        except ValueError as e:
            raise ConfigError(f"{name} must be numeric, got {raw!r}") from e

    @staticmethod
    def load_config(file_path: str) -> dict[str, str]:
        """Load a flat ``key=value`` run-config file.

        Returns an empty mapping when the file does not exist, so a run can
        proceed on flags alone.

        Args:
            file_path: Path to the key=value file.

        Returns:
            Dict from canonical key to its raw string value.

        Raises:
            ConfigError: If the file names a key that is not a run option.
        """
        if not os.path.exists(file_path):
            logger.warning("Config file %s not found, using flags and defaults only", file_path)
            return {}
        values = dotenv_values(file_path)
        return {normalize_key(key): value for key, value in values.items() if value is not None}
