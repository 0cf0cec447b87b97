"""
settings_manager.py - The Front Desk of the Interchange Workshop

This module houses the SettingsManager, which gathers the settings of one
experiment run from four places and hands back a validated ExperimentConfig.
From lowest to highest precedence: built-in defaults, environment variables
(optionally loaded from a .env file), a YAML config file, command-line flags.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from interchange_workshop.errors import ConfigError
from interchange_workshop.specs.data_models import ExperimentConfig

logger = logging.getLogger(__name__)

ENV_PREFIX = "INTERCHANGE_"
ENV_KEYS = {"threads": int, "seed": int, "out": str}
DEFAULT_LOG_LEVEL = "INFO"


class SettingsManager:
    """Merges defaults, environment, config file and flags into an ExperimentConfig."""

    def __init__(self, load_env_file: bool = True):
        if load_env_file:
            load_dotenv()
        self.environment: Dict[str, Any] = {}
        for key, cast in ENV_KEYS.items():
            raw = os.getenv(f"{ENV_PREFIX}{key.upper()}")
            if raw is None or raw == "":
                continue
            try:
                self.environment[key] = cast(raw)
            except ValueError:
                raise ConfigError(
                    f"environment variable {ENV_PREFIX}{key.upper()}={raw!r} is not a valid {cast.__name__}",
                    "settings",
                )

    @staticmethod
    def log_level() -> str:
        return os.getenv(f"{ENV_PREFIX}LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()

    @staticmethod
    def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
        """Key-value YAML mapping; hyphenated keys are accepted as underscores."""
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as handle:
                loaded = yaml.safe_load(handle)
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}", "settings")
        except yaml.YAMLError as e:
            raise ConfigError(f"config file {path} is not valid YAML: {e}", "settings")
        if loaded is None:
            return {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must hold a mapping at the top level", "settings")
        return {str(key).replace("-", "_"): value for key, value in loaded.items()}

    def build(
        self,
        command: str,
        flags: Optional[Mapping[str, Any]] = None,
        config_path: Optional[Union[str, Path]] = None,
    ) -> ExperimentConfig:
        """Layered settings for one run; flags left at None do not override."""
        merged: Dict[str, Any] = dict(self.environment)
        if config_path is not None:
            from_file = self.read_config_file(config_path)
            from_file.pop("command", None)
            merged.update(from_file)
        for key, value in (flags or {}).items():
            if value is None:
                continue
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                value = {**merged[key], **value}
            merged[key] = value
        merged["command"] = command
        try:
            config = ExperimentConfig.model_validate(merged)
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(part) for part in error['loc']) or 'config'}: {error['msg']}"
                for error in e.errors()
            )
            logger.error(f"Settings: configuration rejected: {problems}")
            raise ConfigError(problems, "settings") from e
        logger.debug(f"Settings: resolved {command} configuration with seed {config.seed}")
        return config
