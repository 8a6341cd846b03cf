"""Persistent config - qpac.yaml"""

import logging
import types
from dataclasses import asdict, dataclass
from io import StringIO
from pathlib import Path
from typing import Any, Final, Optional

import dacite
from ruamel.yaml import YAML

from . import types as qtypes

LOG = logging.getLogger(__name__)

##
# Global defines

DEFAULT_QPAC_DIR: Final[Path] = Path("~/.qpac/").expanduser()
CONFIG_FILENAME: Final[str] = "qpac.yaml"
CONFIG_VERSION: Final[int] = 1


@dataclass
class Settings:
    """Tunables shared by the CLI. Library calls take the same values as keyword
    arguments, so these only matter when running through qpac_cmd."""

    config_version: int = CONFIG_VERSION
    oracle_cap: int = qtypes.DEFAULT_ORACLE_CAP
    exhaustive_cap: int = qtypes.DEFAULT_EXHAUSTIVE_CAP
    value_tolerance: float = qtypes.DEFAULT_VALUE_TOLERANCE
    schmidt_cutoff: float = qtypes.DEFAULT_SCHMIDT_CUTOFF
    lambda_budget_factor: int = qtypes.DEFAULT_LAMBDA_BUDGET_FACTOR
    occam_c: float = qtypes.DEFAULT_OCCAM_C
    anthony_k: float = qtypes.DEFAULT_ANTHONY_K
    shot_snap_threshold: float = qtypes.DEFAULT_SHOT_SNAP_THRESHOLD
    feasibility_tolerance: float = qtypes.DEFAULT_FEASIBILITY_TOLERANCE
    pivot_tolerance: float = qtypes.DEFAULT_PIVOT_TOLERANCE

    @classmethod
    def from_dict(cls, config_dict: dict[str, Any]) -> Optional["Settings"]:
        try:
            rv = dacite.from_dict(
                data_class=cls, data=config_dict, config=dacite.Config(strict=True)
            )
        except Exception as e:
            # This means the dict doesn't match Settings
            LOG.error(f"Failed to parse config file: {e}")
            return None
        return rv

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


class ConfigManager:
    def __init__(self, qpac_dir: Path | str = DEFAULT_QPAC_DIR, save: bool = False) -> None:
        """Set save to true to save automatically on exiting"""
        self.save_on_exit = save
        qpac_dir = Path(qpac_dir).expanduser()
        self.config_file = qpac_dir / CONFIG_FILENAME
        self.yaml = YAML(typ="rt")
        self.settings: Settings = Settings()

    def load(self) -> None:
        if self.config_file.exists():
            with open(self.config_file) as f:
                # load() returns None if the file has no data.
                cfg_dict = self.yaml.load(f) or {}
                self.settings = Settings.from_dict(dict(cfg_dict)) or Settings()
        else:
            self.settings = Settings()

    def pformat(self) -> str:
        """Pretty print the settings"""
        string_stream = StringIO()
        self.yaml.dump(self.settings.to_dict(), string_stream)
        return string_stream.getvalue()

    def save(self) -> None:
        self.config_file.parent.mkdir(parents=True, exist_ok=True)
        with open(self.config_file, "w") as f:
            self.yaml.dump(self.settings.to_dict(), f)

    def __enter__(self) -> "ConfigManager":
        self.load()
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_value: BaseException | None,
        traceback: types.TracebackType | None,
    ) -> bool | None:
        if exc_type is None:
            # Clean exit
            if self.save_on_exit:
                self.save()
        return None
