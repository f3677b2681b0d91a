"""
DCWS - Runtime Settings and Config Files
"""

from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Type

from dotenv import dotenv_values
from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from dcws.errors import DataFileError

# Package paths
PACKAGE_DIR = Path(__file__).parent
DEFAULT_OUTPUT_DIR = Path("runs") / "latest"


# ============================================================================
# SETTINGS
# ============================================================================

class Settings(BaseSettings):
    """Process-wide settings read from DCWS_* environment variables and .env"""

    model_config = SettingsConfigDict(env_prefix="DCWS_", env_file=".env", extra="ignore")

    log_level: str = Field("INFO", description="Root logger level")
    training_log: Optional[Path] = Field(None, description="Per-epoch TSV log file; stdout when unset")
    output_dir: Path = Field(DEFAULT_OUTPUT_DIR, description="Default output directory")
    workers: int = Field(1, ge=1, description="Worker processes for trials and ablation arms")


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get the shared settings instance"""
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reset_settings() -> None:
    """Drop the cached settings so the next call re-reads the environment"""
    global _settings
    _settings = None


# ============================================================================
# CONFIG FILES
# ============================================================================

def read_config_file(path: Path) -> Dict[str, str]:
    """Read a flat key=value config file"""
    path = Path(path)
    if not path.is_file():
        raise DataFileError(f"Config file not found: {path}")
    values = dotenv_values(path)
    missing = [key for key, value in values.items() if value is None]
    if missing:
        raise DataFileError(f"Config keys without a value in {path}: {', '.join(missing)}")
    return {key: value for key, value in values.items()}


def route_overrides(
    values: Mapping[str, Any],
    targets: Mapping[str, Type[BaseModel]],
) -> Dict[str, Dict[str, Any]]:
    """
    Split flat config values by the model that declares each key.

    A key declared by several targets (e.g. seed) is routed to all of them.
    Unknown keys are rejected.
    """
    routed: Dict[str, Dict[str, Any]] = {name: {} for name in targets}
    unknown = []
    for key, value in values.items():
        owners = [name for name, model in targets.items() if key in model.model_fields]
        if not owners:
            unknown.append(key)
            continue
        for name in owners:
            routed[name][key] = value
    if unknown:
        raise ValueError(f"Unknown config keys: {', '.join(sorted(unknown))}")
    return routed


def load_overrides(path: Path, targets: Mapping[str, Type[BaseModel]]) -> Dict[str, Dict[str, Any]]:
    """Read a config file and route its keys to the target models"""
    return route_overrides(read_config_file(path), targets)
