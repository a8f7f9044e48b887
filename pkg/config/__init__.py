"""Configuration module."""
from .settings import (
    settings, Settings, EngineConfig, ScenarioDefaults, DsmParams, VpsConfig, SdModel, ReportConfig,
    DifficultyConfig, DSM_WELFARE, DSM_PRIVATE,
)

__all__ = [
    "settings", "Settings", "EngineConfig", "ScenarioDefaults", "DsmParams", "VpsConfig", "SdModel",
    "ReportConfig", "DifficultyConfig", "DSM_WELFARE", "DSM_PRIVATE",
]
