"""
Utility modules for Calendar Arena.
"""
from .data_loader import ArenaDataLoader, ScenarioGrid, SuiteConfig
__all__ = ["ArenaDataLoader", "ScenarioGrid", "SuiteConfig"]
