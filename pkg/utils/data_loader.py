"""
Data loading utilities for scenarios, suite configs, label banks, traces and CSV tables.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, Field, ValidationError, field_validator

from config import EngineConfig, settings
from core.errors import ConfigError, LabelBankError
from memory.trace_store import TraceFile, read_trace
from scenario.generator import CostMode, Scenario, ScenarioParams
from scenario.labels import LabelBank


class ScenarioGrid(BaseModel):
    """
    Scenario parameter grid. Fixed keys keep the generation-parameter names;
    `density`, `blocked_errand_count`, `cost_mode` and `seed` list the values
    tasks are drawn from.
    """
    seed: List[int] = Field(default_factory=lambda: list(range(45)), description="One task per seed and cost mode")
    num_agents: int = Field(default=settings.scenario.num_agents)
    num_slots: int = Field(default=settings.scenario.num_slots)
    density: List[float] = Field(default_factory=lambda: [0.6, 0.8, 1.0], description="Per-agent density choices")
    num_meetings: int = Field(default=settings.scenario.num_meetings)
    pref_level: int = Field(default=settings.scenario.pref_level)
    errand_cost_level: Optional[int] = Field(default=None)
    meeting_cost_level: int = Field(default=settings.scenario.meeting_cost_level)
    participant_lists: Optional[List[List[int]]] = Field(default=None)
    participants_per_meeting: int = Field(default=settings.scenario.participants_per_meeting)
    num_prior_meetings: int = Field(default=settings.scenario.num_prior_meetings)
    blocked_errand_count: List[int] = Field(default_factory=lambda: [2, 4, 6])
    cost_mode: List[CostMode] = Field(default_factory=lambda: [CostMode.UNIFORM, CostMode.VARIED])
    per_agent_density: bool = Field(default=True, description="Draw each agent's density; else one shared draw")

    @field_validator("seed")
    @classmethod
    def _unique_seeds(cls, seeds: List[int]) -> List[int]:
        if len(set(seeds)) != len(seeds):
            raise ValueError(f"seeds must be unique, got {seeds}")
        return seeds

    @field_validator("density", "blocked_errand_count", "cost_mode")
    @classmethod
    def _nonempty(cls, values: List[Any]) -> List[Any]:
        if not values:
            raise ValueError("grid axes must be nonempty")
        return values

    def tasks(self) -> List[ScenarioParams]:
        """
        Expand to one ScenarioParams per (cost mode, seed).

        Densities and the blocked count are drawn from each seed's own stream,
        so a task depends only on its seed.
        """
        tasks = []
        for mode in self.cost_mode:
            for seed in self.seed:
                rng = np.random.Generator(np.random.PCG64(seed))
                draws = rng.choice(self.density, size=self.num_agents if self.per_agent_density else 1)
                density: Union[float, List[float]] = (
                    [float(d) for d in draws] if self.per_agent_density else float(draws[0])
                )
                blocked = int(rng.choice(self.blocked_errand_count))
                tasks.append(ScenarioParams(
                    seed=seed, num_agents=self.num_agents, num_slots=self.num_slots, density=density,
                    num_meetings=self.num_meetings, pref_level=self.pref_level,
                    errand_cost_level=self.errand_cost_level, meeting_cost_level=self.meeting_cost_level,
                    participant_lists=self.participant_lists,
                    participants_per_meeting=self.participants_per_meeting,
                    num_prior_meetings=self.num_prior_meetings, blocked_errand_count=blocked, cost_mode=mode,
                ))
        return tasks


class SuiteConfig(BaseModel):
    """One declarative suite file: grid, lineup, engine and output directory."""
    name: str = Field(default="suite")
    grid: ScenarioGrid = Field(default_factory=ScenarioGrid)
    lineup: Union[str, List[str]] = Field(default="imap", description="Protocol for every seat, or one per seat")
    engine: EngineConfig = Field(default_factory=lambda: settings.engine.model_copy())
    output_dir: Optional[Path] = Field(default=None, description="Defaults to <output_root>/<name>")
    sweep_privacy_weight: List[float] = Field(default_factory=lambda: [0.0, 1.0, 10.0])
    sweep_max_offer: List[int] = Field(default_factory=lambda: [12])

    def resolved_output_dir(self, output_root: Optional[Path] = None) -> Path:
        if self.output_dir is not None:
            return Path(self.output_dir)
        return Path(output_root or settings.output_root) / self.name


class ArenaDataLoader:
    """
    Loader for everything the benchmark keeps on disk.
    Scenarios, suite configs and label banks are JSON; reports are CSV.
    """

    def __init__(self, data_dir: Optional[Path] = None):
        self.data_dir = Path(data_dir or settings.data_dir)

    def _resolve(self, file_path: Union[str, Path]) -> Path:
        path = Path(file_path)
        if path.exists():
            return path
        # Check in data directory
        candidate = self.data_dir / file_path
        if candidate.exists():
            return candidate
        raise ConfigError(f"File not found: {file_path}")

    def load_json(self, file_path: Union[str, Path]) -> Dict[str, Any]:
        path = self._resolve(file_path)
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e

    def save_json(self, data: Dict[str, Any], file_path: Union[str, Path]) -> Path:
        path = Path(file_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2, sort_keys=True), encoding="utf-8")
        return path

    # ------------------------------------------------------------------
    # scenarios
    # ------------------------------------------------------------------

    def load_scenario(self, file_path: Union[str, Path]) -> Scenario:
        data = self.load_json(file_path)
        try:
            return Scenario.from_dict(data)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"{file_path}: not a scenario file ({e})") from e

    def save_scenario(self, scenario: Scenario, file_path: Union[str, Path]) -> Path:
        path = self.save_json(scenario.to_dict(), file_path)
        logger.debug(f"[Loader] Saved {scenario.scenario_id} to {path}")
        return path

    def load_suite_scenarios(self, directory: Union[str, Path]) -> List[Scenario]:
        paths = self.list_files(directory, "*.json")
        scenarios = [self.load_scenario(p) for p in paths]
        logger.info(f"[Loader] Loaded {len(scenarios)} scenario(s) from {directory}")
        return scenarios

    # ------------------------------------------------------------------
    # configs and banks
    # ------------------------------------------------------------------

    def load_suite_config(self, file_path: Union[str, Path]) -> SuiteConfig:
        data = self.load_json(file_path)
        try:
            return SuiteConfig.model_validate(data)
        except ValidationError as e:
            first = e.errors()[0]
            raise ConfigError(f"{file_path}: {first['msg']} at {'.'.join(map(str, first['loc']))}") from e

    def load_label_bank(self, file_path: Optional[Union[str, Path]] = None) -> LabelBank:
        path = Path(file_path) if file_path else settings.label_bank_path
        if not path.exists():
            raise LabelBankError(f"Label bank not found: {path}")
        data = json.loads(path.read_text(encoding="utf-8"))
        bank = LabelBank.from_dict(data.get("tiers", data))
        logger.debug(f"[Loader] Label bank {path}: {', '.join(f'{t}={len(v)}' for t, v in bank.tiers.items())}")
        return bank

    # ------------------------------------------------------------------
    # traces and tables
    # ------------------------------------------------------------------

    def load_trace(self, file_path: Union[str, Path]) -> TraceFile:
        return read_trace(file_path)

    @staticmethod
    def list_files(directory: Union[str, Path], pattern: str) -> List[Path]:
        root = Path(directory)
        if not root.is_dir():
            raise ConfigError(f"Not a directory: {root}")
        return sorted(root.glob(pattern))

    def list_traces(self, directory: Union[str, Path]) -> List[Path]:
        return self.list_files(directory, "*.trace.json")

    def load_table(self, file_path: Union[str, Path], **kwargs) -> pd.DataFrame:
        path = self._resolve(file_path)
        df = pd.read_csv(path, **kwargs)
        logger.info(f"[Loader] Loaded {len(df)} rows, {len(df.columns)} columns from {path}")
        return df

    @staticmethod
    def write_table(df: pd.DataFrame, file_path: Union[str, Path], precision: Optional[int] = None) -> Path:
        path = Path(file_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        digits = settings.report.float_precision if precision is None else precision
        df.round(digits).to_csv(path, index=False)
        return path
