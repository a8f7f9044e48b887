"""
Configuration management for the Calendar Arena benchmark.
"""

from pathlib import Path
from typing import Dict, Optional, Tuple
from pydantic import BaseModel, Field, model_validator
from dotenv import load_dotenv
import os

from core.channels import ChannelPolicy

load_dotenv()


class EngineConfig(BaseModel):
    """Round orchestration limits and channel switches."""
    max_turns_per_round: int = Field(default=32, ge=1, description="Cheap-talk sweeps per round")
    decision_retries: int = Field(default=2, ge=0, description="Retries after a rejected DECISION batch")
    dm_enabled: bool = Field(default=True, description="Direct messages")
    participant_groupchat_enabled: bool = Field(default=True, description="Participant-only groupchat")
    all_agent_groupchat_enabled: bool = Field(default=True, description="All-agent groupchat")
    dm_cap: Optional[int] = Field(default=None, ge=0, description="Max DMs per agent per round (None = unlimited)")
    log_scale_costs: bool = Field(default=True, description="Show agents costs on the 1/10/100 display scale")

    def channel_policy(self) -> ChannelPolicy:
        return ChannelPolicy(
            dm_enabled=self.dm_enabled,
            participant_groupchat_enabled=self.participant_groupchat_enabled,
            all_agent_groupchat_enabled=self.all_agent_groupchat_enabled,
            dm_cap=self.dm_cap,
        )


class ScenarioDefaults(BaseModel):
    """Defaults for scenario generation when a suite leaves a key unset."""
    num_agents: int = Field(default=5, description="N")
    num_slots: int = Field(default=16, description="S")
    num_meetings: int = Field(default=5, description="M, one incoming meeting per round")
    participants_per_meeting: int = Field(default=3, description="Size of sampled participant sets")
    pref_level: int = Field(default=3, description="Cost levels available to errands")
    meeting_cost_level: int = Field(default=1, description="Displacement cost of a prior meeting copy")
    num_prior_meetings: int = Field(default=0, description="Meetings already on calendars at game start")
    resample_budget: int = Field(default=1000, description="Generation attempts before giving up")


class DsmParams(BaseModel):
    """Offer-size and settlement parameters of the score-based mechanism."""
    name: str = Field(default="dsm", description="Preset tag written to traces and reports")
    min_offer: int = Field(default=1, ge=1, description="Smallest batch of slots offered per sub-round")
    max_offer: int = Field(default=12, ge=1, description="Largest batch of slots offered per sub-round")
    failure_penalty: float = Field(default=1.0, ge=0.0, description="Penalty weight on a failed sub-round")
    privacy_weight: float = Field(default=0.0, ge=0.0, description="Weight on each disclosed slot")
    social_weight: float = Field(default=1.0, ge=0.0, description="Weight on the success probability")
    cascade_depth: int = Field(default=2, ge=1, description="1 = free/errand slots only, 2 = displacement plans")
    displacement_targets: int = Field(default=4, ge=0, description="Max displacement plans per sub-round")
    exhaustive: bool = Field(default=True, description="Keep proposing until the slot pool is exhausted")
    levels: int = Field(default=12, ge=3, description="Satisfaction levels D; 0 infeasible, D-1 free")

    @model_validator(mode="after")
    def _check_offer_range(self) -> "DsmParams":
        if self.min_offer > self.max_offer:
            raise ValueError(f"min_offer ({self.min_offer}) exceeds max_offer ({self.max_offer})")
        return self


DSM_WELFARE = DsmParams(
    name="dsm_welfare", min_offer=1, max_offer=12, failure_penalty=1.0, privacy_weight=0.0,
    social_weight=1.0, cascade_depth=2, displacement_targets=4, exhaustive=True,
)
DSM_PRIVATE = DsmParams(
    name="dsm_private", min_offer=1, max_offer=2, failure_penalty=0.25, privacy_weight=10.0,
    social_weight=0.25, cascade_depth=1, displacement_targets=2, exhaustive=False,
)


class VpsConfig(BaseModel):
    """Protocol-semantic privacy replay."""
    prior: float = Field(default=0.5, ge=0.0, le=1.0, description="Uninformed belief p0")
    excess_floor: float = Field(default=5.0, ge=0.0, description="Communication floor in slot-equivalents")
    proposal_evidence: float = Field(default=0.85, description="Evidence of a proposed slot")
    proposal_strength: float = Field(default=0.70, description="Strength of a proposed slot update")


class SdModel(BaseModel):
    """Per-agent scheduling-difficulty weights used by SD-MAP bump decisions."""
    sigma: Dict[int, float] = Field(default_factory=dict, description="Agent -> weight; unlisted agents weigh 1")

    @model_validator(mode="after")
    def _check_weights(self) -> "SdModel":
        negative = [a for a, w in self.sigma.items() if w < 0]
        if negative:
            raise ValueError(f"sigma must be nonnegative, got negative weights for agents {negative}")
        return self

    def weight(self, agent: int) -> float:
        return self.sigma.get(agent, 1.0)


class ReportConfig(BaseModel):
    """Report table options."""
    float_precision: int = Field(default=6, ge=0, description="Decimals kept in CSV float columns")
    diagnostics: bool = Field(default=True, description="Also write failure-mode and first-speaker tables")


class DifficultyConfig(BaseModel):
    """Difficulty buckets; suite tertiles are used when thresholds are absent."""
    thresholds: Optional[Tuple[float, float]] = Field(
        default=None, description="(hard_below, easy_from) cut points on d"
    )


class Settings(BaseModel):
    """Main settings container."""
    # Paths
    project_root: Path = Field(default=Path(__file__).resolve().parent.parent)
    output_root: Path = Field(default=Path(os.getenv("CALARENA_OUTPUT_ROOT", "runs")))
    log_level: str = Field(default=os.getenv("CALARENA_LOG_LEVEL", "INFO"))

    # Component configs
    engine: EngineConfig = Field(default_factory=EngineConfig)
    scenario: ScenarioDefaults = Field(default_factory=ScenarioDefaults)
    dsm_welfare: DsmParams = Field(default_factory=lambda: DSM_WELFARE.model_copy())
    dsm_private: DsmParams = Field(default_factory=lambda: DSM_PRIVATE.model_copy())
    vps: VpsConfig = Field(default_factory=VpsConfig)
    sd_model: SdModel = Field(default_factory=SdModel)
    report: ReportConfig = Field(default_factory=ReportConfig)
    difficulty: DifficultyConfig = Field(default_factory=DifficultyConfig)

    @property
    def data_dir(self) -> Path:
        return self.project_root / "data"

    @property
    def label_bank_path(self) -> Path:
        return self.data_dir / "label_bank.json"

    def ensure_directories(self):
        """Create the output root if it doesn't exist."""
        self.output_root.mkdir(parents=True, exist_ok=True)


# Global settings instance
settings = Settings()
