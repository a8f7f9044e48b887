"""Seeded scenario generation, difficulty scoring and private labels."""
from .generator import (
    CostMode,
    DifficultyBucket,
    PriorMeeting,
    Scenario,
    ScenarioParams,
    assignment_space,
    bucket_difficulty,
    compute_difficulty,
    generate_scenario,
    suite_tertiles,
)
from .labels import LABEL_TIERS, LabelBank, assign_labels, hydrate_calendar_render, meeting_label_for

__all__ = [
    "CostMode", "DifficultyBucket", "PriorMeeting", "Scenario", "ScenarioParams",
    "assignment_space", "bucket_difficulty", "compute_difficulty", "generate_scenario",
    "suite_tertiles", "LABEL_TIERS", "LabelBank", "assign_labels", "hydrate_calendar_render",
    "meeting_label_for",
]
