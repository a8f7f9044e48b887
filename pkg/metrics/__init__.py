from .vps import (
    UpdateEvent,
    VpsReplay,
    VpsTables,
    apply_update,
    feasibility_truth,
    replay_vps,
    round_vps,
    summarize,
    typed_message_to_updates,
)
from .evaluation import (
    SeatReport,
    adjusted_excess_cost,
    comm_efficiency,
    completion_conditioned,
    excess_cost,
    fairness,
    frontier,
    model_summary,
    relative_burdens,
    seat_reports,
    seat_table,
    task_success,
)
from .diagnostics import FailureMode, classify_failure, failure_modes, first_speaker, messages_per_meeting
from .report import ReportTables, build_report

__all__ = [
    "UpdateEvent", "VpsReplay", "VpsTables", "apply_update", "feasibility_truth", "replay_vps", "round_vps",
    "summarize", "typed_message_to_updates",
    "SeatReport", "adjusted_excess_cost", "comm_efficiency", "completion_conditioned", "excess_cost",
    "fairness", "frontier", "model_summary", "relative_burdens", "seat_reports", "seat_table", "task_success",
    "FailureMode", "classify_failure", "failure_modes", "first_speaker", "messages_per_meeting",
    "ReportTables", "build_report",
]
