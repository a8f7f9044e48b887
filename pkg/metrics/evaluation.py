"""
Seat reports and aggregate evaluation metrics.

A seat is one agent in one game. Seat reports are folded from the trace
events plus the oracle statistics stored with the scenario; every metric
below is a pandas aggregation over a seat-report table.
"""

from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Optional, Set

import numpy as np
import pandas as pd
from loguru import logger

from core.calendar_types import Calendar, Errand, ScheduledMeeting
from core.errors import ReportError
from memory.trace_store import EventType, TraceFile
from oracle.solver import min_cost_schedule
from scenario.generator import Scenario


@dataclass
class SeatReport:
    """Per-(game, agent) inputs to every metric."""
    game_id: str
    trace_path: str
    agent: int
    protocol: str
    scenario_id: str
    cost_mode: str
    seed: int
    meetings: int
    scheduled: int
    realized_cost: int
    oracle_cost: int
    worst_cost: int
    complete_oracle_cost: int
    misses: int
    messages: int
    prior_reschedules: int
    vps_total: float = 0.0
    excess_vps_total: float = 0.0

    @property
    def excess(self) -> int:
        return self.realized_cost - self.oracle_cost


SEAT_COLUMNS = list(SeatReport.__dataclass_fields__)


def _meeting_moves(trace: TraceFile) -> Dict[int, Set[int]]:
    """Distinct meetings each agent moved with a reschedule that was applied."""
    calendars_by_round: Dict[int, List[Calendar]] = {
        e.round: [Calendar.from_dict(c) for c in e.payload["calendars"]]
        for e in trace.events_of(EventType.ROUND_START)
    }
    moved: Dict[int, Set[int]] = {}
    for event in trace.events_of(EventType.BATCH_APPLIED):
        agent = int(event.payload["agent"])
        calendar = calendars_by_round[event.round][agent]
        for action in event.payload["actions"]:
            if action.get("type") != "reschedule":
                continue
            item = action["item_id"]
            state = calendar[action["from_slot"]]
            is_meeting = isinstance(state, ScheduledMeeting) and state.meeting_id == item
            # a second move in the same round starts from a slot the round-start calendar doesn't show
            if is_meeting or (not isinstance(state, Errand) and calendar.find_meeting(item) is not None):
                moved.setdefault(agent, set()).add(item)
    return moved


def seat_reports(trace: TraceFile, trace_path: str = "", scenario: Optional[Scenario] = None) -> List[SeatReport]:
    """
    Fold one trace into per-agent seat reports.

    Raises:
        ReportError: the trace carries no oracle statistics
    """
    if scenario is None:
        data = trace.config.get("scenario")
        if not data or "oracle" not in data:
            raise ReportError(f"{trace_path or trace.game_id}: trace has no scenario oracle statistics")
        scenario = Scenario.from_dict(data)
    protocol = trace.config.get("lineup", {}).get("protocol", "custom")
    num_agents = scenario.num_agents

    resolutions = {e.round: e.payload for e in trace.events_of(EventType.RESOLUTION)}
    succeeded_rounds = {r for r, p in resolutions.items() if p["success"]}
    scheduled_ids = [m.meeting_id for m in scenario.meetings if m.round_index in succeeded_rounds]

    realized = {a: 0 for a in range(num_agents)}
    for event in trace.events_of(EventType.BATCH_APPLIED):
        realized[int(event.payload["agent"])] += int(event.payload["cost"])

    messages = {a: 0 for a in range(num_agents)}
    for event in trace.events_of(EventType.DM_SENT):
        if event.round in succeeded_rounds:
            messages[int(event.payload["from"])] += 1

    if scheduled_ids:
        partial = min_cost_schedule(scenario, meeting_subset=scheduled_ids)
        if partial is None:
            raise ReportError(f"{trace_path or trace.game_id}: scheduled subset {scheduled_ids} has no oracle schedule")
        oracle_per_agent = partial.per_agent_cost
    else:
        oracle_per_agent = {}

    moved = _meeting_moves(trace)
    reports = []
    for agent in range(num_agents):
        mine = [m for m in scenario.meetings if agent in m.participants]
        done = sum(1 for m in mine if m.meeting_id in scheduled_ids)
        reports.append(SeatReport(
            game_id=trace.game_id,
            trace_path=trace_path,
            agent=agent,
            protocol=protocol,
            scenario_id=scenario.scenario_id,
            cost_mode=scenario.params.cost_mode.value,
            seed=scenario.params.seed,
            meetings=len(mine),
            scheduled=done,
            realized_cost=realized[agent],
            oracle_cost=int(oracle_per_agent.get(agent, 0)),
            worst_cost=int(scenario.oracle.worst_per_agent.get(agent, 0)),
            complete_oracle_cost=int(scenario.oracle.optimal_per_agent.get(agent, 0)),
            misses=len(mine) - done,
            messages=messages[agent],
            prior_reschedules=len(moved.get(agent, set())),
        ))
    return reports


def seat_table(reports: Iterable[SeatReport], vps_targets: Optional[pd.DataFrame] = None) -> pd.DataFrame:
    """Seat reports as a DataFrame, joined with per-target VPS totals when given."""
    frame = pd.DataFrame([asdict(r) for r in reports], columns=SEAT_COLUMNS)
    if vps_targets is not None and not vps_targets.empty and not frame.empty:
        vps = vps_targets.rename(columns={"target_agent": "agent"})[
            ["game_id", "agent", "vps_loss_total", "excess_vps_loss_total"]
        ]
        frame = frame.drop(columns=["vps_total", "excess_vps_total"]).merge(vps, on=["game_id", "agent"], how="left")
        frame = frame.rename(columns={"vps_loss_total": "vps_total", "excess_vps_loss_total": "excess_vps_total"})
        frame[["vps_total", "excess_vps_total"]] = frame[["vps_total", "excess_vps_total"]].fillna(0.0)
        frame = frame[SEAT_COLUMNS]
    return frame


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def _per_seat(seats: pd.DataFrame) -> pd.DataFrame:
    seats = seats.copy()
    seats["excess"] = seats["realized_cost"] - seats["oracle_cost"]
    seats["success_ratio"] = np.where(seats["meetings"] > 0, seats["scheduled"] / seats["meetings"].clip(lower=1), np.nan)
    delta_c = seats["excess"].clip(lower=0)
    delta_w = (seats["worst_cost"] - seats["complete_oracle_cost"]).clip(lower=0)
    seats["adjusted"] = (delta_c + seats["misses"] * delta_w) / seats["meetings"].clip(lower=1)
    seats["efficiency"] = seats["messages"] / seats["scheduled"].clip(lower=1)
    seats["relative_burden"] = seats["excess"] - seats.groupby("game_id")["excess"].transform("mean")
    return seats


def task_success(seats: pd.DataFrame, by: str = "protocol") -> pd.Series:
    """S: mean over seats with meetings of scheduled / meetings."""
    return _per_seat(seats).groupby(by)["success_ratio"].mean().rename("task_success")


def excess_cost(seats: pd.DataFrame, by: str = "protocol") -> pd.Series:
    """C: mean of realized minus scheduled-only oracle cost; may be negative."""
    return _per_seat(seats).groupby(by)["excess"].mean().rename("excess_cost")


def adjusted_excess_cost(seats: pd.DataFrame, by: str = "protocol") -> pd.Series:
    """C_adj: mean of (max(0, excess) + misses * max(0, w - o)) / meetings."""
    return _per_seat(seats).groupby(by)["adjusted"].mean().rename("adjusted_excess_cost")


def comm_efficiency(seats: pd.DataFrame, by: str = "protocol") -> pd.Series:
    """E: mean messages per scheduled meeting, counted in successful rounds only."""
    return _per_seat(seats).groupby(by)["efficiency"].mean().rename("comm_efficiency")


def relative_burdens(seats: pd.DataFrame) -> pd.Series:
    """Per-seat excess centered on its game's mean excess; sums to zero within a game."""
    return _per_seat(seats)["relative_burden"]


def fairness(seats: pd.DataFrame, by: str = "protocol") -> pd.Series:
    """F: mean absolute relative excess burden."""
    per_seat = _per_seat(seats)
    per_seat["abs_burden"] = per_seat["relative_burden"].abs()
    return per_seat.groupby(by)["abs_burden"].mean().rename("fairness")


def completion_conditioned(seats: pd.DataFrame, by: str = "protocol") -> pd.DataFrame:
    """Seats that scheduled every one of their meetings: positive excess per meeting and nonzero-regret share."""
    columns = [by, "seats", "excess_per_meeting", "nonzero_regret_share"]
    full = _per_seat(seats)
    full = full[(full["meetings"] > 0) & (full["scheduled"] == full["meetings"])]
    if full.empty:
        return pd.DataFrame(columns=columns)
    full["excess_per_meeting"] = full["excess"].clip(lower=0) / full["scheduled"]
    full["nonzero"] = (full["excess"] > 0).astype(float)
    table = full.groupby(by).agg(
        seats=("agent", "size"),
        excess_per_meeting=("excess_per_meeting", "mean"),
        nonzero_regret_share=("nonzero", "mean"),
    ).reset_index()
    return table[columns]


def model_summary(seats: pd.DataFrame, by: str = "protocol") -> pd.DataFrame:
    """One row per (protocol, cost mode) with every headline metric."""
    if seats.empty:
        return pd.DataFrame(columns=[by, "cost_mode", "games", "seats", "task_success", "excess_cost",
                                     "adjusted_excess_cost", "comm_efficiency", "fairness",
                                     "excess_vps_per_meeting"])
    rows = []
    for (group, mode), part in seats.groupby([by, "cost_mode"], sort=True):
        per_seat = _per_seat(part)
        rows.append({
            by: group,
            "cost_mode": mode,
            "games": part["game_id"].nunique(),
            "seats": len(part),
            "task_success": per_seat["success_ratio"].mean(),
            "excess_cost": per_seat["excess"].mean(),
            "adjusted_excess_cost": per_seat["adjusted"].mean(),
            "comm_efficiency": per_seat["efficiency"].mean(),
            "fairness": per_seat["relative_burden"].abs().mean(),
            "excess_vps_per_meeting": (part["excess_vps_total"] / part["meetings"].clip(lower=1)).mean(),
        })
    summary = pd.DataFrame(rows)
    logger.debug(f"[Metrics] model summary over {len(seats)} seat(s), {len(summary)} row(s)")
    return summary


def frontier(summary: pd.DataFrame, by: str = "protocol") -> pd.DataFrame:
    """
    Privacy-efficiency plane as benefit scores.

    privacy_benefit = -excess VPS per meeting, cost_benefit = -adjusted excess
    cost; a point is on the frontier when no other point in the same cost mode
    is at least as good on both and better on one.
    """
    columns = [by, "cost_mode", "privacy_benefit", "cost_benefit", "on_frontier"]
    if summary.empty:
        return pd.DataFrame(columns=columns)
    plane = summary[[by, "cost_mode"]].copy()
    plane["privacy_benefit"] = -summary["excess_vps_per_meeting"]
    plane["cost_benefit"] = -summary["adjusted_excess_cost"]
    flags = []
    for _, row in plane.iterrows():
        peers = plane[plane["cost_mode"] == row["cost_mode"]]
        dominated = (
            (peers["privacy_benefit"] >= row["privacy_benefit"])
            & (peers["cost_benefit"] >= row["cost_benefit"])
            & ((peers["privacy_benefit"] > row["privacy_benefit"]) | (peers["cost_benefit"] > row["cost_benefit"]))
        ).any()
        flags.append(not dominated)
    plane["on_frontier"] = flags
    return plane[columns]


def require_oracle(seats: pd.DataFrame):
    """Raise ReportError when seat rows lack oracle columns."""
    missing = [c for c in ("oracle_cost", "worst_cost", "complete_oracle_cost") if c not in seats.columns]
    if missing:
        raise ReportError(f"seat table is missing oracle columns {missing}")
