"""Descriptive diagnostics over traces: failure modes, speaker position, message volume."""

from enum import Enum
from typing import Dict, Iterable, List, Optional, Set, Tuple

import pandas as pd

from memory.trace_store import EventType, TraceFile


class FailureMode(str, Enum):
    SLOT_MISMATCH = "A"
    BLOCKED_RESCHEDULE = "B"
    MISSING_SCHEDULE = "C"
    PRIOR_MISMATCH = "D"
    SLOT_OCCUPIED = "E"
    DESTINATION_OCCUPIED = "F"
    MULTIPLE = "G"


RESOLUTION_MODES = {
    "slot_mismatch": FailureMode.SLOT_MISMATCH,
    "prior_inconsistent": FailureMode.PRIOR_MISMATCH,
}
RULE_MODES = {
    3: FailureMode.BLOCKED_RESCHEDULE,
    4: FailureMode.DESTINATION_OCCUPIED,
    5: FailureMode.DESTINATION_OCCUPIED,
    6: FailureMode.MISSING_SCHEDULE,
    7: FailureMode.SLOT_OCCUPIED,
}

FAILURE_COLUMNS = ["trace_path", "game_id", "protocol", "round", "meeting_id", "mode", "reasons", "reason"]
FIRST_SPEAKER_COLUMNS = ["trace_path", "game_id", "protocol", "round", "agent", "position", "vps_loss", "cost", "messages"]
MESSAGE_INDEX_COLUMNS = ["protocol", "meeting_index", "rounds", "success_rate", "mean_messages", "mean_sweeps"]


def _protocol(trace: TraceFile) -> str:
    return trace.config.get("lineup", {}).get("protocol", "custom")


def classify_failure(resolution: Dict, rejected_rules: Iterable[int]) -> Tuple[FailureMode, List[FailureMode]]:
    """
    Mode of one failed meeting.

    `rejected_rules` are the rules broken by decision batches of participants
    who ended without a valid decision. No recognisable reason counts as a
    missing schedule.
    """
    reasons: Set[FailureMode] = set()
    mode = RESOLUTION_MODES.get(resolution.get("reason_code"))
    if mode is not None:
        reasons.add(mode)
    for rule in rejected_rules:
        if rule in RULE_MODES:
            reasons.add(RULE_MODES[rule])
    ordered = sorted(reasons, key=lambda m: m.value)
    if not ordered:
        return FailureMode.MISSING_SCHEDULE, []
    if len(ordered) > 1:
        return FailureMode.MULTIPLE, ordered
    return ordered[0], ordered


def failure_modes(trace: TraceFile, trace_path: str = "") -> pd.DataFrame:
    rejections: Dict[Tuple[int, int], List[int]] = {}
    for event in trace.events_of(EventType.BATCH_REJECTED):
        if event.payload.get("phase") != "DECISION" or event.payload.get("rule") is None:
            continue
        rejections.setdefault((event.round, int(event.payload["agent"])), []).append(int(event.payload["rule"]))

    rows = []
    for event in trace.events_of(EventType.RESOLUTION):
        p = event.payload
        if p["success"]:
            continue
        undecided = [int(a) for a, slot in p.get("chosen_slots", {}).items() if slot is None]
        rules = [rule for a in undecided for rule in rejections.get((event.round, a), [])]
        mode, reasons = classify_failure(p, rules)
        rows.append({
            "trace_path": trace_path, "game_id": trace.game_id, "protocol": _protocol(trace),
            "round": event.round, "meeting_id": p["meeting_id"], "mode": mode.value,
            "reasons": "".join(r.value for r in reasons), "reason": p.get("reason"),
        })
    return pd.DataFrame(rows, columns=FAILURE_COLUMNS)


def first_speaker(trace: TraceFile, pair_round_vps: Optional[pd.DataFrame] = None, trace_path: str = "") -> pd.DataFrame:
    """Per participating agent-meeting: target-side round VPS, realized cost and messages, tagged by speaking position."""
    target_vps: Dict[Tuple[int, int], float] = {}
    if pair_round_vps is not None and not pair_round_vps.empty:
        mine = pair_round_vps[pair_round_vps["game_id"] == trace.game_id]
        target_vps = mine.groupby(["round", "target_agent"])["vps_loss"].sum().to_dict()

    costs: Dict[Tuple[int, int], int] = {}
    for event in trace.events_of(EventType.BATCH_APPLIED):
        key = (event.round, int(event.payload["agent"]))
        costs[key] = costs.get(key, 0) + int(event.payload["cost"])
    messages: Dict[Tuple[int, int], int] = {}
    for event in trace.events_of(EventType.DM_SENT):
        key = (event.round, int(event.payload["from"]))
        messages[key] = messages.get(key, 0) + 1

    rows = []
    for event in trace.events_of(EventType.ROUND_START):
        order = event.payload["speaker_order"]
        for position, agent in enumerate(order):
            key = (event.round, agent)
            rows.append({
                "trace_path": trace_path, "game_id": trace.game_id, "protocol": _protocol(trace),
                "round": event.round, "agent": agent,
                "position": "first" if position == 0 else "subsequent",
                "vps_loss": float(target_vps.get(key, 0.0)),
                "cost": costs.get(key, 0),
                "messages": messages.get(key, 0),
            })
    return pd.DataFrame(rows, columns=FIRST_SPEAKER_COLUMNS)


def first_speaker_summary(rows: pd.DataFrame) -> pd.DataFrame:
    columns = ["protocol", "position", "seats", "vps_loss", "cost", "messages"]
    if rows.empty:
        return pd.DataFrame(columns=columns)
    table = rows.groupby(["protocol", "position"]).agg(
        seats=("agent", "size"), vps_loss=("vps_loss", "mean"), cost=("cost", "mean"), messages=("messages", "mean"),
    ).reset_index()
    return table[columns]


def messages_per_meeting(traces: Iterable[TraceFile]) -> pd.DataFrame:
    rows = []
    for trace in traces:
        for event in trace.events_of(EventType.RESOLUTION):
            rows.append({
                "protocol": _protocol(trace), "meeting_index": event.round,
                "success": bool(event.payload["success"]),
                "messages": int(event.payload["messages"]), "sweeps": int(event.payload["sweeps"]),
            })
    if not rows:
        return pd.DataFrame(columns=MESSAGE_INDEX_COLUMNS)
    frame = pd.DataFrame(rows)
    table = frame.groupby(["protocol", "meeting_index"]).agg(
        rounds=("success", "size"), success_rate=("success", "mean"),
        mean_messages=("messages", "mean"), mean_sweeps=("sweeps", "mean"),
    ).reset_index()
    return table[MESSAGE_INDEX_COLUMNS]


def failure_mode_counts(failures: pd.DataFrame) -> pd.DataFrame:
    if failures.empty:
        return pd.DataFrame(columns=["protocol", "mode", "count"])
    return failures.groupby(["protocol", "mode"]).size().rename("count").reset_index()
