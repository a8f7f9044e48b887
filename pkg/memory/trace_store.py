"""
Game Trace Store

Append-only event log for one game, persisted as a single JSON file.
The event vocabulary and required payload keys are fixed here and mirrored
in docs/trace_schema.json.
"""

import json
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from loguru import logger
from pydantic import BaseModel, Field, ValidationError

from core.errors import TraceParseError, TraceSchemaError

SCHEMA_VERSION = 1


class EventType(str, Enum):
    GAME_START = "game_start"
    AGENT_REGISTERED = "agent_registered"
    ROUND_START = "round_start"
    TURN_START = "turn_start"
    TURN_END = "turn_end"
    DM_SENT = "dm_sent"
    MESSAGE_REJECTED = "message_rejected"
    DECIDE_START = "decide_start"
    DECIDE_END = "decide_end"
    BATCH_REJECTED = "batch_rejected"
    BATCH_APPLIED = "batch_applied"
    RESOLUTION = "resolution"


REQUIRED_FIELDS: Dict[EventType, tuple] = {
    EventType.GAME_START: ("num_agents", "num_slots", "num_meetings"),
    EventType.AGENT_REGISTERED: ("agent", "protocol"),
    EventType.ROUND_START: ("meeting", "speaker_order", "calendars"),
    EventType.TURN_START: ("agent", "turn", "phase"),
    EventType.TURN_END: ("agent", "turn", "thinking", "messages_sent", "tokens"),
    EventType.DM_SENT: ("channel", "from", "to", "meeting_id", "content", "char_count", "activated"),
    EventType.MESSAGE_REJECTED: ("channel", "from", "to", "reason"),
    EventType.DECIDE_START: ("agent", "phase", "attempt"),
    EventType.DECIDE_END: ("agent", "phase", "attempt", "actions"),
    EventType.BATCH_REJECTED: ("agent", "phase", "attempt", "conflict", "rule", "actions"),
    EventType.BATCH_APPLIED: ("agent", "phase", "actions", "cost", "calendar"),
    EventType.RESOLUTION: ("meeting_id", "success", "slot", "chosen_slots", "reason"),
}


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class Event(BaseModel):
    event_index: int
    type: EventType
    round: Optional[int] = None
    timestamp: str = Field(default_factory=utc_now)
    payload: Dict[str, Any] = Field(default_factory=dict)


class TraceFile(BaseModel):
    """One game: configuration, event log, folded final state and metrics."""
    schema_version: int = SCHEMA_VERSION
    game_id: str
    config: Dict[str, Any] = Field(default_factory=dict)
    events: List[Event] = Field(default_factory=list)
    final_state: Dict[str, Any] = Field(default_factory=dict)
    metrics: Dict[str, Any] = Field(default_factory=dict)
    started_at: str = Field(default_factory=utc_now)
    ended_at: Optional[str] = None

    def events_of(self, *types: EventType) -> List[Event]:
        return [e for e in self.events if e.type in types]

    def append(self, event: Event) -> Event:
        """Append a fully-formed event; indices must continue the log."""
        expected = len(self.events)
        if event.event_index != expected:
            raise TraceSchemaError(f"Event index {event.event_index} out of order, expected {expected}")
        missing = [k for k in REQUIRED_FIELDS[event.type] if k not in event.payload]
        if missing:
            raise TraceSchemaError(f"{event.type.value} event missing payload fields {missing}")
        self.events.append(event)
        return event

    def record(self, type: EventType, payload: Dict[str, Any], round: Optional[int] = None) -> Event:
        """Append a new event with the next index."""
        return self.append(Event(event_index=len(self.events), type=type, round=round, payload=payload))


# ---------------------------------------------------------------------------
# Fold and canonicalisation
# ---------------------------------------------------------------------------

def fold_final_state(events: List[Event], num_agents: Optional[int] = None) -> Dict[str, Any]:
    """Recompute the final-state summary from the event log alone."""
    per_agent: Dict[int, int] = {a: 0 for a in range(num_agents or 0)}
    dm_counts: Dict[str, int] = {}
    succeeded, failed, violations, rejected = 0, 0, 0, 0
    for event in events:
        p = event.payload
        if event.type == EventType.BATCH_APPLIED:
            agent = int(p["agent"])
            per_agent[agent] = per_agent.get(agent, 0) + int(p["cost"])
        elif event.type == EventType.DM_SENT:
            dm_counts[p["channel"]] = dm_counts.get(p["channel"], 0) + 1
        elif event.type == EventType.MESSAGE_REJECTED:
            rejected += 1
        elif event.type == EventType.RESOLUTION:
            if p["success"]:
                succeeded += 1
            else:
                failed += 1
                violations += 1
    return {
        "total_cost": sum(per_agent.values()),
        "per_agent_cost": {str(a): c for a, c in sorted(per_agent.items())},
        "rounds_succeeded": succeeded,
        "rounds_failed": failed,
        "dm_counts": dict(sorted(dm_counts.items())),
        "consistency_violations": violations,
        "messages_rejected": rejected,
    }


VOLATILE_KEYS = ("game_id", "started_at", "ended_at")


def canonicalize(trace: Union[TraceFile, Dict[str, Any]]) -> Dict[str, Any]:
    """Trace as a dict without wall-clock fields or game ids, for equality checks."""
    data = trace.model_dump(mode="json") if isinstance(trace, TraceFile) else json.loads(json.dumps(trace))
    for key in VOLATILE_KEYS:
        data.pop(key, None)
    for event in data.get("events", []):
        event.pop("timestamp", None)
    return data


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def write_trace(trace: TraceFile, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(trace.model_dump(mode="json"), indent=2, sort_keys=True), encoding="utf-8")
    logger.debug(f"[Trace] wrote {len(trace.events)} events to {path}")
    return path


def read_trace(path: Union[str, Path]) -> TraceFile:
    """
    Load a trace file.

    Raises:
        TraceParseError: the file is not valid JSON (with byte offset)
        TraceSchemaError: the JSON does not match the trace schema
    """
    path = Path(path)
    raw = path.read_bytes()
    text = raw.decode("utf-8", errors="replace")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        offset = len(text[: e.pos].encode("utf-8"))
        raise TraceParseError(str(path), offset, e.msg) from e
    try:
        trace = TraceFile.model_validate(data)
    except ValidationError as e:
        raise TraceSchemaError(f"{path}: {e.errors()[0]['msg']} at {e.errors()[0]['loc']}") from e
    if trace.schema_version != SCHEMA_VERSION:
        raise TraceSchemaError(f"{path}: unsupported schema_version {trace.schema_version}")
    return trace


def replay_check(trace: TraceFile, scenario, agents, config=None) -> bool:
    """
    Re-run the game with deterministic handles and compare event logs.

    Timestamps and game ids are ignored.
    """
    from core.execution_engine import GameEngine

    engine = GameEngine(scenario, agents, config=config, game_id=trace.game_id)
    replayed = engine.run_game()
    same = canonicalize(replayed)["events"] == canonicalize(trace)["events"]
    if not same:
        logger.warning(f"[Trace] replay of {trace.game_id} diverged from the recorded events")
    return same
