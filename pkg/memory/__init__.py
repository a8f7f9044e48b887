"""Game trace persistence."""
from .trace_store import (
    SCHEMA_VERSION, EventType, Event, TraceFile, canonicalize, fold_final_state,
    read_trace, write_trace, replay_check,
)

__all__ = [
    "SCHEMA_VERSION", "EventType", "Event", "TraceFile", "canonicalize", "fold_final_state",
    "read_trace", "write_trace", "replay_check",
]
