"""
Report assembly: one pass over a set of traces producing every output table.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import pandas as pd
from loguru import logger

from config import ReportConfig, VpsConfig, settings
from memory.trace_store import TraceFile, read_trace
from metrics import diagnostics
from metrics.evaluation import (
    SEAT_COLUMNS,
    completion_conditioned,
    frontier,
    model_summary,
    seat_reports,
    seat_table,
)
from metrics.vps import VpsReplay, VpsTables

TraceItem = Union[str, Path, Tuple[str, TraceFile]]


@dataclass
class ReportTables:
    seats: pd.DataFrame
    model_summary: pd.DataFrame
    completion_conditioned: pd.DataFrame
    frontier: pd.DataFrame
    vps: VpsTables
    failure_modes: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=diagnostics.FAILURE_COLUMNS))
    first_speaker: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=diagnostics.FIRST_SPEAKER_COLUMNS))
    messages_per_meeting: pd.DataFrame = field(
        default_factory=lambda: pd.DataFrame(columns=diagnostics.MESSAGE_INDEX_COLUMNS)
    )

    FILES = {
        "seats": "seat_reports.csv",
        "model_summary": "model_summary.csv",
        "completion_conditioned": "completion_conditioned.csv",
        "frontier": "frontier.csv",
        "failure_modes": "failure_modes.csv",
        "first_speaker": "first_speaker.csv",
        "messages_per_meeting": "messages_per_meeting.csv",
    }

    def write(self, out_dir: Union[str, Path], precision: Optional[int] = None) -> Dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        digits = settings.report.float_precision if precision is None else precision
        paths = {}
        for name, filename in self.FILES.items():
            path = out / filename
            getattr(self, name).round(digits).to_csv(path, index=False)
            paths[name] = path
        for name, path in self.vps.write(out).items():
            paths[f"vps_{name}"] = path
        logger.info(f"[Report] Wrote {len(paths)} tables to {out}")
        return paths


def _load(items: Iterable[TraceItem]) -> List[Tuple[str, TraceFile]]:
    loaded = []
    for item in items:
        if isinstance(item, tuple):
            loaded.append((str(item[0]), item[1]))
        else:
            loaded.append((str(item), read_trace(item)))
    # fixed order keeps float sums reproducible
    return sorted(loaded, key=lambda pair: pair[0])


def build_report(
    items: Iterable[TraceItem],
    vps_cfg: Optional[VpsConfig] = None,
    report_cfg: Optional[ReportConfig] = None,
) -> ReportTables:
    """
    Seat reports, aggregates, VPS tables and diagnostics for a set of traces.

    Raises:
        ReportError: a trace lacks oracle statistics
        TraceParseError / TraceSchemaError: a trace file cannot be read
    """
    report_cfg = report_cfg or settings.report
    traces = _load(items)
    replay = VpsReplay(vps_cfg)
    vps = VpsTables.concat([replay.replay(trace, path) for path, trace in traces])

    reports = [r for path, trace in traces for r in seat_reports(trace, path)]
    seats = seat_table(reports, vps.game_target_summary) if reports else pd.DataFrame(columns=SEAT_COLUMNS)
    summary = model_summary(seats)
    tables = ReportTables(
        seats=seats,
        model_summary=summary,
        completion_conditioned=completion_conditioned(seats),
        frontier=frontier(summary),
        vps=vps,
    )
    if report_cfg.diagnostics and traces:
        failures = [diagnostics.failure_modes(trace, path) for path, trace in traces]
        speakers = [diagnostics.first_speaker(trace, vps.pair_round_vps, path) for path, trace in traces]
        tables.failure_modes = pd.concat(failures, ignore_index=True)
        tables.first_speaker = pd.concat(speakers, ignore_index=True)
        tables.messages_per_meeting = diagnostics.messages_per_meeting(trace for _, trace in traces)
    logger.info(f"[Report] {len(traces)} trace(s), {len(seats)} seat(s), {len(summary)} summary row(s)")
    return tables
