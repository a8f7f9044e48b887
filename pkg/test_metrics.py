import sys
from pathlib import Path

import pandas as pd
import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from conftest import ScriptedAgent, dm, schedule
from core.calendar_types import ActionBatch, Reschedule
from core.errors import ReportError
from core.execution_engine import run_game
from memory.trace_store import TraceFile
from metrics.diagnostics import FailureMode, classify_failure, failure_modes, first_speaker, messages_per_meeting
from metrics.evaluation import (
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
from metrics.report import build_report


def seat(game="g1", agent=0, protocol="imap", **overrides) -> SeatReport:
    values = dict(
        game_id=game, trace_path="", agent=agent, protocol=protocol, scenario_id="uniform-seed0",
        cost_mode="uniform", seed=0, meetings=2, scheduled=2, realized_cost=0, oracle_cost=0,
        worst_cost=0, complete_oracle_cost=0, misses=0, messages=0, prior_reschedules=0,
    )
    values.update(overrides)
    return SeatReport(**values)


def test_adjusted_excess_one_miss():
    seats = seat_table([seat(scheduled=1, misses=1, worst_cost=6, complete_oracle_cost=2)])
    assert adjusted_excess_cost(seats).loc["imap"] == pytest.approx(2.0)
    assert excess_cost(seats).loc["imap"] == 0


def test_adjusted_excess_is_zero_at_oracle():
    seats = seat_table([seat(realized_cost=3, oracle_cost=3, worst_cost=9, complete_oracle_cost=3)])
    assert adjusted_excess_cost(seats).loc["imap"] == 0.0


def test_excess_cost_may_be_negative():
    # a voluntary mover can end below its scheduled-only oracle share
    seats = seat_table([seat(realized_cost=0, oracle_cost=2)])
    assert excess_cost(seats).loc["imap"] == -2
    assert adjusted_excess_cost(seats).loc["imap"] == 0.0


def test_comm_efficiency_floors_scheduled_at_one():
    seats = seat_table([
        seat(agent=0, messages=6, scheduled=3, meetings=3),
        seat(agent=1, messages=4, scheduled=0, meetings=1, misses=1),
    ])
    per_seat = comm_efficiency(seat_table([seat(messages=6, scheduled=3, meetings=3)]))
    assert per_seat.loc["imap"] == pytest.approx(2.0)
    assert comm_efficiency(seats).loc["imap"] == pytest.approx((2.0 + 4.0) / 2)


def test_task_success_skips_seats_without_meetings():
    seats = seat_table([
        seat(agent=0, meetings=2, scheduled=1, misses=1),
        seat(agent=1, meetings=0, scheduled=0),
    ])
    assert task_success(seats).loc["imap"] == pytest.approx(0.5)


def test_relative_burdens_sum_to_zero():
    seats = seat_table([
        seat(game="g1", agent=0, realized_cost=5, oracle_cost=1),
        seat(game="g1", agent=1, realized_cost=1, oracle_cost=1),
        seat(game="g1", agent=2, realized_cost=2, oracle_cost=0),
        seat(game="g2", agent=0, realized_cost=3, oracle_cost=0),
        seat(game="g2", agent=1, realized_cost=0, oracle_cost=0),
    ])
    burdens = relative_burdens(seats)
    for game in ("g1", "g2"):
        assert burdens[seats["game_id"] == game].sum() == pytest.approx(0.0, abs=1e-12)
    # excesses g1: 4, 0, 2 (mean 2) and g2: 3, 0 (mean 1.5)
    assert fairness(seats).loc["imap"] == pytest.approx((2 + 2 + 0 + 1.5 + 1.5) / 5)


def test_completion_conditioned():
    seats = seat_table([
        seat(agent=0, realized_cost=4, oracle_cost=2),
        seat(agent=1),
        seat(agent=2, scheduled=1, misses=1),
    ])
    table = completion_conditioned(seats)
    row = table.iloc[0]
    assert row["seats"] == 2
    assert row["excess_per_meeting"] == pytest.approx((1.0 + 0.0) / 2)
    assert row["nonzero_regret_share"] == pytest.approx(0.5)


def test_completion_conditioned_empty():
    table = completion_conditioned(seat_table([seat(scheduled=0, misses=2)]))
    assert table.empty
    assert list(table.columns) == ["protocol", "seats", "excess_per_meeting", "nonzero_regret_share"]


def test_model_summary_and_frontier():
    seats = seat_table([
        seat(protocol="imap", excess_vps_total=16.0, realized_cost=0),
        seat(protocol="sd_map", excess_vps_total=2.0, realized_cost=3),
        seat(protocol="dsm_welfare", excess_vps_total=20.0, realized_cost=3),
    ])
    summary = model_summary(seats)
    assert list(summary["protocol"]) == ["dsm_welfare", "imap", "sd_map"]
    plane = frontier(summary).set_index("protocol")
    assert plane.loc["imap", "on_frontier"]
    assert plane.loc["sd_map", "on_frontier"]
    assert not plane.loc["dsm_welfare", "on_frontier"]
    assert plane.loc["sd_map", "privacy_benefit"] == pytest.approx(-1.0)


def test_seat_reports_from_trace(prior_meeting_scenario):
    move_m5 = Reschedule(item_id=5, from_slot=0, to_slot=3)
    agents = [
        ScriptedAgent(0, says={(0, 0): [dm(2, "moving M5"), dm(1, "slot 4")]}, decisions={0: schedule(0, 4, move_m5)}),
        ScriptedAgent(1, decisions={0: schedule(0, 4, Reschedule(item_id=104, from_slot=4, to_slot=3))}),
        ScriptedAgent(2, voluntary={0: ActionBatch((move_m5,))}),
    ]
    trace = run_game(prior_meeting_scenario, agents, lineup={"protocol": "scripted"})
    reports = {r.agent: r for r in seat_reports(trace)}

    assert reports[0].realized_cost == 1 and reports[0].oracle_cost == 0
    assert reports[0].prior_reschedules == 1
    assert reports[1].prior_reschedules == 0
    assert reports[2].prior_reschedules == 1
    assert reports[2].meetings == 0
    assert reports[0].messages == 2
    assert reports[0].protocol == "scripted"
    assert all(r.scheduled == r.meetings for r in reports.values())


def test_seat_reports_need_oracle():
    with pytest.raises(ReportError):
        seat_reports(TraceFile(game_id="g", config={"lineup": {"protocol": "imap"}}))


def test_classify_failure():
    assert classify_failure({"reason_code": "slot_mismatch"}, []) == (FailureMode.SLOT_MISMATCH, [FailureMode.SLOT_MISMATCH])
    assert classify_failure({"reason_code": "missing_decision"}, [3]) == (
        FailureMode.BLOCKED_RESCHEDULE, [FailureMode.BLOCKED_RESCHEDULE]
    )
    assert classify_failure({"reason_code": "missing_decision"}, []) == (FailureMode.MISSING_SCHEDULE, [])
    mode, reasons = classify_failure({"reason_code": "missing_decision"}, [7, 5])
    assert mode == FailureMode.MULTIPLE
    assert reasons == [FailureMode.SLOT_OCCUPIED, FailureMode.DESTINATION_OCCUPIED]


def test_failure_modes_from_trace(two_agent_scenario):
    agents = [ScriptedAgent(0, decisions={0: schedule(0, 3)}), ScriptedAgent(1, decisions={0: schedule(0, 1)})]
    trace = run_game(two_agent_scenario, agents)
    table = failure_modes(trace)
    assert list(table["mode"]) == ["E"]


def test_first_speaker_and_message_index(three_agent_scenario):
    agents = [
        ScriptedAgent(0, says={(0, 0): [dm(1, "slot 3")]}, decisions={0: schedule(0, 3), 1: schedule(1, 1)}),
        ScriptedAgent(1, decisions={0: schedule(0, 3), 1: schedule(1, 1)}),
        ScriptedAgent(2, decisions={1: schedule(1, 1)}),
    ]
    trace = run_game(three_agent_scenario, agents, lineup={"protocol": "scripted"})
    rows = first_speaker(trace)
    assert list(rows["position"]) == ["first", "subsequent", "first", "subsequent"]
    assert rows.iloc[0]["messages"] == 1
    index = messages_per_meeting([trace])
    assert list(index["mean_messages"]) == [1.0, 0.0]
    assert list(index["success_rate"]) == [1.0, 1.0]


def test_build_report(three_agent_scenario, tmp_path):
    from agents.registry import build_lineup

    traces = [
        (f"{protocol}.trace.json", run_game(three_agent_scenario, build_lineup(protocol, 3), lineup={"protocol": protocol}))
        for protocol in ("imap", "sd_map")
    ]
    tables = build_report(traces)
    assert len(tables.seats) == 6
    assert set(tables.model_summary["protocol"]) == {"imap", "sd_map"}
    assert (tables.seats["vps_total"] >= tables.seats["excess_vps_total"]).all()
    paths = tables.write(tmp_path)
    assert (tmp_path / "seat_reports.csv").exists()
    assert (tmp_path / "pair_round_vps.csv").exists()
    assert len(paths) == len(tables.FILES) + 4
    assert pd.read_csv(tmp_path / "model_summary.csv").shape[0] == 2
