import sys
from pathlib import Path

import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from conftest import make_calendar, make_scenario
from agents.dsm import (
    DsmAgent,
    flexibility,
    offer_size,
    satisfaction,
    satisfaction_for_cost,
    scoring_cost,
    selection_reward,
    settle,
    success_estimate,
)
from agents.imap import ImapAgent, choose_slot
from agents.registry import build_lineup, describe_lineup, validate_lineup
from agents.sd_map import SdMapAgent, scheduling_difficulty, slot_status
from agents.typed_messages import KINDS, CostRequest, ProtocolTag, SdStatus, TypedMessage, encode
from config import DSM_PRIVATE, DSM_WELFARE, SdModel
from core.errors import ConfigError
from core.execution_engine import run_game
from memory.trace_store import EventType
from scenario.generator import CostMode, ScenarioParams, generate_scenario


def single_meeting_scenario(seed, cost_mode=CostMode.VARIED):
    return generate_scenario(ScenarioParams(
        seed=seed, num_agents=5, num_slots=16, num_meetings=1, participants_per_meeting=3,
        density=0.8, blocked_errand_count=2, num_prior_meetings=1, cost_mode=cost_mode,
    ))


def decoded_messages(trace):
    return [TypedMessage.parse(e.payload["content"]) for e in trace.events_of(EventType.DM_SENT)]


# ---------------------------------------------------------------------------
# typed messages
# ---------------------------------------------------------------------------

def test_typed_message_encoding():
    content = encode(ProtocolTag.IMAP, 4, CostRequest(slots=[0, 1]))
    assert content == '{"kind":"cost_request","meeting_id":4,"payload":{"slots":[0,1]},"protocol":"imap"}'
    message, status = TypedMessage.decode(content)
    assert status == "ok"
    assert message.body() == CostRequest(slots=[0, 1])


@pytest.mark.parametrize("content, status", [
    ("slot 3 works for me", "free_text"),
    ('{"kind":"haggle","meeting_id":0,"payload":{},"protocol":"imap"}', "unknown_kind"),
    ('{"kind":"propose","meeting_id":0,"payload":{"slot":1,"note":"hi"},"protocol":"sd"}', "invalid_payload"),
])
def test_typed_message_rejections(content, status):
    assert TypedMessage.decode(content) == (None, status)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

def test_lineups():
    assert validate_lineup("imap", 3) == "imap"
    with pytest.raises(ConfigError):
        validate_lineup(["imap", "sd_map", "imap"], 3)
    with pytest.raises(ConfigError):
        validate_lineup(["imap", "imap"], 3)
    with pytest.raises(ConfigError):
        validate_lineup("llm", 3)

    seats = build_lineup("dsm_private", 3)
    assert sorted(seats) == [0, 1, 2]
    assert all(isinstance(a, DsmAgent) and a.protocol == "dsm_private" for a in seats.values())
    meta = describe_lineup("dsm_welfare", 3)
    assert meta["protocol"] == "dsm_welfare"
    assert meta["params"]["max_offer"] == 12


# ---------------------------------------------------------------------------
# IMAP
# ---------------------------------------------------------------------------

def test_choose_slot():
    vectors = [{0: 1, 1: 0, 2: 0}, {0: 0, 1: None, 2: 0}]
    assert choose_slot(vectors, 3) == (2, 0)
    assert choose_slot([{0: None}, {0: 0}], 1) is None


@pytest.mark.parametrize("seed", range(6))
def test_imap_is_optimal_on_single_meetings(seed):
    scenario = single_meeting_scenario(seed)
    trace = run_game(scenario, build_lineup("imap", scenario.num_agents))
    assert trace.final_state["rounds_succeeded"] == 1
    assert trace.final_state["total_cost"] == scenario.optimal_cost
    [resolution] = trace.events_of(EventType.RESOLUTION)
    assert resolution.payload["slot"] == scenario.oracle.optimal_assignment[0]
    # request, cost vector and decision per responder
    assert resolution.payload["messages"] == 3 * (len(scenario.meetings[0].participants) - 1)


def test_imap_ignores_free_text(two_agent_scenario):
    from conftest import ScriptedAgent, dm, schedule

    seats = build_lineup("imap", 2)
    chatty = ScriptedAgent(1, says={(0, 0): [dm(0, "how about slot 1?")]}, decisions={0: schedule(0, 1)})
    trace = run_game(two_agent_scenario, {0: seats[0], 1: chatty})
    assert seats[0].ignored["free_text"] == 1
    assert trace.events_of(EventType.RESOLUTION)[0].payload["success"] is False


# ---------------------------------------------------------------------------
# SD-MAP
# ---------------------------------------------------------------------------

def test_slot_status():
    cal = make_calendar(0, [None, ("b", 1), 2, ("m", 5, [0, 2])])
    model = SdModel()
    new = frozenset({0, 1, 3})
    assert slot_status(cal, 0, new, model) == (SdStatus.PENDING, None)
    assert slot_status(cal, 1, new, model) == (SdStatus.IMPOSSIBLE, None)
    assert slot_status(cal, 2, new, model) == (SdStatus.PENDING, None)
    assert slot_status(cal, 3, new, model) == (SdStatus.PENDING, 5)
    # equally hard meetings are never bumped
    assert slot_status(cal, 3, frozenset({0, 1}), model) == (SdStatus.IMPOSSIBLE, None)
    assert scheduling_difficulty({0, 1, 3}, 0, SdModel(sigma={1: 2.5})) == 3.5


def test_sd_map_sends_no_costs():
    for seed in range(3):
        scenario = generate_scenario(ScenarioParams(
            seed=seed, num_agents=5, num_slots=16, num_meetings=3, num_prior_meetings=2,
            blocked_errand_count=2, cost_mode=CostMode.VARIED,
        ))
        trace = run_game(scenario, build_lineup("sd_map", scenario.num_agents))
        for message in decoded_messages(trace):
            assert message.protocol == ProtocolTag.SD
            assert message.kind in KINDS[ProtocolTag.SD]
            assert set(message.payload) <= {"slot", "status", "bumped_meeting"}


def test_sd_map_bumps_and_repairs_prior_meeting():
    # M5 (agents 0, 2) is easier to move than the new three-person meeting, so slot 0 is bumpable
    scenario = make_scenario(
        layouts=[
            [("m", 5, [0, 2]), ("b", 1), None],
            [None, None, None],
            [("m", 5, [0, 2]), ("b", 1), None],
            [None, None, None],
        ],
        participants=[[0, 1, 3]],
    )
    seats = build_lineup("sd_map", 4)
    trace = run_game(scenario, seats)

    [resolution] = trace.events_of(EventType.RESOLUTION)
    assert resolution.payload["success"] is True
    assert resolution.payload["slot"] == 0
    assert resolution.payload["activated"] == [2]
    assert trace.final_state["per_agent_cost"] == {"0": 1, "1": 0, "2": 1, "3": 0}
    kinds = [m.kind for m in decoded_messages(trace)]
    assert "propose_reschedule" in kinds and "confirm_reschedule" in kinds


def test_sd_map_failed_repair_keeps_prior_slot():
    # agent 2 has no free slot left for M5, so the repair cannot land
    scenario = make_scenario(
        layouts=[
            [("m", 5, [0, 2]), ("b", 1), None],
            [None, None, None],
            [("m", 5, [0, 2]), ("b", 1), ("b", 2)],
            [None, None, None],
        ],
        participants=[[0, 1, 3]],
    )
    seats = build_lineup("sd_map", 4)
    trace = run_game(scenario, seats)

    messages = decoded_messages(trace)
    kinds = [m.kind for m in messages]
    assert kinds.count("propose_reschedule") == 1
    assert "confirm_reschedule" not in kinds
    [failure] = [m for m in messages if m.kind == "fail_reschedule"]
    assert failure.payload["bumped_meeting"] == 5
    assert 5 in seats[0].failed_repairs and 5 in seats[2].failed_repairs

    [resolution] = trace.events_of(EventType.RESOLUTION)
    assert resolution.payload["success"] is False
    assert resolution.payload["reason_code"] == "missing_decision"
    # M5 stays on slot 0 for both of its participants
    assert trace.events_of(EventType.BATCH_APPLIED) == []
    assert trace.final_state["per_agent_cost"] == {"0": 0, "1": 0, "2": 0, "3": 0}


# ---------------------------------------------------------------------------
# DSM
# ---------------------------------------------------------------------------

def test_satisfaction_levels():
    assert satisfaction_for_cost(None, 12) == 0
    assert satisfaction_for_cost(0, 12) == 11
    assert satisfaction_for_cost(1, 12) == 10
    assert satisfaction_for_cost(3, 12) == 8
    assert satisfaction_for_cost(40, 12) == 1
    cal = make_calendar(0, [2, None, ("b", 3)])
    assert [satisfaction(cal, k) for k in range(3)] == [9, 11, 0]


def test_scoring_arithmetic():
    levels = 12
    for s in range(1, levels):
        assert scoring_cost([s], levels) == levels - s - 1
    assert scoring_cost([11, 5, 0], levels) == 6
    assert selection_reward(5, [11, 5, 0], levels) == 6 + 1
    assert selection_reward(11, [11, 5], levels) == 0
    assert selection_reward(0, [0, 5], levels) == 0
    assert flexibility([3, 5, 0]) == 5 + 3 * 3


def test_settlement_is_zero_sum():
    vectors = {1: {0: 11, 1: 5}, 2: {0: 10, 1: 0}}
    result = settle(meeting_id=0, slot=4, vectors=vectors, plan_id=0, levels=12)
    # agent 2 conceded more on the chosen plan, so it alone is rewarded
    assert result.selected == 2
    assert result.reward == 1
    assert result.responder_deltas == {1: -6, 2: 0}
    assert result.initiator_delta == 7 - 1
    assert result.initiator_delta + sum(result.responder_deltas.values()) == 0


def test_settlement_rewards_one_responder():
    result = settle(meeting_id=0, slot=3, vectors={1: {0: 5}, 2: {0: 5}}, plan_id=0, levels=12)
    assert result.selected == 1
    assert result.reward == 6
    assert result.responder_deltas == {1: 0, 2: -6}
    # both costs collected, R paid once
    assert result.initiator_delta == 12 - 6


def test_settlement_flexibility_bonus():
    scores = {0: 8, 1: 9, 2: 10, **{k: 0 for k in range(3, 12)}}
    result = settle(meeting_id=0, slot=0, vectors={1: scores}, plan_id=0, levels=12)
    assert result.reward == (11 - 8) + 2
    assert result.responder_deltas == {1: -6 + 5}
    assert result.initiator_delta == 6 - 5


def test_offer_size():
    assert offer_size([], DSM_WELFARE, 0.5) == 0
    assert offer_size([11] * 12, DSM_WELFARE, 0.5) == 12
    assert offer_size([11] * 12, DSM_PRIVATE, 0.5) == 1
    cal = make_calendar(0, [None, 1, None, 1])
    assert success_estimate(cal, 2) == pytest.approx(0.25)


def test_dsm_welfare_game(two_agent_scenario):
    seats = build_lineup("dsm_welfare", 2)
    trace = run_game(two_agent_scenario, seats)
    [resolution] = trace.events_of(EventType.RESOLUTION)
    assert resolution.payload["success"] is True
    assert resolution.payload["slot"] == 1
    proposals = [m for m in decoded_messages(trace) if m.kind == "proposals"]
    assert [p["slot"] for p in proposals[0].payload["plans"]] == [1, 2, 0]
    # the responder paid 1 for scoring slot 0 below the top level
    assert seats[0].ledger == {0: 1, 1: -1}


def test_dsm_private_offers_only_top_level(two_agent_scenario):
    seats = build_lineup("dsm_private", 2)
    trace = run_game(two_agent_scenario, seats)
    proposals = [m for m in decoded_messages(trace) if m.kind == "proposals"]
    assert [len(p.payload["plans"]) for p in proposals] == [1]
    assert trace.events_of(EventType.RESOLUTION)[0].payload["slot"] == 1


def test_protocol_agents_are_deterministic(three_agent_scenario):
    from memory.trace_store import canonicalize

    for protocol in ("imap", "sd_map", "dsm_welfare", "dsm_private"):
        first = run_game(three_agent_scenario, build_lineup(protocol, 3), game_id="g")
        second = run_game(three_agent_scenario, build_lineup(protocol, 3), game_id="g")
        assert canonicalize(first) == canonicalize(second)
