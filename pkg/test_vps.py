import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from conftest import ScriptedAgent, dm, make_calendar, schedule
from agents.registry import build_lineup
from agents.typed_messages import Plan, Proposals, ProtocolTag, Reply, SdStatus, Score, Scores, TypedMessage
from config import VpsConfig
from core.execution_engine import run_game
from metrics.vps import (
    ReplayContext,
    UpdateEvent,
    VpsTables,
    apply_update,
    feasibility_truth,
    replay_vps,
    round_vps,
    summarize,
    typed_message_to_updates,
)
from scenario.generator import CostMode, ScenarioParams, generate_scenario


def suite(seeds, num_meetings=3):
    return [
        generate_scenario(ScenarioParams(
            seed=seed, num_agents=5, num_slots=16, num_meetings=num_meetings, density=0.8,
            blocked_errand_count=2, cost_mode=CostMode.VARIED,
        ))
        for seed in seeds
    ]


def total_vps(protocol, scenarios):
    total = 0.0
    for scenario in scenarios:
        trace = run_game(scenario, build_lineup(protocol, scenario.num_agents), lineup={"protocol": protocol})
        total += replay_vps(trace).game_summary["vps_loss_total"].iloc[0]
    return total


def test_apply_update_arithmetic():
    beliefs = np.full(4, 0.5)
    updated, before, after = apply_update(beliefs, UpdateEvent(slot=1, evidence=0.85, strength=0.70, source="sd.propose"))
    assert before == 0.5
    assert after == pytest.approx(0.745, abs=1e-12)
    assert updated[1] == pytest.approx(0.745, abs=1e-12)
    assert beliefs[1] == 0.5


def test_fully_resolved_beliefs():
    beliefs = np.array([0.0, 1.0] * 8)
    assert round_vps(beliefs, 0.5) == pytest.approx(8.0, abs=1e-12)
    assert round_vps(np.full(16, 0.5), 0.5) == 0.0


def test_feasibility_truth():
    cal = make_calendar(0, [None, 2, ("b", 1), ("m", 4, [0, 1])])
    assert feasibility_truth(cal).tolist() == [1.0, 1.0, 0.0, 0.0]


def test_dsm_scores_map_through_plan_ids():
    context = ReplayContext(num_slots=16, levels=12)
    offer = TypedMessage.build(ProtocolTag.DSM, 0, Proposals(subround=0, plans=[
        Plan(plan_id=0, slot=3), Plan(plan_id=1, slot=7),
    ]))
    seen = typed_message_to_updates(offer, sender=0, recipient=1, round_index=0, context=context)
    assert [(u.slot, u.evidence) for u in seen] == [(3, 1.0), (7, 1.0)]

    reply = TypedMessage.build(ProtocolTag.DSM, 0, Scores(subround=0, scores=[
        Score(plan_id=0, score=11), Score(plan_id=1, score=0),
    ]))
    scored = typed_message_to_updates(reply, sender=1, recipient=0, round_index=0, context=context)
    assert [(u.slot, u.evidence, u.strength) for u in scored] == [(3, 1.0, 1.0), (7, 0.0, 1.0)]


def test_sd_updates():
    context = ReplayContext(num_slots=16)
    cfg = VpsConfig()
    reply = TypedMessage.build(ProtocolTag.SD, 0, Reply(slot=4, status=SdStatus.IMPOSSIBLE))
    [update] = typed_message_to_updates(reply, 1, 0, 0, context, cfg)
    assert (update.slot, update.evidence, update.strength) == (4, 0.0, 1.0)


def test_imap_responder_discloses_every_slot():
    scenario = suite([11], num_meetings=1)[0]
    trace = run_game(scenario, build_lineup("imap", 5), lineup={"protocol": "imap"})
    pairs = replay_vps(trace).pair_round_vps
    initiator = scenario.meetings[0].initiator
    for responder in scenario.meetings[0].sorted_participants[1:]:
        row = pairs[(pairs["target_agent"] == responder) & (pairs["observer_agent"] == initiator)].iloc[0]
        assert row["vps_loss"] == pytest.approx(8.0, abs=1e-12)
        assert row["observations"] == 16
        # about the initiator, a responder only learns the decided slot
        back = pairs[(pairs["target_agent"] == initiator) & (pairs["observer_agent"] == responder)].iloc[0]
        assert back["vps_loss"] == pytest.approx(0.5, abs=1e-12)
    # agents outside the meeting hear nothing
    outsiders = [a for a in range(5) if a not in scenario.meetings[0].participants]
    assert pairs[pairs["observer_agent"].isin(outsiders)]["vps_loss"].sum() == 0.0


def test_free_text_is_audited(two_agent_scenario):
    agents = [
        ScriptedAgent(0, says={(0, 0): [dm(1, "I am free at slot 1")]}, decisions={0: schedule(0, 1)}),
        ScriptedAgent(1, decisions={0: schedule(0, 1)}),
    ]
    tables = replay_vps(run_game(two_agent_scenario, agents))
    assert tables.audit["free_text"] == 1
    assert tables.belief_evidence.empty
    assert tables.game_summary["vps_loss_total"].iloc[0] == 0.0


def test_excess_floor(three_agent_scenario):
    trace = run_game(three_agent_scenario, build_lineup("imap", 3), lineup={"protocol": "imap"})
    targets = replay_vps(trace, cfg=VpsConfig(excess_floor=1.0)).game_target_summary
    assert len(targets) == 3
    for _, row in targets.iterrows():
        assert row["excess_vps_loss_total"] == pytest.approx(max(0.0, row["vps_loss_total"] - 1.0))


def test_summarize_concatenates(three_agent_scenario, tmp_path):
    trace = run_game(three_agent_scenario, build_lineup("sd_map", 3), lineup={"protocol": "sd_map"})
    tables = summarize([("a.trace.json", trace), ("b.trace.json", trace)])
    assert len(tables.game_summary) == 2
    paths = tables.write(tmp_path)
    assert sorted(p.name for p in paths.values()) == sorted(VpsTables.FILES.values())


def test_protocol_privacy_ordering():
    scenarios = suite(range(4))
    imap = total_vps("imap", scenarios)
    sd = total_vps("sd_map", scenarios)
    welfare = total_vps("dsm_welfare", scenarios)
    private = total_vps("dsm_private", scenarios)
    print(f"\n>>> VPS totals: sd={sd:.2f} private={private:.2f} welfare={welfare:.2f} imap={imap:.2f}")
    assert sd < imap
    assert private < welfare
