import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from agents.registry import available_protocols, build_lineup, describe_lineup
from core.execution_engine import run_game
from memory.trace_store import fold_final_state, read_trace, write_trace
from metrics.report import build_report
from scenario.generator import CostMode, ScenarioParams, generate_scenario
from scenario.labels import assign_labels
from utils.data_loader import ArenaDataLoader


def test_pipeline_components(tmp_path):
    out = Path(tmp_path)
    loader = ArenaDataLoader()

    print(">>> Generating scenario...")
    params = ScenarioParams(
        seed=7, num_agents=5, num_slots=16, num_meetings=3, participants_per_meeting=3,
        density=[0.6, 0.8, 1.0, 0.8, 0.6], blocked_errand_count=2, num_prior_meetings=1,
        cost_mode=CostMode.VARIED,
    )
    scenario = assign_labels(generate_scenario(params), loader.load_label_bank())
    print(f"Scenario: {scenario.scenario_id}  optimal={scenario.optimal_cost}  d={float(scenario.difficulty_d):.4f}")
    path = loader.save_scenario(scenario, out / "scenarios" / f"{scenario.scenario_id}.json")
    assert loader.load_scenario(path).to_dict() == scenario.to_dict()

    traces = []
    for protocol in available_protocols():
        print(f"\n>>> Running {protocol}...")
        trace = run_game(
            scenario, build_lineup(protocol, scenario.num_agents),
            lineup=describe_lineup(protocol, scenario.num_agents),
        )
        state = trace.final_state
        print(f"Succeeded: {state['rounds_succeeded']}/{scenario.num_meetings}  cost={state['total_cost']}")
        assert fold_final_state(trace.events, scenario.num_agents) == state
        assert state["rounds_succeeded"] + state["rounds_failed"] == scenario.num_meetings
        traces.append(write_trace(trace, out / "traces" / protocol / f"{scenario.scenario_id}.trace.json"))

    print("\n>>> Scoring traces...")
    tables = build_report(traces)
    tables.write(out / "report")
    print(tables.model_summary.to_string(index=False))

    assert sorted(tables.model_summary["protocol"]) == sorted(available_protocols())
    assert len(tables.seats) == len(traces) * scenario.num_agents
    assert (tables.model_summary["adjusted_excess_cost"] >= 0).all()
    assert (tables.seats["vps_total"] >= 0).all()
    assert read_trace(traces[0]).game_id

    print("\n>>> Verification SUCCESS!")


if __name__ == "__main__":
    test_pipeline_components(Path("runs") / "headless")
