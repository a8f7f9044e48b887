import json
import sys
from pathlib import Path

import pandas as pd
import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from benchmark_cli import EXIT_ARENA, EXIT_CONFIG, EXIT_OK, main, parse_seeds, sweep_settings
from core.errors import ConfigError
from memory.trace_store import canonicalize, read_trace


@pytest.fixture
def tiny_suite(tmp_path):
    config = {
        "name": "tiny",
        "grid": {
            "seed": [0, 1, 2],
            "num_agents": 3,
            "num_slots": 6,
            "density": [0.6],
            "num_meetings": 2,
            "participants_per_meeting": 2,
            "num_prior_meetings": 0,
            "blocked_errand_count": [1],
            "cost_mode": ["varied"],
        },
        "lineup": "imap",
    }
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(config))
    return path


def test_parse_seeds():
    assert parse_seeds("0-4") == [0, 1, 2, 3, 4]
    assert parse_seeds("1,3,9") == [1, 3, 9]
    assert parse_seeds("0-1, 7") == [0, 1, 7]
    assert parse_seeds(None) is None


def test_generate_run_report(tiny_suite, tmp_path):
    out = tmp_path / "suite"
    assert main(["generate", "--config", str(tiny_suite), "--out", str(out)]) == EXIT_OK
    scenarios = sorted((out / "scenarios").glob("*.json"))
    assert [p.stem for p in scenarios] == ["varied-seed0", "varied-seed1", "varied-seed2"]

    for protocol in ("imap", "sd_map"):
        code = main(["run", "--config", str(tiny_suite), "--out", str(out), "--lineup", protocol])
        assert code == EXIT_OK
        assert len(list((out / "traces" / protocol).glob("*.trace.json"))) == 3

    report = tmp_path / "report"
    assert main(["report", str(out / "traces"), "--out", str(report)]) == EXIT_OK
    summary = pd.read_csv(report / "model_summary.csv")
    print(f"\n>>> {summary[['protocol', 'task_success', 'excess_vps_per_meeting']].to_string(index=False)}")
    assert sorted(summary["protocol"]) == ["imap", "sd_map"]
    assert len(pd.read_csv(report / "seat_reports.csv")) == 2 * 3 * 3


def test_rerun_writes_identical_traces(tiny_suite, tmp_path):
    out = tmp_path / "suite"
    main(["generate", "--config", str(tiny_suite), "--out", str(out), "--seeds", "0"])
    main(["run", "--config", str(tiny_suite), "--out", str(out), "--lineup", "dsm_private"])
    path = out / "traces" / "dsm_private" / "varied-seed0.trace.json"
    first = read_trace(path)
    main(["run", "--config", str(tiny_suite), "--out", str(out), "--lineup", "dsm_private"])
    second = read_trace(path)
    assert first.game_id == second.game_id
    assert canonicalize(first) == canonicalize(second)


def test_mixed_lineup_is_a_config_error(tiny_suite, tmp_path):
    out = tmp_path / "suite"
    main(["generate", "--config", str(tiny_suite), "--out", str(out)])
    code = main(["run", "--config", str(tiny_suite), "--out", str(out), "--lineup", "imap,sd_map,imap"])
    assert code == EXIT_CONFIG
    assert not (out / "traces").exists()


def test_bad_suite_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"grid": {"seed": [1, 1]}}')
    assert main(["generate", "--config", str(path), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    path.write_text("{not json")
    assert main(["generate", "--config", str(path), "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_missing_label_bank(tiny_suite, tmp_path):
    code = main([
        "generate", "--config", str(tiny_suite), "--out", str(tmp_path / "x"),
        "--label-bank", str(tmp_path / "absent.json"),
    ])
    assert code == EXIT_ARENA


def test_sweep_settings():
    grid = sweep_settings([0.0, 10.0], [4, 12])
    assert sorted(grid) == [
        "dsm_theta0_lmax12", "dsm_theta0_lmax4", "dsm_theta10_lmax12", "dsm_theta10_lmax4",
    ]
    params = grid["dsm_theta10_lmax4"].dsm_welfare
    assert (params.name, params.privacy_weight, params.max_offer) == ("dsm_theta10_lmax4", 10.0, 4)
    with pytest.raises(ConfigError):
        sweep_settings([0.0], [0])


def test_sweep_writes_frontier(tiny_suite, tmp_path):
    out = tmp_path / "suite"
    main(["generate", "--config", str(tiny_suite), "--out", str(out), "--seeds", "0-1"])
    code = main(["sweep", "--config", str(tiny_suite), "--out", str(out), "--theta", "0,10", "--lmax", "12"])
    assert code == EXIT_OK
    frontier = pd.read_csv(out / "sweep" / "frontier.csv")
    assert sorted(frontier["protocol"]) == ["dsm_theta0_lmax12", "dsm_theta10_lmax12"]
    assert (out / "sweep" / "reports" / "dsm_theta10_lmax12" / "seat_reports.csv").exists()
