"""
Calendar Arena CLI - generate suites, run games, report metrics, sweep DSM settings.

Exit codes: 0 success, 1 benchmark error, 2 configuration error, 3 engine defect.
"""

import argparse
import sys
import uuid
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

sys.path.insert(0, str(Path(__file__).parent))

import pandas as pd
from loguru import logger
from rich.box import ROUNDED
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from agents.registry import build_lineup, describe_lineup, validate_lineup
from config import Settings, settings
from core.errors import ArenaError, ConfigError
from core.execution_engine import run_game
from memory.trace_store import write_trace
from metrics.diagnostics import failure_mode_counts, first_speaker_summary
from metrics.evaluation import frontier
from metrics.report import ReportTables, build_report
from scenario.generator import Scenario, bucket_difficulty, generate_scenario, suite_tertiles
from scenario.labels import assign_labels
from utils.data_loader import ArenaDataLoader, SuiteConfig

console = Console()

EXIT_OK, EXIT_ARENA, EXIT_CONFIG, EXIT_DEFECT = 0, 1, 2, 3
GAME_NAMESPACE = uuid.uuid5(uuid.NAMESPACE_URL, "calendar-arena")


def configure_logging(level: str):
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format="<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | {message}")


def game_id_for(scenario: Scenario, protocol: str) -> str:
    """Stable game id so repeated runs write identical traces."""
    return str(uuid.uuid5(GAME_NAMESPACE, f"{scenario.scenario_id}/{protocol}"))


def parse_seeds(text: Optional[str]) -> Optional[List[int]]:
    """'0-4' or '1,3,9' -> seed list."""
    if not text:
        return None
    seeds: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            low, high = part.split("-", 1)
            seeds.extend(range(int(low), int(high) + 1))
        elif part:
            seeds.append(int(part))
    return seeds


def load_suite(args) -> SuiteConfig:
    loader = ArenaDataLoader()
    suite = loader.load_suite_config(args.config) if args.config else SuiteConfig()
    grid_updates = {}
    seeds = parse_seeds(getattr(args, "seeds", None))
    if seeds is not None:
        grid_updates["seed"] = seeds
    if getattr(args, "cost_mode", None):
        grid_updates["cost_mode"] = [args.cost_mode]
    data = suite.model_dump()
    data["grid"].update(grid_updates)
    if getattr(args, "lineup", None):
        data["lineup"] = args.lineup.split(",") if "," in args.lineup else args.lineup
    try:
        return SuiteConfig.model_validate(data)
    except ValueError as e:
        raise ConfigError(f"suite overrides rejected: {e}") from e


def suite_dir(args, suite: SuiteConfig) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return suite.resolved_output_dir(Path(args.output_root) if args.output_root else None)


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def generate_suite(suite: SuiteConfig, out_dir: Path, label_bank: Optional[Path] = None) -> List[Path]:
    """Write one scenario file per task, labelled and difficulty-bucketed."""
    loader = ArenaDataLoader()
    bank = loader.load_label_bank(label_bank)
    scenarios = [assign_labels(generate_scenario(params), bank) for params in suite.grid.tasks()]
    thresholds = settings.difficulty.thresholds or suite_tertiles([s.difficulty_d for s in scenarios])
    paths = []
    for scenario in scenarios:
        scenario.difficulty_bucket = bucket_difficulty(scenario.difficulty_d, thresholds)
        paths.append(loader.save_scenario(scenario, out_dir / "scenarios" / f"{scenario.scenario_id}.json"))
    logger.info(f"[CLI] Generated {len(paths)} scenario(s) into {out_dir / 'scenarios'}")
    return paths


def cmd_generate(args) -> int:
    suite = load_suite(args)
    out = suite_dir(args, suite)
    with console.status("[bold cyan]Generating scenarios...", spinner="dots"):
        paths = generate_suite(suite, out, args.label_bank)
    scenarios = [ArenaDataLoader().load_scenario(p) for p in paths]

    table = Table(title="Difficulty buckets", box=ROUNDED, border_style="cyan")
    table.add_column("Cost mode", style="cyan")
    table.add_column("Bucket", style="yellow")
    table.add_column("Tasks", style="green", justify="right")
    counts = pd.DataFrame(
        [{"mode": s.params.cost_mode.value, "bucket": s.difficulty_bucket.value} for s in scenarios],
        columns=["mode", "bucket"],
    ).value_counts().sort_index()
    for (mode, bucket), n in counts.items():
        table.add_row(mode, bucket, str(n))
    console.print(table)
    console.print(f"  [green]✓ Wrote[/green] {len(paths)} scenario file(s) to [bold]{out / 'scenarios'}[/bold]")
    return EXIT_OK


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def run_task(task: Tuple[str, object, str, Settings]) -> str:
    """Play one scenario with one lineup; returns the trace path. Runs in a worker process."""
    scenario_path, lineup, trace_path, cfg = task
    scenario = ArenaDataLoader().load_scenario(scenario_path)
    agents = build_lineup(lineup, scenario.num_agents, cfg)
    meta = describe_lineup(lineup, scenario.num_agents, cfg)
    trace = run_game(scenario, agents, config=cfg.engine, game_id=game_id_for(scenario, meta["protocol"]), lineup=meta)
    write_trace(trace, trace_path)
    return trace_path


def run_suite(
    scenario_paths: Sequence[Path],
    lineup,
    out_dir: Path,
    workers: int = 1,
    cfg: Optional[Settings] = None,
) -> List[Path]:
    """Run every scenario with `lineup`; one trace file per game under out_dir/traces/<protocol>/."""
    cfg = cfg or settings
    if not scenario_paths:
        return []
    loader = ArenaDataLoader()
    first = loader.load_scenario(scenario_paths[0])
    validate_lineup(lineup, first.num_agents)
    protocol = describe_lineup(lineup, first.num_agents, cfg)["protocol"]
    trace_dir = out_dir / "traces" / protocol
    tasks = [
        (str(path), lineup, str(trace_dir / f"{Path(path).stem}.trace.json"), cfg)
        for path in scenario_paths
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(run_task, tasks))
    else:
        done = [run_task(task) for task in tasks]
    logger.info(f"[CLI] {protocol}: {len(done)} trace(s) in {trace_dir}")
    return [Path(p) for p in done]


def cmd_run(args) -> int:
    suite = load_suite(args)
    out = suite_dir(args, suite)
    scenario_dir = Path(args.scenarios) if args.scenarios else out / "scenarios"
    paths = ArenaDataLoader.list_files(scenario_dir, "*.json")
    cfg = settings.model_copy(update={"engine": suite.engine})
    with console.status(f"[bold magenta]Running {len(paths)} game(s)...", spinner="dots"):
        traces = run_suite(paths, suite.lineup, out, workers=args.workers, cfg=cfg)
    console.print(f"  [green]✓ Wrote[/green] {len(traces)} trace(s) under [bold]{out / 'traces'}[/bold]")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def collect_traces(inputs: Sequence[str]) -> List[Path]:
    paths: List[Path] = []
    for item in inputs:
        path = Path(item)
        if path.is_dir():
            paths.extend(sorted(path.rglob("*.trace.json")))
        elif path.exists():
            paths.append(path)
        else:
            raise ConfigError(f"No such trace file or directory: {path}")
    return paths


def print_summary(tables: ReportTables):
    table = Table(title="Model summary", box=ROUNDED, border_style="cyan")
    columns = ["protocol", "cost_mode", "seats", "task_success", "adjusted_excess_cost", "comm_efficiency",
               "fairness", "excess_vps_per_meeting"]
    for column in columns:
        table.add_column(column, style="cyan" if column in ("protocol", "cost_mode") else "white")
    for _, row in tables.model_summary.iterrows():
        table.add_row(*[f"{row[c]:.3f}" if isinstance(row[c], float) else str(row[c]) for c in columns])
    console.print(table)

    if not tables.failure_modes.empty:
        modes = Table(title="Failure modes", box=ROUNDED, border_style="red")
        for column in ("protocol", "mode", "count"):
            modes.add_column(column)
        for _, row in failure_mode_counts(tables.failure_modes).iterrows():
            modes.add_row(str(row["protocol"]), str(row["mode"]), str(row["count"]))
        console.print(modes)

    speakers = first_speaker_summary(tables.first_speaker)
    if not speakers.empty:
        order = Table(title="Speaking position", box=ROUNDED, border_style="blue")
        for column in speakers.columns:
            order.add_column(column)
        for _, row in speakers.iterrows():
            order.add_row(*[f"{v:.3f}" if isinstance(v, float) else str(v) for v in row])
        console.print(order)


def cmd_report(args) -> int:
    traces = collect_traces(args.traces)
    out = Path(args.out) if args.out else Path(args.output_root or settings.output_root) / "report"
    with console.status(f"[bold green]Scoring {len(traces)} trace(s)...", spinner="dots"):
        tables = build_report(traces)
        tables.write(out)
    if not tables.model_summary.empty:
        print_summary(tables)
    console.print(f"  [green]✓ Wrote[/green] report tables to [bold]{out}[/bold]")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def sweep_settings(thetas: Sequence[float], max_offers: Sequence[int], base: Optional[Settings] = None) -> Dict[str, Settings]:
    """One Settings per (privacy weight, max offer), each with a tagged dsm_welfare preset."""
    base = base or settings
    grid = {}
    for theta in thetas:
        for l_max in max_offers:
            tag = f"dsm_theta{theta:g}_lmax{l_max}"
            params = base.dsm_welfare.model_copy(update={"name": tag, "privacy_weight": float(theta), "max_offer": int(l_max)})
            if params.min_offer > params.max_offer:
                raise ConfigError(f"{tag}: max_offer below min_offer {params.min_offer}")
            grid[tag] = base.model_copy(update={"dsm_welfare": params})
    return grid


def cmd_sweep(args) -> int:
    suite = load_suite(args)
    out = suite_dir(args, suite)
    scenario_dir = Path(args.scenarios) if args.scenarios else out / "scenarios"
    paths = ArenaDataLoader.list_files(scenario_dir, "*.json")
    thetas = [float(t) for t in args.theta.split(",")] if args.theta else suite.sweep_privacy_weight
    l_maxes = [int(v) for v in args.lmax.split(",")] if args.lmax else suite.sweep_max_offer
    sweep_root = out / "sweep"
    points = []
    for tag, cfg in sweep_settings(thetas, l_maxes, settings.model_copy(update={"engine": suite.engine})).items():
        with console.status(f"[bold magenta]{tag}: {len(paths)} game(s)...", spinner="dots"):
            traces = run_suite(paths, "dsm_welfare", sweep_root, workers=args.workers, cfg=cfg)
            tables = build_report(traces)
        tables.write(sweep_root / "reports" / tag)
        points.append(tables.model_summary)
        console.print(f"  [green]✓[/green] {tag}")
    summary = pd.concat(points, ignore_index=True) if points else pd.DataFrame()
    points_table = frontier(summary)
    ArenaDataLoader.write_table(summary, sweep_root / "model_summary.csv")
    ArenaDataLoader.write_table(points_table, sweep_root / "frontier.csv")
    console.print(f"  [green]✓ Wrote[/green] {len(points_table)} frontier point(s) to [bold]{sweep_root / 'frontier.csv'}[/bold]")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="calendar-arena", description="Multi-agent calendar scheduling benchmark")
    parser.add_argument("--log-level", default=settings.log_level, help="loguru level (default from CALARENA_LOG_LEVEL)")
    parser.add_argument("--output-root", default=None, help="Output root (default from CALARENA_OUTPUT_ROOT)")
    sub = parser.add_subparsers(dest="command", required=True)

    def suite_args(p: argparse.ArgumentParser):
        p.add_argument("--config", default=None, help="Suite config JSON")
        p.add_argument("--seeds", default=None, help="Seed override, e.g. 0-44 or 1,3,9")
        p.add_argument("--cost-mode", choices=["uniform", "varied"], default=None)
        p.add_argument("--out", default=None, help="Suite output directory")

    gen = sub.add_parser("generate", help="Generate a scenario suite")
    suite_args(gen)
    gen.add_argument("--label-bank", default=None, help="Label bank JSON (default data/label_bank.json)")
    gen.set_defaults(func=cmd_generate)

    run = sub.add_parser("run", help="Run every scenario with one protocol lineup")
    suite_args(run)
    run.add_argument("--lineup", default=None, help="Protocol for every seat, or a comma list per seat")
    run.add_argument("--scenarios", default=None, help="Scenario directory (default <out>/scenarios)")
    run.add_argument("--workers", type=int, default=1)
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="Compute metrics, VPS and diagnostics from traces")
    rep.add_argument("traces", nargs="+", help="Trace files or directories")
    rep.add_argument("--out", default=None)
    rep.set_defaults(func=cmd_report)

    sweep = sub.add_parser("sweep", help="Run the DSM privacy-weight x max-offer grid")
    suite_args(sweep)
    sweep.add_argument("--scenarios", default=None)
    sweep.add_argument("--theta", default=None, help="Comma list of privacy weights")
    sweep.add_argument("--lmax", default=None, help="Comma list of max offer sizes")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    console.print(Panel("[bold]CALENDAR ARENA[/bold]", border_style="cyan", padding=(0, 2)))
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(f"[CLI] Configuration error: {e}")
        console.print(f"[bold red]Configuration error:[/bold red] {e}")
        return EXIT_CONFIG
    except ArenaError as e:
        logger.error(f"[CLI] {type(e).__name__}: {e}")
        console.print(f"[bold red]{type(e).__name__}:[/bold red] {e}")
        return EXIT_ARENA
    except Exception as e:
        logger.exception(f"[CLI] Engine defect: {e}")
        console.print(f"[bold red]Engine defect:[/bold red] {e}")
        return EXIT_DEFECT


if __name__ == "__main__":
    sys.exit(main())
