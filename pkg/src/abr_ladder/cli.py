"""Command-line interface for abr-ladder."""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from abr_ladder import __version__
from abr_ladder.baselines import BaselineSpec, build_baseline, parse_baseline_spec
from abr_ladder.errors import LadderOptimizerError, MismatchedInputError
from abr_ladder.optimizer import SolverConfig, build_problem, default_starts, fit_ladder, solve
from abr_ladder.output import (
    BaselineComparison,
    ChunkSummary,
    CorpusReport,
    save_csv,
    save_json,
)
from abr_ladder.player_model import (
    Ladder,
    check_ladder_against_model,
    evaluate,
    load_ladder,
    viewing_probabilities,
)
from abr_ladder.region import (
    RqPoint,
    achievable_region,
    contains,
    operating_points,
    upper_hull,
    upper_hull_points,
)
from abr_ladder.rq_model import ChunkRqModel, load_chunk_model
from abr_ladder.simulator import SimConfig, SimReport, compare, per_resolution_change, simulate
from abr_ladder.stats_ingest import (
    BandwidthDistribution,
    ViewportDistribution,
    load_distributions,
    read_trace_file,
    save_distributions,
)
from abr_ladder.synthetic import synth_corpus

logger = logging.getLogger(__name__)

DEFAULT_BASELINES = ("fixed:crf23", "hull:crf23")

DEFAULT_OUTPUT_DIR = Path("out")

SMOOTHING_ALIASES = {"step": "step", "linear": "piecewise_linear", "piecewise_linear": "piecewise_linear"}


@dataclass
class RunManifest:
    """Inputs of an optimize or simulate run.

    Attributes:
        chunk_paths: RQ model files, one per chunk
        trace_path: Raw trace file (ingested on the fly)
        distributions_path: Distributions file written by ``ingest``
        baselines: Baseline specs such as "fixed:crf23"
        solver: Solver settings
        sim: Simulation settings
        output_dir: Directory receiving all outputs
    """

    chunk_paths: list[Path]
    trace_path: Optional[Path] = None
    distributions_path: Optional[Path] = None
    baselines: list[str] = field(default_factory=lambda: list(DEFAULT_BASELINES))
    solver: SolverConfig = field(default_factory=SolverConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    output_dir: Path = DEFAULT_OUTPUT_DIR

    def validate(self) -> None:
        """Check that every referenced input exists and the output directory is usable.

        Raises:
            FileNotFoundError: If an input file is missing
            ValueError: If the distribution source is ambiguous or a baseline is malformed
        """
        if not self.chunk_paths:
            raise ValueError("No chunk model files given")
        if (self.trace_path is None) == (self.distributions_path is None):
            raise ValueError("Give exactly one of a trace file or a distributions file")
        for path in [*self.chunk_paths, self.trace_path, self.distributions_path]:
            if path is not None and not Path(path).exists():
                raise FileNotFoundError(f"File not found: {path}")
        for text in self.baselines:
            parse_baseline_spec(text)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        if not os.access(self.output_dir, os.W_OK):
            raise PermissionError(f"Output directory is not writable: {self.output_dir}")

    def load_distributions(self) -> tuple[ViewportDistribution, BandwidthDistribution]:
        if self.distributions_path is not None:
            return load_distributions(self.distributions_path)
        ingest = read_trace_file(self.trace_path)
        print(f"Ingested {ingest.records_read} trace records ({ingest.records_skipped} skipped)")
        return ingest.viewport, ingest.bandwidth

    def to_dict(self) -> dict:
        return {
            "chunks": [str(p) for p in self.chunk_paths],
            "traces": str(self.trace_path) if self.trace_path else None,
            "distributions": str(self.distributions_path) if self.distributions_path else None,
            "baselines": self.baselines,
            "solver": asdict(self.solver),
            "sim": asdict(self.sim),
            "output_dir": str(self.output_dir),
        }


def load_manifest(file_path: Path, output_dir: Optional[Path] = None) -> RunManifest:
    """Read a manifest JSON file; relative paths resolve against its directory."""
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")
    data = json.loads(file_path.read_text(encoding="utf-8"))
    base = file_path.parent

    def resolve(value):
        return None if value is None else base / value

    try:
        return RunManifest(
            chunk_paths=[resolve(p) for p in data["chunks"]],
            trace_path=resolve(data.get("traces")),
            distributions_path=resolve(data.get("distributions")),
            baselines=list(data.get("baselines", DEFAULT_BASELINES)),
            solver=SolverConfig(**data.get("solver", {})),
            sim=SimConfig(**data.get("sim", {})),
            output_dir=output_dir or resolve(data.get("output_dir", "out")),
        )
    except KeyError as e:
        raise ValueError(f"Manifest is missing field {e}") from e


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


AUTO_Q0 = "auto"


def _parse_q0(text: str) -> float | str:
    if text.lower() == AUTO_Q0:
        return AUTO_Q0
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}") from None


def _parse_point(text: str) -> RqPoint:
    try:
        rate, quality = (float(v) for v in text.split(","))
        return RqPoint(rate, quality)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected RATE,QUALITY, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abr-ladder",
        description="Optimize adaptive-streaming encoding ladders against viewer statistics",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Generate a synthetic corpus
  abr-ladder synth --output-dir corpus --chunks 20

  # Build viewport/bandwidth distributions from traces
  abr-ladder ingest corpus/traces.csv --output-dir out

  # Optimize every chunk against both baselines
  abr-ladder optimize corpus/chunks/*.json --distributions out/distributions.json --output-dir out

  # Simulate playback of the produced ladders
  abr-ladder simulate corpus/chunks/chunk_000.json --distributions out/distributions.json \\
      --ladder out/ladders/chunk_000 --output-dir out

  # Show version
  abr-ladder --version
        """,
    )
    parser.add_argument("--version", action="version", version=f"abr-ladder {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--output-dir", type=Path, help="Output directory (default: out, or the manifest's)"
    )
    common.add_argument(
        "--jobs",
        type=int,
        default=os.cpu_count() or 1,
        help="Parallel chunk workers (default: number of cores)",
    )
    common.add_argument("--seed", type=int, help="Random seed (default: 0, or the manifest's)")
    common.add_argument("-v", "--verbose", action="store_true", help="Enable debug logging")

    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("chunks", type=Path, nargs="*", help="RQ model files, one per chunk")
    inputs.add_argument("--manifest", type=Path, help="Run manifest JSON (replaces positional inputs)")
    source = inputs.add_mutually_exclusive_group()
    source.add_argument("--traces", type=Path, help="Raw trace file (CSV or JSON lines)")
    source.add_argument("--distributions", type=Path, help="Distributions file written by ingest")

    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    ingest_parser = subparsers.add_parser(
        "ingest", parents=[common], help="Build viewport and bandwidth distributions from traces"
    )
    ingest_parser.add_argument("trace", type=Path, help="Trace file (CSV or JSON lines, optionally .gz)")
    ingest_parser.add_argument(
        "-o", "--output", type=Path, help="Output file (default: OUTPUT_DIR/distributions.json)"
    )

    optimize_parser = subparsers.add_parser(
        "optimize", parents=[common, inputs], help="Optimize the ladder of every chunk"
    )
    optimize_parser.add_argument(
        "--baseline",
        action="append",
        help="Baseline spec, repeatable: fixed[:LABEL] or hull[:LOW:HIGH][:LABEL] "
        f"(default: {' and '.join(DEFAULT_BASELINES)})",
    )
    optimize_parser.add_argument(
        "--q0",
        type=_parse_q0,
        help="Quality floor, or 'auto' to hold each optimized ladder to its baseline's quality (default: auto)",
    )
    optimize_parser.add_argument("--starts", type=int, help="Jittered starts per chunk (default: 8)")
    optimize_parser.add_argument("--max-iters", type=int, help="Evaluations per start and phase (default: 500)")
    optimize_parser.add_argument(
        "--min-gap-bps", type=float, help="Minimum gap between consecutive bitrates (default: 1000)"
    )
    optimize_parser.add_argument(
        "--cdf-smoothing",
        choices=sorted(SMOOTHING_ALIASES),
        help="Bandwidth CDF used while optimizing (default: linear)",
    )

    simulate_parser = subparsers.add_parser(
        "simulate", parents=[common, inputs], help="Simulate playback of ladders"
    )
    simulate_parser.add_argument(
        "--ladder",
        type=Path,
        action="append",
        required=True,
        help="Ladder JSON file or directory of ladder files, repeatable",
    )
    simulate_parser.add_argument("--sessions", type=int, help="Playback sessions (default: 1000)")
    simulate_parser.add_argument("--segments", type=int, help="Segments per session (default: 120)")
    simulate_parser.add_argument(
        "--resample-per-segment",
        action=argparse.BooleanOptionalAction,
        help="Draw a new bandwidth every segment (default: on)",
    )
    simulate_parser.add_argument(
        "--compare-to",
        help="Compare every ladder against this one (default: each optimized_NAME against NAME)",
    )

    region_parser = subparsers.add_parser(
        "region", parents=[common], help="Achievable rate-quality region of a ladder"
    )
    region_parser.add_argument("chunk", type=Path, help="RQ model file")
    region_parser.add_argument("--ladder", type=Path, help="Ladder JSON file (default: the --baseline ladder)")
    region_parser.add_argument(
        "--baseline", default="fixed:crf23", help="Baseline used when no ladder is given (default: fixed:crf23)"
    )
    region_parser.add_argument(
        "--point", type=_parse_point, action="append", default=[], help="RATE,QUALITY point to test, repeatable"
    )

    synth_parser = subparsers.add_parser("synth", parents=[common], help="Write a synthetic corpus")
    synth_parser.add_argument("--chunks", type=int, default=20, help="Number of chunks (default: 20)")
    synth_parser.add_argument("--traces", type=int, default=100_000, help="Number of trace records (default: 100000)")

    return parser


def main(argv: Optional[list[str]] = None) -> None:
    """Main entry point for the CLI."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.output_dir is None and not getattr(args, "manifest", None):
        args.output_dir = DEFAULT_OUTPUT_DIR

    commands = {
        "ingest": cmd_ingest,
        "optimize": cmd_optimize,
        "simulate": cmd_simulate,
        "region": cmd_region,
        "synth": cmd_synth,
    }
    try:
        code = commands[args.command](args)
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)
    if code:
        sys.exit(code)


def _override(config, **values):
    """Copy of ``config`` with the options given on the command line replaced."""
    given = {name: value for name, value in values.items() if value is not None}
    return replace(config, **given) if given else config


def _manifest_from_args(args: argparse.Namespace) -> RunManifest:
    """Manifest from --manifest or positional inputs; explicit flags override its settings."""
    if args.manifest:
        manifest = load_manifest(args.manifest, output_dir=args.output_dir)
    else:
        manifest = RunManifest(
            chunk_paths=list(args.chunks),
            trace_path=args.traces,
            distributions_path=args.distributions,
            output_dir=args.output_dir,
        )
    if getattr(args, "baseline", None):
        manifest.baselines = list(args.baseline)
    if args.command == "optimize":
        manifest.solver = _override(
            manifest.solver,
            starts=args.starts,
            seed=args.seed,
            max_iters=args.max_iters,
            min_gap_bps=args.min_gap_bps,
            cdf_smoothing=SMOOTHING_ALIASES.get(args.cdf_smoothing),
        )
        if args.q0 is not None:
            manifest.solver = replace(manifest.solver, q0=None if args.q0 == AUTO_Q0 else args.q0)
    if args.command == "simulate":
        manifest.sim = _override(
            manifest.sim,
            num_sessions=args.sessions,
            segments_per_session=args.segments,
            seed=args.seed,
            resample_bandwidth_per_segment=args.resample_per_segment,
        )
    manifest.validate()
    return manifest


# ---------------------------------------------------------------------------
# ingest / synth
# ---------------------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    """Read a trace file and write its distributions JSON."""
    print(f"Reading {args.trace}...")
    ingest = read_trace_file(args.trace)
    output = args.output or args.output_dir / "distributions.json"
    save_distributions(ingest.viewport, ingest.bandwidth, output)

    print(f"Records read: {ingest.records_read}")
    print(f"Records skipped: {ingest.records_skipped}")
    print("Viewport distribution:")
    for height, prob in ingest.viewport.items():
        print(f"  {height:>5}p  {prob:.4f}")
    print(f"Bandwidth: {ingest.bandwidth.support.size} distinct values, mean {ingest.bandwidth.mean():.0f} bps")
    print(f"\nDistributions saved to {output}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    """Write a synthetic corpus of chunk models and traces."""
    corpus = synth_corpus(
        args.output_dir,
        num_chunks=args.chunks,
        num_traces=args.traces,
        seed=args.seed if args.seed is not None else 0,
    )
    print(f"Wrote {len(corpus.chunk_paths)} chunk models to {args.output_dir / 'chunks'}")
    print(f"Wrote {args.traces} trace records to {corpus.trace_path}")
    return 0


# ---------------------------------------------------------------------------
# optimize
# ---------------------------------------------------------------------------


@dataclass
class ChunkOutcome:
    """Everything one chunk's optimization produced."""

    chunk_id: str
    summary: Optional[ChunkSummary] = None
    payload: dict = field(default_factory=dict)
    ladders: dict[str, Ladder] = field(default_factory=dict)
    error: Optional[str] = None


OPTIMIZED_PREFIX = "optimized_"


def optimize_chunk(
    model: ChunkRqModel,
    vd: ViewportDistribution,
    bd: BandwidthDistribution,
    baselines: list[BaselineSpec],
    config: SolverConfig,
) -> ChunkOutcome:
    """Build each baseline and optimize one ladder against it.

    Each optimized ladder keeps its baseline's resolutions and, unless
    ``config.q0`` is set, is held to that baseline's delivered quality. The
    baseline itself is always one of the starts, so the result never costs
    more than the baseline. Baselines are first fitted to the solver's
    minimum bitrate gap.
    """
    ladders = {
        spec.name: fit_ladder(build_baseline(model, spec), model, config.min_gap_bps)
        for spec in baselines
    }
    comparisons = {}
    payload: dict = {"chunk_id": model.chunk_id, "optimized": {}, "baselines": {}}
    produced: dict[str, Ladder] = {}
    for name, ladder in ladders.items():
        problem = build_problem(
            model,
            vd,
            bd,
            config,
            reference=ladder,
            resolutions=ladder.resolutions,
            witnesses=list(ladders.values()),
        )
        result = solve(problem, default_starts(problem, [ladder], config), config)
        ev = problem.evaluate(ladder.bitrates)
        step_ev = evaluate(ladder, model, vd, bd.with_smoothing("step"))
        comparisons[name] = BaselineComparison(
            avg_bitrate=ev.avg_bitrate,
            avg_quality=ev.avg_quality,
            optimized_avg_bitrate=result.evaluation.avg_bitrate,
            optimized_avg_quality=result.evaluation.avg_quality,
            q0=result.quality_floor,
            converged=result.converged,
            per_resolution_change=per_resolution_change(result.ladder, ladder),
        )
        payload["optimized"][name] = result.to_dict()
        payload["baselines"][name] = {
            "ladder": ladder.to_dict(),
            "evaluation": ev.to_dict(),
            "step_evaluation": step_ev.to_dict(),
        }
        produced[f"{OPTIMIZED_PREFIX}{name}"] = result.ladder
        produced[name] = ladder

    summary = ChunkSummary(chunk_id=model.chunk_id, baselines=comparisons)
    payload["comparison"] = summary.to_dict()["baselines"]
    return ChunkOutcome(
        chunk_id=model.chunk_id,
        summary=summary,
        payload=payload,
        ladders=produced,
    )


def _optimize_path(
    path: Path,
    vd: ViewportDistribution,
    bd: BandwidthDistribution,
    baselines: list[BaselineSpec],
    config: SolverConfig,
) -> ChunkOutcome:
    try:
        model = load_chunk_model(path)
    except (OSError, ValueError) as e:
        return ChunkOutcome(chunk_id=Path(path).stem, error=str(e))
    try:
        return optimize_chunk(model, vd, bd, baselines, config)
    except (LadderOptimizerError, ValueError, KeyError) as e:
        return ChunkOutcome(chunk_id=model.chunk_id, error=str(e))


def cmd_optimize(args: argparse.Namespace) -> int:
    """Optimize every chunk of a manifest and write the corpus report."""
    manifest = _manifest_from_args(args)
    vd, bd = manifest.load_distributions()
    baselines = [parse_baseline_spec(text) for text in manifest.baselines]
    config = manifest.solver
    paths = manifest.chunk_paths
    out = manifest.output_dir

    print(f"Optimizing {len(paths)} chunk(s) with {max(args.jobs, 1)} worker(s)...")
    tasks = [(p, vd, bd, baselines, config) for p in paths]
    if args.jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_optimize_path, *zip(*tasks)))
    else:
        outcomes = [_optimize_path(*task) for task in tasks]

    report = CorpusReport()
    for outcome in outcomes:
        if outcome.error is not None:
            print(f"  {outcome.chunk_id}: FAILED - {outcome.error}")
            report.failures.append({"chunk_id": outcome.chunk_id, "error": outcome.error})
            continue
        save_json(outcome.payload, out / "results" / f"{outcome.chunk_id}.json")
        for name, ladder in outcome.ladders.items():
            save_json(ladder, out / "ladders" / outcome.chunk_id / f"{name}.json")
        row = outcome.summary
        report.rows.append(row)
        print(f"  {row.chunk_id}:")
        for name, comp in row.baselines.items():
            status = "" if comp.converged else " (not converged)"
            print(
                f"    vs {name}: R={comp.optimized_avg_bitrate:.0f} bps "
                f"({comp.relative_bitrate_change:+.2%}), Q={comp.optimized_avg_quality:.4f} "
                f"(floor {comp.q0:.4f}){status}"
            )

    save_csv(report.to_frame(), out / "corpus.csv")
    save_json(report, out / "corpus_report.json")
    save_json(manifest.to_dict(), out / "manifest.json")

    print("\nAggregate:")
    for name in report.baseline_names:
        print(
            f"  vs {name}: bitrate {report.aggregate_relative_change(name):+.2%}, "
            f"quality {report.aggregate_quality_delta(name):+.4f}"
        )
        for resolution, q in report.per_resolution_quartiles(name).items():
            print(
                f"    {resolution:>5}p  median {q['median']:+.1%}  "
                f"IQR [{q['q1']:+.1%}, {q['q3']:+.1%}]"
            )
    print(f"\nResults saved to {out}")

    failed = bool(report.failures) or not all(r.converged for r in report.rows)
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _collect_ladders(paths: list[Path]) -> dict[str, dict[str, Ladder]]:
    """Ladders grouped by chunk id, named by file stem."""
    files: list[Path] = []
    for path in paths:
        files.extend(sorted(Path(path).glob("*.json")) if Path(path).is_dir() else [Path(path)])
    grouped: dict[str, dict[str, Ladder]] = {}
    for file in files:
        ladder = load_ladder(file)
        if ladder.chunk_id is None:
            raise MismatchedInputError(f"Ladder {file} has no chunk_id")
        grouped.setdefault(ladder.chunk_id, {})[file.stem] = ladder
    return grouped


def lambda_table(ladder: Ladder, analytic: np.ndarray, empirical: np.ndarray) -> pd.DataFrame:
    """Analytic against simulated viewing probability per ladder entry."""
    return pd.DataFrame(
        {
            "resolution": ladder.resolutions,
            "bitrate": ladder.bitrates,
            "analytic": analytic,
            "empirical": empirical,
            "abs_diff": np.abs(analytic - empirical),
        }
    )


def comparison_groups(
    reports: dict[str, SimReport], compare_to: Optional[str] = None
) -> dict[str, dict[str, SimReport]]:
    """Reports to compare, keyed by the baseline each group is measured against.

    Without ``compare_to``, every ``optimized_<name>`` report is paired with
    the ``<name>`` report it was optimized against. When there are no such
    pairs, or ``compare_to`` is given, all reports form one group measured
    against ``compare_to`` (default: "fixed", else the first).
    """
    if len(reports) < 2:
        return {}
    if compare_to is None:
        pairs = {
            name: {name: reports[name], optimized: reports[optimized]}
            for name in reports
            if (optimized := f"{OPTIMIZED_PREFIX}{name}") in reports
        }
        if pairs:
            return pairs
    baseline = compare_to or ("fixed" if "fixed" in reports else next(iter(reports)))
    return {baseline: reports}


def cmd_simulate(args: argparse.Namespace) -> int:
    """Simulate each supplied ladder against its chunk and compare them."""
    manifest = _manifest_from_args(args)
    vd, bd = manifest.load_distributions()
    bd = bd.with_smoothing("step")
    models = {m.chunk_id: m for m in (load_chunk_model(p) for p in manifest.chunk_paths)}
    grouped = _collect_ladders(args.ladder)
    out = manifest.output_dir

    for chunk_id, ladders in grouped.items():
        if chunk_id not in models:
            raise MismatchedInputError(f"No chunk model for ladder chunk {chunk_id!r}")
        model = models[chunk_id]
        print(f"\n{chunk_id}:")
        reports = {}
        for name, ladder in ladders.items():
            check_ladder_against_model(ladder, model)
            report = simulate(ladder, model, vd, bd, manifest.sim)
            reports[name] = report
            table = lambda_table(
                ladder, viewing_probabilities(ladder, vd, bd), report.empirical_lambda
            )
            save_json(
                {**report.to_dict(), "lambda_table": table.to_dict(orient="records")},
                out / "simulations" / chunk_id / f"{name}.json",
            )
            print(
                f"  {name}: R={report.empirical_avg_bitrate:.0f} bps, "
                f"Q={report.empirical_avg_quality:.4f}, "
                f"{report.switch_rate:.1f} switches/h, fallback {report.fallback_fraction:.2%}"
            )
            print("    " + table.to_string(index=False, float_format=lambda v: f"{v:.4f}").replace("\n", "\n    "))

        for baseline, group in comparison_groups(reports, args.compare_to).items():
            comparison = compare(group, baseline)
            save_json(comparison, out / "simulations" / chunk_id / f"comparison_{baseline}.json")
            for name, c in comparison.ladders.items():
                print(
                    f"  {name} vs {baseline}: bitrate {c.relative_bitrate_change:+.2%}, "
                    f"quality {c.quality_delta:+.4f}"
                )
    print(f"\nSimulation results saved to {out / 'simulations'}")
    return 0


# ---------------------------------------------------------------------------
# region
# ---------------------------------------------------------------------------


def cmd_region(args: argparse.Namespace) -> int:
    """Write the achievable region of a ladder plus verdicts for supplied points."""
    model = load_chunk_model(args.chunk)
    if args.ladder:
        ladder = load_ladder(args.ladder)
        check_ladder_against_model(ladder, model)
    else:
        ladder = build_baseline(model, parse_baseline_spec(args.baseline))
    points = operating_points(ladder, model)
    region = achievable_region(points)
    verdicts = [
        {**p.to_dict(), "verdict": "inside" if contains(region, p) else "outside"}
        for p in args.point
    ]
    payload = {
        "chunk_id": model.chunk_id,
        "ladder": ladder.to_dict(),
        **region.to_dict(),
        "upper_hull_intervals": {
            str(h.resolution): list(h.interval) if h.interval else None
            for h in upper_hull(model.curves)
        },
        "points": verdicts,
    }

    rows = []
    for resolution in model.resolutions:
        curve = model.curves[resolution]
        rows.extend((f"curve_{resolution}p", s.bitrate, s.quality) for s in curve.samples)
    rows.extend(("upper_hull", p.rate, p.quality) for p in upper_hull_points(model.curves))
    rows.extend(("ladder", p.rate, p.quality) for p in points)
    vertices = list(region.hull_vertices)
    rows.extend(("region", p.rate, p.quality) for p in vertices + vertices[:1])
    rows.extend(("point", p.rate, p.quality) for p in args.point)
    frame = pd.DataFrame.from_records(rows, columns=["series", "rate", "quality"])

    out = args.output_dir
    save_json(payload, out / f"{model.chunk_id}_region.json")
    save_csv(frame, out / f"{model.chunk_id}_region.csv")

    print(f"{model.chunk_id}: region with {len(region.hull_vertices)} vertices")
    for verdict in verdicts:
        print(f"  ({verdict['rate']:.0f}, {verdict['quality']:.4f}): {verdict['verdict']}")
    print(f"Region saved to {out}")
    return 0
