"""
Command-line interface: ``count``, ``eval``, ``simulate`` and ``bench``.

Exit status is 0 on success, 1 for usage or configuration errors and 2
for unusable input data.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .background import MotionConfig, RatioNorm, UpdateRule
from .errors import BeeCountError, ConfigError, DataError, GeometryError
from .evaluation import (
    ClassMap,
    aggregate_counts,
    build_report,
    count_events,
    ground_truth_crossings,
    read_events_csv,
    read_ground_truth_csv,
    report_from_counts,
    write_events_csv,
    write_table_csv,
)
from .frames import (
    RegionSpec,
    load_manifest_file,
    load_sequence,
    read_frame,
    write_pgm,
)
from .pipeline import TunnelPipeline, load_run_config, process_sequence
from .simulator import (
    BeeScript,
    Scenario,
    load_scenario,
    render_frame,
    scenario_suite,
    write_scenario,
)

log = logging.getLogger("beecount")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_motion_overrides(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("motion parameters (override the config file)")
    g.add_argument("--t1", type=float, help="intensity difference threshold")
    g.add_argument("--t2", type=int, help="dynamic pixel count threshold")
    g.add_argument("--t2-fraction", type=float, help="T2 as a fraction of region area")
    g.add_argument("--t3", type=float, help="activity derivative threshold in (0, 1)")
    g.add_argument("--alpha", type=float, help="background learning rate")
    g.add_argument("--k-max", type=int, help="maximum track age in steps")
    g.add_argument("--sections", type=int, help="sections per tunnel (all tunnels)")
    g.add_argument("--update-rule", choices=[r.value for r in UpdateRule])
    g.add_argument("--ratio-norm", choices=[r.value for r in RatioNorm])
    g.add_argument("--smoothing", type=int, help="box filter width on ratios (1 = off)")


def _apply_overrides(config: MotionConfig, args) -> MotionConfig:
    return config.with_overrides(
        t1=args.t1, t2=args.t2, t2_fraction=args.t2_fraction, t3=args.t3, alpha=args.alpha,
        k_max=args.k_max, sections=args.sections, update_rule=args.update_rule,
        ratio_norm=args.ratio_norm, smoothing=args.smoothing,
    )


def _override_sections(regions, sections):
    if sections is None:
        return regions
    return [replace(r, sections=sections) for r in regions]


def _ground_truth(args) -> tuple[int, int] | None:
    if getattr(args, "gt", None):
        return tuple(args.gt)
    if getattr(args, "ground_truth", None):
        return read_ground_truth_csv(args.ground_truth)
    if getattr(args, "annotations", None):
        ann = Path(args.annotations)
        if not ann.is_dir():
            log.warning("annotation directory %s not found; report has no accuracy", ann)
            return None
        class_map = ClassMap.from_file(args.class_map) if args.class_map else ClassMap()
        return ground_truth_crossings(aggregate_counts(ann, class_map))
    return None


def _write_signal_dump(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "tunnel", "section", "r", "dr", "class"])
        for k, tid, n, r, dr, cls in rows:
            writer.writerow([k, tid, n, repr(r), repr(dr), cls])


def cmd_count(args) -> int:
    regions, config = load_run_config(args.tunnels)
    config = _apply_overrides(config, args)
    regions = _override_sections(regions, args.sections)
    if args.manifest:
        manifest = load_manifest_file(args.manifest)
    else:
        manifest = load_sequence(args.frames, args.ordering)
    if len(manifest) < 2:
        raise DataError("sequence too short: need at least 2 frames")
    background = read_frame(args.background).pixels if args.background else None
    result = process_sequence(
        manifest.frames(), regions, config,
        parallel=not args.sequential,
        record_signal=bool(args.signal_dump),
        background=background,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    events_path = Path(args.events) if args.events else out_dir / "events.csv"
    report_path = Path(args.report) if args.report else out_dir / "report.json"
    write_events_csv(result.events, events_path)
    report = build_report(result.events, _ground_truth(args),
                          tunnel_ids=[r.tunnel_id for r in regions])
    report.write(report_path)
    if args.signal_dump:
        _write_signal_dump(result.signal_rows, args.signal_dump)
    if args.model_snapshots:
        snap = Path(args.model_snapshots)
        snap.mkdir(parents=True, exist_ok=True)
        for tid, model in result.models.items():
            write_pgm(snap / f"model_tunnel{tid}.pgm", np.clip(np.rint(model), 0, 255))
    print(json.dumps(report.to_dict()["total"]))
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.events:
        per_tunnel = count_events(read_events_csv(args.events))
        pred_in = sum(c[0] for c in per_tunnel.values())
        pred_out = sum(c[1] for c in per_tunnel.values())
    else:
        pred_in, pred_out = args.counts
    report = report_from_counts(pred_in, pred_out, _ground_truth(args))
    if args.report:
        report.write(args.report)
    else:
        sys.stdout.write(report.to_json())
    if args.table_csv:
        write_table_csv(report, args.table_csv, args.method)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.scenario:
        scenario = load_scenario(args.scenario)
    else:
        suite = scenario_suite(args.seed)
        if args.suite not in suite:
            raise UsageError(f"unknown scenario {args.suite!r}; choose from {sorted(suite)}")
        scenario = suite[args.suite]
    gt = write_scenario(scenario, args.out)
    n_in, n_out = gt.counts
    print(json.dumps({"frames": scenario.frame_count(), "gt_in": n_in, "gt_out": n_out}))
    return EXIT_OK


def bench_scenarios(n_tunnels: int, width: int, height: int, sections: int) -> list[Scenario]:
    """One busy synthetic tunnel per slot, staggered so bees overlap in time."""
    blob_w = max(2.0, width * 0.45)
    blob_l = max(2.0, height / sections * 0.6)
    velocity = max(1.0, height / sections * 0.4)
    period = int(np.ceil((height + blob_l) / velocity)) + 4
    scenarios = []
    for t in range(n_tunnels):
        actors = tuple(
            BeeScript(entry_step=2 + t % period + i * period,
                      direction="in" if (i + t) % 2 == 0 else "out",
                      velocity=velocity, blob_width=blob_w, blob_length=blob_l)
            for i in range(4)
        )
        scenarios.append(Scenario(width=width, height=height, noise=6, seed=t,
                                  actors=actors, n_frames=4 * period + period,
                                  sections=sections))
    return scenarios


def run_bench(n_tunnels: int = 12, width: int = 64, height: int = 128, iterations: int = 500,
              warmup: int = 20, config: MotionConfig | None = None,
              sequential: bool = True) -> dict:
    if iterations <= 0:
        raise UsageError("iterations must be positive")
    if n_tunnels <= 0:
        raise UsageError("tunnels must be positive")
    config = config or MotionConfig()
    scenarios = bench_scenarios(n_tunnels, width, height, config.sections)
    n_frames = scenarios[0].frame_count()
    frames = [np.concatenate([render_frame(s, k) for s in scenarios], axis=1)
              for k in range(n_frames)]
    regions = [RegionSpec(t, t * width, 0, width, height, config.sections)
               for t in range(n_tunnels)]
    pipelines = [TunnelPipeline(r, config) for r in regions]
    pool = None
    if not sequential:
        pool = ThreadPoolExecutor()
    times = []
    try:
        for k in range(warmup + iterations):
            pixels = frames[k % n_frames]
            t0 = time.perf_counter()
            if pool is None:
                for pipe in pipelines:
                    pipe.step_full(pixels, k)
            else:
                list(pool.map(lambda p: p.step_full(pixels, k), pipelines))
            elapsed = time.perf_counter() - t0
            if k >= warmup:
                times.append(elapsed * 1e3)
    finally:
        if pool is not None:
            pool.shutdown()
    arr = np.asarray(times)
    p95 = float(np.percentile(arr, 95))
    return {
        "tunnels": n_tunnels,
        "region": [width, height],
        "iterations": iterations,
        "mode": "sequential" if sequential else "parallel",
        "mean_ms": float(arr.mean()),
        "p50_ms": float(np.percentile(arr, 50)),
        "p95_ms": p95,
        "max_ms": float(arr.max()),
        "budget_ms": 20.0,
        "within_budget": p95 < 20.0,
        "events": sum(len(p.events) for p in pipelines),
    }


def cmd_bench(args) -> int:
    config = MotionConfig()
    if args.config:
        _, config = load_run_config(args.config)
    config = _apply_overrides(config, args)
    stats = run_bench(args.tunnels, args.width, args.height, args.iterations, args.warmup,
                      config, sequential=not args.parallel)
    text = json.dumps(stats, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="beecount", description="Count bees crossing hive entrance tunnels.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("count", help="count crossings in a frame sequence")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--frames", help="directory of PNG/PGM frames")
    src.add_argument("--manifest", help="text file with one frame path per line")
    p.add_argument("--tunnels", required=True, help="tunnel configuration JSON")
    p.add_argument("--ordering", choices=["lexicographic", "natural"], default="lexicographic")
    p.add_argument("--background", help="empty-scene frame used to initialise the model")
    p.add_argument("--out-dir", default=".", help="directory for events.csv and report.json")
    p.add_argument("--events", help="events CSV path (overrides --out-dir)")
    p.add_argument("--report", help="report JSON path (overrides --out-dir)")
    p.add_argument("--signal-dump", help="write per-step r/dr/class CSV")
    p.add_argument("--model-snapshots", help="directory for final background models (PGM)")
    gt = p.add_mutually_exclusive_group()
    gt.add_argument("--ground-truth", help="ground-truth CSV (step,direction)")
    gt.add_argument("--annotations", help="YOLO annotation directory")
    gt.add_argument("--gt", type=int, nargs=2, metavar=("IN", "OUT"))
    p.add_argument("--class-map", help="class names file, one per line")
    p.add_argument("--sequential", action="store_true", help="process tunnels one by one")
    _add_motion_overrides(p)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("eval", help="score counts against ground truth")
    pred = p.add_mutually_exclusive_group(required=True)
    pred.add_argument("--events", help="events CSV from 'count'")
    pred.add_argument("--counts", type=int, nargs=2, metavar=("IN", "OUT"))
    gt = p.add_mutually_exclusive_group()
    gt.add_argument("--annotations", help="YOLO annotation directory")
    gt.add_argument("--ground-truth", help="ground-truth CSV (step,direction)")
    gt.add_argument("--gt", type=int, nargs=2, metavar=("IN", "OUT"))
    p.add_argument("--class-map")
    p.add_argument("--report", help="report JSON path (default: stdout)")
    p.add_argument("--table-csv", help="also write a ground truth / method table CSV")
    p.add_argument("--method", default="CCV approach", help="method column label")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="render a synthetic tunnel scenario")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="scenario JSON file")
    src.add_argument("--suite", help="canonical scenario name, e.g. single-in")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="per-frame latency over many tunnels")
    p.add_argument("--tunnels", type=int, default=12)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--warmup", type=int, default=20)
    p.add_argument("--config", help="tunnel configuration JSON (motion parameters only)")
    p.add_argument("--parallel", action="store_true", help="process tunnels concurrently")
    p.add_argument("--output", help="also write the statistics JSON here")
    _add_motion_overrides(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, GeometryError) as exc:
        print(f"beecount: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, BeeCountError, OSError) as exc:
        print(f"beecount: error: {exc}", file=sys.stderr)
        return EXIT_DATA
