"""Command-line entry point: runs, sweeps, calibration, classification, serving.

Every invocation that writes artifacts appends one line to manifest.jsonl
next to its outputs, recording inputs, seed, tool version, and timestamp,
so any artifact can be traced back to the exact command that made it.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import subprocess
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .calibration import (
    CalibrationError,
    MeasurementParseError,
    build_profile,
    parse_measurements,
    save_profile,
)
from .config import ConfigError, WorldConfig
from .engine import EngineError, RunOptions, run_worlds
from .metrics import MetricError, PhaseLabel
from .model import World, init_world
from .records import (
    RecordError,
    RunRecord,
    read_record,
    write_record_binary,
    write_record_jsonl,
)
from .scenarios import DEFAULT_TICKS
from .sweep import SweepError, emit_phase_diagram, load_plan, run_sweep

LABEL_DISPLAY = {
    PhaseLabel.MILL: "Mill",
    PhaseLabel.ELLIPSOIDAL: "Ellipsoidal",
    PhaseLabel.COLLIDING_CLUSTERS: "CollidingClusters",
    PhaseLabel.SEPARATED_GROUPS: "SeparatedGroups",
}

_USAGE_ERRORS = (ConfigError, SweepError, MeasurementParseError,
                 CalibrationError, RecordError, MetricError,
                 FileNotFoundError, IsADirectoryError, json.JSONDecodeError)


def _git_describe() -> str | None:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).parent)
    except OSError:
        return None
    return out.stdout.strip() or None if out.returncode == 0 else None


def append_manifest(out_dir: Path, command: str, inputs: dict,
                    outputs: list) -> Path:
    """Append-one-line artifact ledger; outputs are paths relative to it."""
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "manifest.jsonl"
    entry = {
        "command": command,
        "inputs": inputs,
        "outputs": [str(p) for p in outputs],
        "tool_version": __version__,
        "git": _git_describe(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with path.open("a") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")
    return path


def _load_run_input(path: Path, seed: int | None) -> World:
    """Config file or world snapshot -> live world, seed override applied."""
    blob = json.loads(path.read_text())
    if not isinstance(blob, dict):
        raise ConfigError(f"{path} does not hold a JSON object")
    if blob.get("kind") == "world_snapshot":
        if seed is not None:
            raise ConfigError(
                "--seed cannot override a snapshot (its state is already drawn); "
                "pass a plain config instead")
        return World.from_snapshot(blob)
    cfg = WorldConfig.from_json_dict(blob)
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    return init_world(cfg.validate())


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_run(args: argparse.Namespace) -> int:
    world = _load_run_input(Path(args.config), args.seed)
    if args.ticks < 0:
        raise ConfigError("--ticks must be >= 0")
    res = run_worlds([world], RunOptions(ticks=args.ticks, record_states=True))
    record = RunRecord.from_result(res)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    writer = write_record_jsonl if args.format == "jsonl" else write_record_binary
    record_path = out / f"record.{'jsonl' if args.format == 'jsonl' else 'bin'}"

    try:
        cls = record.classify()
    except MetricError as e:
        cls = None
        print(f"label: unclassified ({e})")
    if cls is not None:
        cbar = cls.circliness_window_mean
        dbar = cls.diffusion_window_mean
        print(f"label: {LABEL_DISPLAY[cls.label]}")
        print(f"window: {cls.window_rows} rows, circliness {cbar:.4f}, "
              f"diffusion {dbar:.4f}, collisions {cls.collisions_in_window}, "
              f"components {cls.n_components_final}")
    writer(record, record_path)
    print(f"ticks: {res.ticks}  agents: {res.n_agents}  "
          f"wall: {res.wall_s:.2f}s  record: {record_path}")

    if args.deterministic_check:
        world2 = _load_run_input(Path(args.config), args.seed)
        res2 = run_worlds([world2], RunOptions(ticks=args.ticks, record_states=True))
        rec2 = RunRecord.from_result(res2)
        if cls is not None:
            rec2.classify()
        with tempfile.TemporaryDirectory() as td:
            second = Path(td) / record_path.name
            writer(rec2, second)
            h1, h2 = _sha256(record_path), _sha256(second)
        if h1 != h2:
            print(f"deterministic check FAILED: {h1} != {h2}", file=sys.stderr)
            return 1
        print(f"deterministic check ok: {h1}")

    append_manifest(out, "run",
                    {"config": str(args.config), "seed": args.seed,
                     "ticks": args.ticks},
                    [record_path.name])
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    plan = load_plan(Path(args.plan))
    formats = tuple(dict.fromkeys(args.format))
    result = run_sweep(plan, workers=args.workers)

    counts: dict = {}
    for cell in result.cells:
        key = cell.label.value if cell.label is not None else "error"
        counts[key] = counts.get(key, 0) + 1
    out = Path(args.out)
    written = emit_phase_diagram(result, out, formats=formats)
    print(f"cells: {len(result.cells)}  "
          + "  ".join(f"{k}: {v}" for k, v in sorted(counts.items())))
    print(f"wall: {result.wall_s:.1f}s  workers: {result.workers}  "
          f"throughput: {result.agent_ticks_per_ms:.0f} agent-ticks/ms")
    for p in written:
        print(f"wrote {p}")

    if args.deterministic_check:
        result2 = run_sweep(plan, workers=args.workers)
        with tempfile.TemporaryDirectory() as td:
            second = emit_phase_diagram(result2, Path(td), formats=formats)
            pairs = list(zip(written, second))
            bad = [(a.name, _sha256(a), _sha256(b)) for a, b in pairs
                   if _sha256(a) != _sha256(b)]
        if bad:
            for name, h1, h2 in bad:
                print(f"deterministic check FAILED for {name}: {h1} != {h2}",
                      file=sys.stderr)
            return 1
        print("deterministic check ok: " + ", ".join(
            f"{a.name} {_sha256(a)[:12]}" for a, _ in pairs))

    append_manifest(out, "sweep",
                    {"plan": str(args.plan), "workers": args.workers},
                    [p.name for p in written])
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    trials = parse_measurements(Path(args.infile))
    profile = build_profile(trials)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_profile(profile, out)
    for rid in sorted(profile.robots):
        rc = profile.robots[rid]
        levels = " ".join(f"u1={lv:g}: {f:.3f}" for lv, f in rc.theta1_by_level)
        print(f"robot {rid}: speed factors {levels}; "
              f"turn factor {rc.theta2 if rc.theta2 is not None else float('nan'):.3f}")
    print(f"population: speed_factor N({profile.speed_factor.mean:.4f}, "
          f"{profile.speed_factor.std:.4f}^2), turn_factor "
          f"N({profile.turn_factor.mean:.4f}, {profile.turn_factor.std:.4f}^2)")
    print(f"wrote {out}")
    append_manifest(out.parent, "calibrate", {"measurements": str(args.infile)},
                    [out.name])
    return 0


def cmd_classify(args: argparse.Namespace) -> int:
    record = read_record(Path(args.infile))
    cls = record.classify()
    print(LABEL_DISPLAY[cls.label])
    print(f"window: {cls.window_rows} rows, circliness "
          f"{cls.circliness_window_mean:.4f}, diffusion "
          f"{cls.diffusion_window_mean:.4f}, collisions "
          f"{cls.collisions_in_window}, components {cls.n_components_final}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .scenarios import milling_config
    from .service import serve
    if args.config is not None:
        blob = json.loads(Path(args.config).read_text())
        cfg = WorldConfig.from_json_dict(blob).validate()
    else:
        cfg = milling_config(seed=args.seed if args.seed is not None else 0)
    static = args.static
    if static is None:
        candidate = Path.cwd() / "frontend" / "dist"
        static = str(candidate) if candidate.is_dir() else None
    serve(cfg, port=args.port, host=args.host,
          data_dir=args.data_dir, static_dir=static)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="swarmsim",
        description="Deterministic reactive-swarm simulation toolkit.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one world and write a record")
    run.add_argument("--config", required=True,
                     help="world config JSON, or a world snapshot")
    run.add_argument("--seed", type=int, default=None,
                     help="override the config seed")
    run.add_argument("--ticks", type=int, default=DEFAULT_TICKS)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--format", choices=("jsonl", "binary"), default="jsonl")
    run.add_argument("--deterministic-check", action="store_true",
                     help="rerun and require byte-identical records")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run a phase-diagram sweep plan")
    sweep.add_argument("--plan", required=True, help="sweep plan JSON")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--out", required=True, help="output directory")
    sweep.add_argument("--format", action="append", choices=("csv", "jsonl"),
                       default=None,
                       help="repeatable; default writes both")
    sweep.add_argument("--deterministic-check", action="store_true",
                       help="rerun and require byte-identical outputs")
    sweep.set_defaults(func=cmd_sweep)

    cal = sub.add_parser("calibrate",
                         help="fit actuation factors from measured trials")
    cal.add_argument("--in", dest="infile", required=True,
                     help="measurements CSV")
    cal.add_argument("--out", required=True, help="profile JSON path")
    cal.set_defaults(func=cmd_calibrate)

    cls = sub.add_parser("classify", help="label a stored run record")
    cls.add_argument("--in", dest="infile", required=True,
                     help="record path (.jsonl or .bin)")
    cls.set_defaults(func=cmd_classify)

    srv = sub.add_parser("serve", help="serve a live steerable session")
    srv.add_argument("--config", default=None,
                     help="world config JSON (default: milling scenario)")
    srv.add_argument("--seed", type=int, default=None,
                     help="seed for the default scenario")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--data-dir", default=".",
                     help="directory /phase-diagram serves CSVs from")
    srv.add_argument("--static", default=None,
                     help="static UI directory (default: ./frontend/dist if present)")
    srv.set_defaults(func=cmd_serve)
    return p


def main(argv: list | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "format", "x") is None:
        args.format = ["csv", "jsonl"]
    try:
        return args.func(args)
    except _USAGE_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (EngineError, ValueError, OSError) as e:
        print(f"runtime failure: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
