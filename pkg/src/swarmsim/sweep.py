"""Monte Carlo parameter sweeps and phase-diagram emission.

A sweep plan is a full-factorial grid over named config axes (row-major
cell order, last axis fastest) with a fixed trial count per cell. Each
trial's seed derives from (master_seed, cell_index, trial_index) alone.

Determinism across worker counts is by construction: the (cell, trial) jobs
are grouped into batches at *plan* time, greedily chunking runs of jobs
that share an engine-compatibility signature, in job order, up to
batch_size. Workers only decide where a batch executes, never what is in
it, and every batch advances its worlds in one lockstep array walk, so the
resulting bytes are identical for 1 worker, 8 workers, or separate
processes.

One batch raising is recorded as an error marker on its trials (the sweep
continues); a config that fails validation or init is marked per trial.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace as dc_replace
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from .config import ConfigError, NormalSpec, WorldConfig
from .engine import RunOptions, run_worlds
from .metrics import (
    PhaseLabel,
    classify_arrays,
    window_rows,
    worst_label,
)
from .model import init_world
from .util import derive_trial_seed, dump_stable_json, float_or_null, null_or_float

PLAN_VERSION = 1
PHASE_FORMAT = "swarmsim.phase_diagram"
PHASE_VERSION = 1
DEFAULT_BATCH_SIZE = 64

AXIS_NAMES = ("v_m_s", "omega_rad_s", "n_agents",
              "vision_distance_m", "vision_halfangle_rad")


class SweepError(ValueError):
    """Malformed plans or unusable sweep inputs."""


@dataclass(frozen=True)
class AxisSpec:
    name: str
    values: tuple

    def to_json_dict(self) -> dict:
        return {"name": self.name, "values": list(self.values)}


@dataclass
class SweepPlan:
    axes: list                  # [AxisSpec, ...]
    base_config: WorldConfig    # seed and axis fields overwritten per trial
    trials: int
    ticks: int
    master_seed: int
    batch_size: int = DEFAULT_BATCH_SIZE

    @property
    def n_cells(self) -> int:
        n = 1
        for ax in self.axes:
            n *= len(ax.values)
        return n

    def cell_coords(self, cell_index: int) -> dict:
        """Axis name -> value for a row-major cell index."""
        coords = {}
        rem = cell_index
        for ax in reversed(self.axes):
            k = len(ax.values)
            coords[ax.name] = ax.values[rem % k]
            rem //= k
        if rem:
            raise SweepError(f"cell index {cell_index} out of range")
        return {ax.name: coords[ax.name] for ax in self.axes}

    def cell_config(self, cell_index: int, trial_index: int) -> WorldConfig:
        cfg = self.base_config
        for name, value in self.cell_coords(cell_index).items():
            cfg = _apply_axis(cfg, name, value)
        return cfg.replace(
            seed=derive_trial_seed(self.master_seed, cell_index, trial_index))

    def to_json_dict(self) -> dict:
        return {
            "kind": "sweep_plan",
            "version": PLAN_VERSION,
            "master_seed": self.master_seed,
            "trials": self.trials,
            "ticks": self.ticks,
            "batch_size": self.batch_size,
            "axes": [ax.to_json_dict() for ax in self.axes],
            "base_config": self.base_config.to_json_dict(),
        }

    @staticmethod
    def from_json_dict(d: Mapping[str, Any]) -> "SweepPlan":
        if d.get("kind") != "sweep_plan":
            raise SweepError("not a sweep plan (missing kind marker)")
        if d.get("version") != PLAN_VERSION:
            raise SweepError(f"unsupported plan version {d.get('version')!r}")
        axes = []
        for ax in d.get("axes", []):
            name = ax.get("name")
            values = tuple(float(v) for v in ax.get("values", ()))
            if name == "omega_deg_s":  # accept the degree spelling, store SI
                name, values = "omega_rad_s", tuple(math.radians(v) for v in values)
            if name == "vision_halfangle_deg":
                name, values = "vision_halfangle_rad", tuple(
                    math.radians(v) for v in values)
            axes.append(AxisSpec(name, values))
        try:
            base = WorldConfig.from_json_dict(d["base_config"])
        except KeyError:
            raise SweepError("plan missing base_config") from None
        plan = SweepPlan(
            axes=axes,
            base_config=base,
            trials=int(d.get("trials", 1)),
            ticks=int(d["ticks"]),
            master_seed=int(d.get("master_seed", 0)),
            batch_size=int(d.get("batch_size", DEFAULT_BATCH_SIZE)),
        )
        return validate_plan(plan)

    def to_json(self) -> str:
        return dump_stable_json(self.to_json_dict())


def _apply_axis(cfg: WorldConfig, name: str, value: float) -> WorldConfig:
    if name == "v_m_s":
        return cfg.replace(
            controller=dc_replace(cfg.controller, v=float(value)),
            assignments={k: dc_replace(m, v=float(value))
                         for k, m in cfg.assignments.items()})
    if name == "omega_rad_s":
        return cfg.replace(
            controller=dc_replace(cfg.controller, omega=float(value)),
            assignments={k: dc_replace(m, omega=float(value))
                         for k, m in cfg.assignments.items()})
    if name == "n_agents":
        return cfg.replace(n_agents=int(value))
    if name == "vision_distance_m":
        prev = cfg.idiosyncrasy.vision_distance
        std = prev.std if isinstance(prev, NormalSpec) else 0.0
        return cfg.replace(idiosyncrasy=dc_replace(
            cfg.idiosyncrasy, vision_distance=NormalSpec(float(value), std)))
    if name == "vision_halfangle_rad":
        prev = cfg.idiosyncrasy.vision_halfangle
        std = prev.std if isinstance(prev, NormalSpec) else 0.0
        return cfg.replace(idiosyncrasy=dc_replace(
            cfg.idiosyncrasy, vision_halfangle=NormalSpec(float(value), std)))
    raise SweepError(f"unknown sweep axis {name!r} (supported: {AXIS_NAMES})")


def plan_grid(axes: list, base_config: WorldConfig, trials: int, ticks: int,
              master_seed: int, batch_size: int = DEFAULT_BATCH_SIZE) -> SweepPlan:
    """Build and validate a full-factorial plan.

    axes is a list of (name, values) pairs or AxisSpec instances.
    """
    specs = [ax if isinstance(ax, AxisSpec) else AxisSpec(ax[0], tuple(ax[1]))
             for ax in axes]
    plan = SweepPlan(axes=specs, base_config=base_config, trials=trials,
                     ticks=ticks, master_seed=master_seed, batch_size=batch_size)
    return validate_plan(plan)


def validate_plan(plan: SweepPlan) -> SweepPlan:
    if not plan.axes:
        raise SweepError("plan needs at least one axis")
    for ax in plan.axes:
        if ax.name not in AXIS_NAMES:
            raise SweepError(f"unknown sweep axis {ax.name!r} (supported: {AXIS_NAMES})")
        if len(ax.values) < 1:
            raise SweepError(f"axis {ax.name!r} has no values")
    if plan.trials < 1:
        raise SweepError(f"trials must be positive, got {plan.trials}")
    if plan.ticks < 1:
        raise SweepError(f"ticks must be positive, got {plan.ticks}")
    if plan.batch_size < 1:
        raise SweepError(f"batch_size must be positive, got {plan.batch_size}")
    if plan.master_seed < 0:
        raise SweepError("master_seed must be non-negative")
    # every cell must produce a valid config before any work is distributed
    for cell in range(plan.n_cells):
        try:
            plan.cell_config(cell, 0).validate()
        except ConfigError as e:
            raise SweepError(f"cell {cell} ({plan.cell_coords(cell)}): {e}") from e
    seeds = [derive_trial_seed(plan.master_seed, c, t)
             for c in range(plan.n_cells) for t in range(plan.trials)]
    if len(set(seeds)) != len(seeds):
        raise SweepError("derived trial seeds collide; change master_seed")
    return plan


# ---------------------------------------------------------------------------
# batch composition (fixed at plan time; workers never influence it)


def _compat_signature(cfg: WorldConfig) -> tuple:
    return (cfg.n_agents, cfg.dt, cfg.arena, cfg.noise, cfg.body_radius,
            cfg.sensing_backend)


def compose_batches(plan: SweepPlan) -> list:
    """Jobs in (cell, trial) row-major order, chunked by compatibility.

    Returns a list of batches, each a list of (cell_index, trial_index).
    A new batch starts when the signature changes or batch_size is reached.
    """
    batches = []
    current: list = []
    current_sig = None
    for cell in range(plan.n_cells):
        sig = _compat_signature(plan.cell_config(cell, 0))
        for trial in range(plan.trials):
            if current and (sig != current_sig or len(current) >= plan.batch_size):
                batches.append(current)
                current = []
            current_sig = sig
            current.append((cell, trial))
    if current:
        batches.append(current)
    return batches


def _metrics_from(plan: SweepPlan) -> int:
    rows = plan.ticks + 1
    w = window_rows(rows, plan.base_config.classifier)
    return rows - w


def run_batch(plan: SweepPlan, jobs: list) -> list:
    """Execute one batch; returns per-trial outcome tuples.

    Outcome: (cell, trial, label_or_None, cbar_mean, delta_mean,
    collisions_total, error_or_None). Metric fields are None on error.
    """
    worlds = []
    members = []
    failures = []
    for cell, trial in jobs:
        try:
            worlds.append(init_world(plan.cell_config(cell, trial)))
            members.append((cell, trial))
        except Exception as e:  # config/init failures are per-trial markers
            failures.append((cell, trial, None, None, None, None,
                             f"{type(e).__name__}: {e}"))
    outcomes = list(failures)
    if worlds:
        options = RunOptions(ticks=plan.ticks, metrics_from=_metrics_from(plan))
        try:
            result = run_worlds(worlds, options)
        except Exception as e:  # a batch-level failure marks all its trials
            msg = f"{type(e).__name__}: {e}"
            outcomes.extend((c, t, None, None, None, None, msg) for c, t in members)
            return outcomes
        for b, (cell, trial) in enumerate(members):
            cl = classify_arrays(
                result.circliness[:, b], result.diffusion[:, b],
                result.colliding_pairs[:, b], int(result.n_components[-1, b]),
                worlds[b].config.classifier)
            outcomes.append((cell, trial, cl.label.value,
                             cl.circliness_window_mean, cl.diffusion_window_mean,
                             int(result.collisions_total[b]), None))
    return outcomes


def _run_batch_payload(payload: tuple) -> list:
    """Top-level worker entry (must be picklable)."""
    plan_dict, jobs = payload
    plan = SweepPlan.from_json_dict(plan_dict)
    return run_batch(plan, [tuple(j) for j in jobs])


# ---------------------------------------------------------------------------
# results


@dataclass
class PhaseCell:
    index: int
    coords: dict                 # axis name -> value
    label: PhaseLabel | None     # majority label; None if every trial errored
    label_counts: dict           # label value -> count
    n_error: int
    circliness_mean: float       # mean of per-trial window means (may be inf/nan)
    diffusion_mean: float
    collisions_total: int
    errors: list = field(default_factory=list)


@dataclass
class SweepResult:
    plan: SweepPlan
    cells: list
    wall_s: float
    agent_ticks: int
    workers: int
    n_batches: int

    @property
    def agent_ticks_per_ms(self) -> float:
        if self.wall_s <= 0.0:
            return float("inf")
        return self.agent_ticks / (self.wall_s * 1e3)


def run_sweep(plan: SweepPlan, workers: int = 1,
              progress: Callable | None = None) -> SweepResult:
    """Run every (cell, trial) job and aggregate per-cell outcomes.

    workers > 1 distributes whole batches over a process pool. Batch
    composition is fixed by the plan, so outputs are byte-identical for any
    worker count.
    """
    import time
    if workers < 1:
        raise SweepError(f"workers must be positive, got {workers}")
    validate_plan(plan)
    batches = compose_batches(plan)
    outcomes: list = []
    t0 = time.perf_counter()
    if workers == 1:
        for k, jobs in enumerate(batches):
            outcomes.extend(run_batch(plan, jobs))
            if progress:
                progress(k + 1, len(batches))
    else:
        plan_dict = plan.to_json_dict()
        payloads = [(plan_dict, jobs) for jobs in batches]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for k, out in enumerate(pool.map(_run_batch_payload, payloads)):
                outcomes.extend(out)
                if progress:
                    progress(k + 1, len(batches))
    wall_s = time.perf_counter() - t0

    by_cell: dict = {}
    for (cell, trial, label, cbar, delta, collisions, error) in outcomes:
        by_cell.setdefault(cell, []).append((trial, label, cbar, delta, collisions, error))
    cells = []
    n = plan.base_config.n_agents
    for cell in range(plan.n_cells):
        rows = sorted(by_cell.get(cell, ()))
        labels = [PhaseLabel(r[1]) for r in rows if r[1] is not None]
        errors = [r[5] for r in rows if r[5] is not None]
        counts = {lb.value: 0 for lb in PhaseLabel}
        for lb in labels:
            counts[lb.value] += 1
        cbars = [r[2] for r in rows if r[2] is not None]
        deltas = [r[3] for r in rows if r[3] is not None]
        colls = [r[4] for r in rows if r[4] is not None]
        cells.append(PhaseCell(
            index=cell,
            coords=plan.cell_coords(cell),
            label=worst_label(labels) if labels else None,
            label_counts=counts,
            n_error=len(errors),
            circliness_mean=float(np.mean(cbars)) if cbars else float("nan"),
            diffusion_mean=float(np.mean(deltas)) if deltas else float("nan"),
            collisions_total=int(sum(colls)) if colls else 0,
            errors=sorted(set(errors)),
        ))
    agent_ticks = sum(plan.cell_config(c, 0).n_agents * plan.ticks * plan.trials
                      for c in range(plan.n_cells)) if plan.axes else 0
    return SweepResult(plan=plan, cells=cells, wall_s=wall_s,
                       agent_ticks=agent_ticks, workers=workers,
                       n_batches=len(batches))


# ---------------------------------------------------------------------------
# phase-diagram emission


def _meta_dict(result: SweepResult) -> dict:
    plan = result.plan
    return {
        "format": PHASE_FORMAT,
        "version": PHASE_VERSION,
        "master_seed": plan.master_seed,
        "trials": plan.trials,
        "ticks": plan.ticks,
        "dt_s": plan.base_config.dt,
        "n_agents": plan.base_config.n_agents,
        "axes": [ax.to_json_dict() for ax in plan.axes],
    }


def _csv_float(x: float) -> str:
    if x != x:  # NaN: no successful trials
        return ""
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return repr(float(x))


def write_phase_csv(result: SweepResult, path: str | Path) -> None:
    """One row per cell, meta as a single '# meta' JSON comment line.

    Non-finite means are written as Infinity (parseable by both Python and
    browsers); cells with zero successful trials leave metric fields empty.
    """
    axis_names = [ax.name for ax in result.plan.axes]
    header = axis_names + [
        "majority_label", "n_mill", "n_ellipsoidal", "n_colliding_clusters",
        "n_separated_groups", "n_error", "circliness_mean", "diffusion_mean",
        "collisions_total"]
    lines = ["# meta " + dump_stable_json(_meta_dict(result), indent=None),
             ",".join(header)]
    for cell in result.cells:
        row = [_csv_float(float(cell.coords[name])) for name in axis_names]
        row.append(cell.label.value if cell.label is not None else "")
        row.extend(str(cell.label_counts[lb.value]) for lb in (
            PhaseLabel.MILL, PhaseLabel.ELLIPSOIDAL,
            PhaseLabel.COLLIDING_CLUSTERS, PhaseLabel.SEPARATED_GROUPS))
        row.append(str(cell.n_error))
        row.append(_csv_float(cell.circliness_mean))
        row.append(_csv_float(cell.diffusion_mean))
        row.append(str(cell.collisions_total))
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_phase_jsonl(result: SweepResult, path: str | Path) -> None:
    lines = [dump_stable_json({"kind": "phase_header", **_meta_dict(result)},
                              indent=None)]
    for cell in result.cells:
        lines.append(dump_stable_json({
            "kind": "cell",
            "index": cell.index,
            "coords": cell.coords,
            "majority_label": None if cell.label is None else cell.label.value,
            "label_counts": cell.label_counts,
            "n_error": cell.n_error,
            "circliness_mean": float_or_null(cell.circliness_mean)
            if cell.circliness_mean == cell.circliness_mean else None,
            "diffusion_mean": float_or_null(cell.diffusion_mean)
            if cell.diffusion_mean == cell.diffusion_mean else None,
            "collisions_total": cell.collisions_total,
            "errors": cell.errors,
        }, indent=None))
    Path(path).write_text("\n".join(lines) + "\n")


def read_phase_jsonl(path: str | Path) -> dict:
    """Round-trip reader: {'meta': ..., 'cells': [...]} with floats restored."""
    p = Path(path)
    lines = p.read_text().splitlines()
    if not lines:
        raise SweepError(f"phase diagram file {p} is empty")
    header = json.loads(lines[0])
    if header.get("kind") != "phase_header" or header.get("format") != PHASE_FORMAT:
        raise SweepError(f"{p} is not a phase diagram JSONL file")
    cells = []
    for line in lines[1:]:
        d = json.loads(line)
        if d.get("kind") != "cell":
            raise SweepError("unexpected line kind in phase diagram")
        cells.append(d)
    return {"meta": {k: v for k, v in header.items() if k != "kind"}, "cells": cells}


def read_phase_csv(path: str | Path) -> dict:
    """Parse a phase CSV back to {'meta': ..., 'header': [...], 'rows': [...]}."""
    p = Path(path)
    lines = p.read_text().splitlines()
    meta = None
    body = []
    for line in lines:
        if line.startswith("#"):
            stripped = line[1:].strip()
            if stripped.startswith("meta "):
                meta = json.loads(stripped[len("meta "):])
            continue
        if line.strip():
            body.append(line)
    if meta is None or not body:
        raise SweepError(f"{p} is not a phase diagram CSV (missing meta or rows)")
    header = body[0].split(",")
    rows = [line.split(",") for line in body[1:]]
    return {"meta": meta, "header": header, "rows": rows}


def emit_phase_diagram(result: SweepResult, out_dir: str | Path,
                       formats: tuple = ("csv", "jsonl"),
                       stem: str = "phase_diagram") -> list:
    """Write the diagram in the requested formats; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "csv":
            path = out / f"{stem}.csv"
            write_phase_csv(result, path)
        elif fmt == "jsonl":
            path = out / f"{stem}.jsonl"
            write_phase_jsonl(result, path)
        else:
            raise SweepError(f"unknown phase diagram format {fmt!r}")
        written.append(path)
    return written


def save_plan(plan: SweepPlan, path: str | Path) -> None:
    Path(path).write_text(plan.to_json() + "\n")


def load_plan(path: str | Path) -> SweepPlan:
    p = Path(path)
    if not p.exists():
        raise SweepError(f"plan file not found: {p}")
    try:
        return SweepPlan.from_json_dict(json.loads(p.read_text()))
    except json.JSONDecodeError as e:
        raise SweepError(f"plan file {p} is not valid JSON: {e}") from e
