"""Calibration from measured robot data to simulation parameters.

Input is a CSV of bench trials, one row per trial:

    robot_id,u1,u2,speed_cm_s,turn_deg_s

u1 is the raw forward command in [-100, 100], u2 the raw turn command in
[-2, 2]; speed_cm_s and turn_deg_s are the measured responses. Trials with
u2 == 0 and u1 != 0 calibrate speed; trials with u1 == 0 and u2 != 0
calibrate turning. Anything else (both zero, or coupled commands) is skipped
with a warning.

For each command level, a robot's actuation factor is its own average
response divided by the group average response at that level (the group
average being the mean of the per-robot averages, so no robot is weighted
by trial count). A robot's overall factor averages its per-level factors.
The same construction applied to turn trials yields the turn factor.

The resulting profile carries per-robot factors, per-level detail, the
population fit (mean and sample standard deviation across robots), the raw
command -> measured response maps, and sensor geometry distributions. Saving
and loading a profile is byte-stable: load(save(p)) == p and re-saving
reproduces the identical file.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import (
    DEFAULT_DT_S,
    DEFAULT_VISION_DISTANCE_M,
    DEFAULT_VISION_HALFANGLE_RAD,
    IdiosyncrasySpec,
    NormalSpec,
)
from .util import dump_stable_json, positive_truncated_normal

PROFILE_VERSION = 1

REQUIRED_COLUMNS = ("robot_id", "u1", "u2", "speed_cm_s", "turn_deg_s")
U1_RANGE = (-100.0, 100.0)
U2_RANGE = (-2.0, 2.0)


class MeasurementParseError(ValueError):
    """CSV parse failure; the message lists every offending line."""


class CalibrationError(ValueError):
    """Invalid calibration arguments or unusable measurement sets."""


@dataclass(frozen=True)
class MeasurementTrial:
    robot_id: str
    u1: float           # raw forward command, [-100, 100]
    u2: float           # raw turn command, [-2, 2]
    speed_cm_s: float   # measured forward speed
    turn_deg_s: float   # measured turn rate


def parse_measurements(path: str | Path) -> list:
    """Parse a measurement CSV; empty files (or header only) give []."""
    p = Path(path)
    if not p.exists():
        raise MeasurementParseError(f"measurement file not found: {p}")
    text = p.read_text()
    if text.strip() == "":
        return []
    reader = csv.reader(text.splitlines())
    rows = list(reader)
    header = [h.strip() for h in rows[0]]
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    extra = [c for c in header if c not in REQUIRED_COLUMNS]
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing columns: {', '.join(missing)}")
        if extra:
            parts.append(f"unexpected columns: {', '.join(extra)}")
        raise MeasurementParseError(f"{p}: bad header ({'; '.join(parts)})")
    col = {name: header.index(name) for name in REQUIRED_COLUMNS}
    trials = []
    errors = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(cell.strip() == "" for cell in row):
            continue
        if len(row) != len(header):
            errors.append(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            continue
        robot_id = row[col["robot_id"]].strip()
        if not robot_id:
            errors.append(f"line {lineno}: empty robot_id")
            continue
        vals = {}
        bad = False
        for name in ("u1", "u2", "speed_cm_s", "turn_deg_s"):
            cell = row[col[name]].strip()
            try:
                v = float(cell)
            except ValueError:
                errors.append(f"line {lineno}: {name} is not a number: {cell!r}")
                bad = True
                break
            if not math.isfinite(v):
                errors.append(f"line {lineno}: {name} must be finite, got {cell!r}")
                bad = True
                break
            vals[name] = v
        if bad:
            continue
        if not (U1_RANGE[0] <= vals["u1"] <= U1_RANGE[1]):
            errors.append(f"line {lineno}: u1={vals['u1']} outside {list(U1_RANGE)}")
            continue
        if not (U2_RANGE[0] <= vals["u2"] <= U2_RANGE[1]):
            errors.append(f"line {lineno}: u2={vals['u2']} outside {list(U2_RANGE)}")
            continue
        trials.append(MeasurementTrial(robot_id, vals["u1"], vals["u2"],
                                       vals["speed_cm_s"], vals["turn_deg_s"]))
    if errors:
        raise MeasurementParseError(f"{p}: {len(errors)} bad row(s)\n" + "\n".join(errors))
    return trials


def actuation_factor(individual_avg: float, group_avg: float) -> float:
    """Ratio of one robot's average response to the group's."""
    if not (math.isfinite(individual_avg) and math.isfinite(group_avg)):
        raise CalibrationError("averages must be finite")
    if group_avg <= 0.0:
        raise CalibrationError(f"group average must be positive, got {group_avg}")
    return individual_avg / group_avg


def fit_population(factors) -> NormalSpec:
    """Mean and sample standard deviation (ddof 1) across robots."""
    vals = [float(v) for v in factors]
    if len(vals) < 2:
        raise CalibrationError("population fit needs at least two values")
    import statistics
    return NormalSpec(statistics.fmean(vals), statistics.stdev(vals))


@dataclass(frozen=True)
class RobotCalibration:
    robot_id: str
    theta1: float | None                      # mean speed factor over levels
    theta2: float | None                      # mean turn factor over levels
    theta1_by_level: tuple = ()               # ((u1 level, factor), ...)
    theta2_by_level: tuple = ()               # ((u2 level, factor), ...)
    speed_by_level: tuple = ()                # ((u1 level, mean cm/s), ...)
    turn_by_level: tuple = ()                 # ((u2 level, mean deg/s), ...)

    def to_json_dict(self) -> dict:
        return {
            "robot_id": self.robot_id,
            "theta1": self.theta1,
            "theta2": self.theta2,
            "theta1_by_level": [list(p) for p in self.theta1_by_level],
            "theta2_by_level": [list(p) for p in self.theta2_by_level],
            "speed_by_level": [list(p) for p in self.speed_by_level],
            "turn_by_level": [list(p) for p in self.turn_by_level],
        }

    @staticmethod
    def from_json_dict(d: dict) -> "RobotCalibration":
        pairs = lambda key: tuple((float(a), float(b)) for a, b in d.get(key, []))
        return RobotCalibration(
            robot_id=str(d["robot_id"]),
            theta1=None if d.get("theta1") is None else float(d["theta1"]),
            theta2=None if d.get("theta2") is None else float(d["theta2"]),
            theta1_by_level=pairs("theta1_by_level"),
            theta2_by_level=pairs("theta2_by_level"),
            speed_by_level=pairs("speed_by_level"),
            turn_by_level=pairs("turn_by_level"),
        )


@dataclass
class CalibrationProfile:
    robots: dict = field(default_factory=dict)  # robot_id -> RobotCalibration
    speed_factor: NormalSpec = NormalSpec(1.0, 0.0)
    turn_factor: NormalSpec = NormalSpec(1.0, 0.0)
    vision_distance: NormalSpec = NormalSpec(DEFAULT_VISION_DISTANCE_M, 0.0)
    vision_halfangle: NormalSpec = NormalSpec(DEFAULT_VISION_HALFANGLE_RAD, 0.0)
    speed_map: tuple = ()   # ((u1 level, group mean cm/s), ...) sorted by level
    turn_map: tuple = ()    # ((u2 level, group mean deg/s), ...)
    dt: float = DEFAULT_DT_S
    version: int = PROFILE_VERSION

    def to_json_dict(self) -> dict:
        return {
            "kind": "calibration_profile",
            "version": self.version,
            "dt_s": self.dt,
            "robots": {rid: rc.to_json_dict() for rid, rc in sorted(self.robots.items())},
            "population": {
                "speed_factor": self.speed_factor.to_json_dict(),
                "turn_factor": self.turn_factor.to_json_dict(),
                "vision_distance_m": self.vision_distance.to_json_dict(),
                "vision_halfangle_rad": self.vision_halfangle.to_json_dict(),
            },
            "speed_map_cm_s": [list(p) for p in self.speed_map],
            "turn_map_deg_s": [list(p) for p in self.turn_map],
        }

    @staticmethod
    def from_json_dict(d: dict) -> "CalibrationProfile":
        if d.get("kind") != "calibration_profile":
            raise CalibrationError("not a calibration profile (missing kind marker)")
        if d.get("version") != PROFILE_VERSION:
            raise CalibrationError(f"unsupported profile version {d.get('version')!r}")
        pop = d.get("population", {})

        def spec(key: str, default: NormalSpec) -> NormalSpec:
            v = pop.get(key)
            if v is None:
                return default
            return NormalSpec(float(v["mean"]), float(v.get("std", 0.0)))

        return CalibrationProfile(
            robots={rid: RobotCalibration.from_json_dict(rc)
                    for rid, rc in d.get("robots", {}).items()},
            speed_factor=spec("speed_factor", NormalSpec(1.0, 0.0)),
            turn_factor=spec("turn_factor", NormalSpec(1.0, 0.0)),
            vision_distance=spec("vision_distance_m",
                                 NormalSpec(DEFAULT_VISION_DISTANCE_M, 0.0)),
            vision_halfangle=spec("vision_halfangle_rad",
                                  NormalSpec(DEFAULT_VISION_HALFANGLE_RAD, 0.0)),
            speed_map=tuple((float(a), float(b)) for a, b in d.get("speed_map_cm_s", [])),
            turn_map=tuple((float(a), float(b)) for a, b in d.get("turn_map_deg_s", [])),
            dt=float(d.get("dt_s", DEFAULT_DT_S)),
        )

    def to_json(self) -> str:
        return dump_stable_json(self.to_json_dict())

    def to_idiosyncrasy(self) -> IdiosyncrasySpec:
        """Distributions for WorldConfig: simulate a population like this one."""
        return IdiosyncrasySpec(
            speed_factor=self.speed_factor,
            turn_factor=self.turn_factor,
            vision_distance=self.vision_distance,
            vision_halfangle=self.vision_halfangle,
        )


def _per_level_factors(trials: list, command: str, response: str) -> tuple:
    """Shared speed/turn factor pipeline.

    Returns (factors_by_robot, by_level_by_robot, response_by_robot, group_map)
    where group_map is ((level, group mean response), ...) sorted by level.
    """
    by_level: dict = {}
    for t in trials:
        level = getattr(t, command)
        by_level.setdefault(level, {}).setdefault(t.robot_id, []).append(
            getattr(t, response))
    group_map = []
    robot_level_factor: dict = {}
    robot_level_response: dict = {}
    for level in sorted(by_level):
        robots = by_level[level]
        ind_avgs = {rid: float(np.mean(vals)) for rid, vals in sorted(robots.items())}
        group_avg = float(np.mean(list(ind_avgs.values())))
        group_map.append((level, group_avg))
        if group_avg <= 0.0:
            raise CalibrationError(
                f"group average response at {command}={level} is {group_avg}; "
                "factors need a positive group average")
        for rid, ind in ind_avgs.items():
            robot_level_factor.setdefault(rid, []).append(
                (level, actuation_factor(ind, group_avg)))
            robot_level_response.setdefault(rid, []).append((level, ind))
    factors = {rid: float(np.mean([f for _, f in pairs]))
               for rid, pairs in robot_level_factor.items()}
    return factors, robot_level_factor, robot_level_response, tuple(group_map)


def build_profile(trials: list,
                  vision_distance: NormalSpec | None = None,
                  vision_halfangle: NormalSpec | None = None,
                  dt: float = DEFAULT_DT_S) -> CalibrationProfile:
    """Turn parsed trials into a full calibration profile.

    Robots with no usable speed trials are excluded from the speed-factor
    population (with a warning); same for turning. A single-robot population
    gets a zero-width distribution.
    """
    speed_trials = [t for t in trials if t.u2 == 0.0 and t.u1 != 0.0]
    turn_trials = [t for t in trials if t.u1 == 0.0 and t.u2 != 0.0]
    skipped = len(trials) - len(speed_trials) - len(turn_trials)
    if skipped:
        warnings.warn(f"{skipped} trial(s) with coupled or all-zero commands skipped",
                      stacklevel=2)
    if not speed_trials and not turn_trials:
        raise CalibrationError("no usable calibration trials")

    t1, t1_levels, speed_resp, speed_map = (
        _per_level_factors(speed_trials, "u1", "speed_cm_s")
        if speed_trials else ({}, {}, {}, ()))
    t2, t2_levels, turn_resp, turn_map = (
        _per_level_factors(turn_trials, "u2", "turn_deg_s")
        if turn_trials else ({}, {}, {}, ()))

    all_ids = sorted({t.robot_id for t in trials})
    robots = {}
    for rid in all_ids:
        if rid not in t1 and speed_trials:
            warnings.warn(f"robot {rid!r} has no usable speed trials; "
                          "excluded from the speed-factor population", stacklevel=2)
        if rid not in t2 and turn_trials:
            warnings.warn(f"robot {rid!r} has no usable turn trials; "
                          "excluded from the turn-factor population", stacklevel=2)
        robots[rid] = RobotCalibration(
            robot_id=rid,
            theta1=t1.get(rid),
            theta2=t2.get(rid),
            theta1_by_level=tuple(t1_levels.get(rid, ())),
            theta2_by_level=tuple(t2_levels.get(rid, ())),
            speed_by_level=tuple(speed_resp.get(rid, ())),
            turn_by_level=tuple(turn_resp.get(rid, ())),
        )

    def population(values: list) -> NormalSpec:
        if len(values) >= 2:
            return fit_population(values)
        if len(values) == 1:
            return NormalSpec(float(values[0]), 0.0)
        return NormalSpec(1.0, 0.0)

    return CalibrationProfile(
        robots=robots,
        speed_factor=population([t1[r] for r in sorted(t1)]),
        turn_factor=population([t2[r] for r in sorted(t2)]),
        vision_distance=vision_distance or NormalSpec(DEFAULT_VISION_DISTANCE_M, 0.0),
        vision_halfangle=vision_halfangle or NormalSpec(DEFAULT_VISION_HALFANGLE_RAD, 0.0),
        speed_map=speed_map,
        turn_map=turn_map,
        dt=dt,
    )


def sample_profile(profile: CalibrationProfile, n: int, seed: int) -> dict:
    """Draw per-agent parameters from the profile's population fit.

    Draw order (frozen): speed factors, turn factors, vision distances,
    vision halfangles; each truncated to positive values (halfangle also
    capped at pi) by resampling.
    """
    if n < 1:
        raise CalibrationError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    out = {
        "speed_factor": positive_truncated_normal(
            rng, profile.speed_factor.mean, profile.speed_factor.std, n),
        "turn_factor": positive_truncated_normal(
            rng, profile.turn_factor.mean, profile.turn_factor.std, n),
        "vision_distance_m": positive_truncated_normal(
            rng, profile.vision_distance.mean, profile.vision_distance.std, n),
        "vision_halfangle_rad": positive_truncated_normal(
            rng, profile.vision_halfangle.mean, profile.vision_halfangle.std, n,
            upper=math.pi),
    }
    return out


def command_to_speed(profile: CalibrationProfile, u1: float) -> float:
    """Raw forward command -> group mean speed in m/s (interpolated).

    Anchored at (0, 0); clamped beyond the calibrated range.
    """
    if not profile.speed_map:
        raise CalibrationError("profile has no speed map")
    levels = [0.0] + [lv for lv, _ in profile.speed_map]
    speeds = [0.0] + [sp for _, sp in profile.speed_map]
    order = np.argsort(levels)
    xs = np.asarray(levels)[order]
    ys = np.asarray(speeds)[order]
    return float(np.interp(u1, xs, ys)) / 100.0


def command_to_turn_rate(profile: CalibrationProfile, u2: float) -> float:
    """Raw turn command -> group mean turn rate in rad/s (interpolated)."""
    if not profile.turn_map:
        raise CalibrationError("profile has no turn map")
    levels = [0.0] + [lv for lv, _ in profile.turn_map]
    rates = [0.0] + [r for _, r in profile.turn_map]
    order = np.argsort(levels)
    xs = np.asarray(levels)[order]
    ys = np.asarray(rates)[order]
    return math.radians(float(np.interp(u2, xs, ys)))


def save_profile(profile: CalibrationProfile, path: str | Path) -> None:
    Path(path).write_text(profile.to_json() + "\n")


def load_profile(path: str | Path) -> CalibrationProfile:
    p = Path(path)
    if not p.exists():
        raise CalibrationError(f"profile file not found: {p}")
    import json
    try:
        return CalibrationProfile.from_json_dict(json.loads(p.read_text()))
    except json.JSONDecodeError as e:
        raise CalibrationError(f"profile file {p} is not valid JSON: {e}") from e
