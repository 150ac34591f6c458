"""Configuration dataclasses and their JSON wire format.

All numeric fields are SI internally (meters, seconds, radians). The JSON
schema makes units explicit with suffixed names (``v_m_s``, ``omega_rad_s``,
``dt_s``); loaders additionally accept ``*_deg`` / ``*_deg_s`` spellings for
angular fields and convert on the way in. Serialization always emits the SI
names, sorted keys, repr floats, so config round-trips are byte-stable.

Validation is centralized in :meth:`WorldConfig.validate`; every malformed
input should surface as :class:`ConfigError` with a message naming the field.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Union

from .util import dump_stable_json

CONFIG_VERSION = 1

# Measured robot constants used as defaults: 45 Hz control period, 1.10 m
# sensor range, 49 degree field of view, 19.5 cm collision diameter.
DEFAULT_DT_S = 0.022
DEFAULT_VISION_DISTANCE_M = 1.10
DEFAULT_VISION_HALFANGLE_RAD = math.radians(49.0) / 2.0
DEFAULT_BODY_RADIUS_M = 0.0975


class ConfigError(ValueError):
    """Raised for any malformed or inconsistent configuration input."""


class Behavior(str, Enum):
    MILLING = "milling"
    DIFFUSING = "diffusing"
    SELF_CENTERING = "self_centering"


@dataclass(frozen=True)
class ControllerMode:
    """A reactive controller: a behavior tag plus its two gains.

    v is the commanded forward speed (m/s), omega the commanded turn rate
    (rad/s). Both must be positive; the behavior table decides signs.
    """

    tag: Behavior
    v: float
    omega: float

    def to_json_dict(self) -> dict:
        return {"tag": self.tag.value, "v_m_s": self.v, "omega_rad_s": self.omega}

    @staticmethod
    def from_json_dict(d: Mapping[str, Any]) -> "ControllerMode":
        try:
            tag = Behavior(d["tag"])
        except (KeyError, ValueError) as e:
            raise ConfigError(f"controller: bad or missing tag: {d.get('tag')!r}") from e
        v = _number(d, "v_m_s", "controller.v_m_s")
        omega = _angular(d, "omega_rad_s", "omega_deg_s", "controller.omega")
        return ControllerMode(tag, v, omega)


@dataclass(frozen=True)
class NormalSpec:
    """Mean/std pair for a normal distribution (std 0 = deterministic)."""

    mean: float
    std: float = 0.0

    def to_json_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std}


# Each idiosyncrasy field is either a distribution (sampled per agent at
# world init) or an explicit per-agent tuple.
FactorSpec = Union[NormalSpec, tuple]


@dataclass(frozen=True)
class IdiosyncrasySpec:
    """Per-agent parameter heterogeneity.

    speed_factor / turn_factor are the unitless actuation factors applied
    multiplicatively to the commanded v and omega. vision_distance is the
    sensor range in meters, vision_halfangle half the field of view in
    radians.
    """

    speed_factor: FactorSpec = NormalSpec(1.0, 0.0)
    turn_factor: FactorSpec = NormalSpec(1.0, 0.0)
    vision_distance: FactorSpec = NormalSpec(DEFAULT_VISION_DISTANCE_M, 0.0)
    vision_halfangle: FactorSpec = NormalSpec(DEFAULT_VISION_HALFANGLE_RAD, 0.0)

    def to_json_dict(self) -> dict:
        return {
            "speed_factor": _factor_to_json(self.speed_factor),
            "turn_factor": _factor_to_json(self.turn_factor),
            "vision_distance_m": _factor_to_json(self.vision_distance),
            "vision_halfangle_rad": _factor_to_json(self.vision_halfangle),
        }

    @staticmethod
    def from_json_dict(d: Mapping[str, Any]) -> "IdiosyncrasySpec":
        def get(si_key: str, deg_key: str | None, default: FactorSpec) -> FactorSpec:
            if si_key in d:
                return _factor_from_json(d[si_key], si_key, scale=1.0)
            if deg_key is not None and deg_key in d:
                return _factor_from_json(d[deg_key], deg_key, scale=math.pi / 180.0)
            return default
        base = IdiosyncrasySpec()
        return IdiosyncrasySpec(
            speed_factor=get("speed_factor", None, base.speed_factor),
            turn_factor=get("turn_factor", None, base.turn_factor),
            vision_distance=get("vision_distance_m", None, base.vision_distance),
            vision_halfangle=get("vision_halfangle_rad", "vision_halfangle_deg",
                                 base.vision_halfangle),
        )


@dataclass(frozen=True)
class ArenaSpec:
    """World boundary handling: unbounded plane, clamped rectangle, or torus.

    Bounded and torus rectangles are centered on the origin, spanning
    [-width/2, width/2] x [-height/2, height/2].
    """

    kind: str = "unbounded"
    width: float = 0.0
    height: float = 0.0

    KINDS = ("unbounded", "bounded", "torus")

    @staticmethod
    def unbounded() -> "ArenaSpec":
        return ArenaSpec("unbounded")

    @staticmethod
    def bounded(width: float, height: float) -> "ArenaSpec":
        return ArenaSpec("bounded", width, height)

    @staticmethod
    def torus(width: float, height: float) -> "ArenaSpec":
        return ArenaSpec("torus", width, height)

    def to_json_dict(self) -> dict:
        if self.kind == "unbounded":
            return {"kind": "unbounded"}
        return {"kind": self.kind, "width_m": self.width, "height_m": self.height}

    @staticmethod
    def from_json_dict(d: Mapping[str, Any]) -> "ArenaSpec":
        kind = d.get("kind", "unbounded")
        if kind not in ArenaSpec.KINDS:
            raise ConfigError(f"arena.kind must be one of {ArenaSpec.KINDS}, got {kind!r}")
        if kind == "unbounded":
            return ArenaSpec.unbounded()
        return ArenaSpec(kind,
                         _number(d, "width_m", "arena.width_m"),
                         _number(d, "height_m", "arena.height_m"))


@dataclass(frozen=True)
class NoiseSpec:
    """Optional stochastic disturbances, all off by default.

    actuation_std: per-step multiplicative factor noise, applied to the
    speed and turn actuation factors independently as (1 + std * N(0,1)).
    false_negative_rate / false_positive_rate: per-step sensor bit flips.
    """

    actuation_std: float = 0.0
    false_negative_rate: float = 0.0
    false_positive_rate: float = 0.0

    @property
    def any_actuation(self) -> bool:
        return self.actuation_std > 0.0

    @property
    def any_sensor(self) -> bool:
        return self.false_negative_rate > 0.0 or self.false_positive_rate > 0.0

    def to_json_dict(self) -> dict:
        return {
            "actuation_std": self.actuation_std,
            "false_negative_rate": self.false_negative_rate,
            "false_positive_rate": self.false_positive_rate,
        }

    @staticmethod
    def from_json_dict(d: Mapping[str, Any]) -> "NoiseSpec":
        return NoiseSpec(
            actuation_std=float(d.get("actuation_std", 0.0)),
            false_negative_rate=float(d.get("false_negative_rate", 0.0)),
            false_positive_rate=float(d.get("false_positive_rate", 0.0)),
        )


@dataclass(frozen=True)
class SpawnSpec:
    """Initial placement: positions uniform in a rectangle, headings uniform.

    min_separation, when set, enforces pairwise distance at spawn by
    rejection sampling (bounded attempts; failure is a ConfigError).
    """

    width: float = 2.0
    height: float = 2.0
    center: tuple = (0.0, 0.0)
    min_separation: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "width_m": self.width,
            "height_m": self.height,
            "center_m": list(self.center),
            "min_separation_m": self.min_separation,
        }

    @staticmethod
    def from_json_dict(d: Mapping[str, Any]) -> "SpawnSpec":
        center = d.get("center_m", (0.0, 0.0))
        if not (isinstance(center, (list, tuple)) and len(center) == 2):
            raise ConfigError("spawn.center_m must be a [x, y] pair")
        ms = d.get("min_separation_m")
        return SpawnSpec(
            width=float(d.get("width_m", 2.0)),
            height=float(d.get("height_m", 2.0)),
            center=(float(center[0]), float(center[1])),
            min_separation=None if ms is None else float(ms),
        )


# Generous defaults: must admit every study configuration, including the
# 3*omega branch of the self-centering controller at omega = 150 deg/s.
@dataclass(frozen=True)
class ActuatorCaps:
    max_speed: float = 1.0
    max_turn_rate: float = 3.0 * math.pi

    def to_json_dict(self) -> dict:
        return {"max_speed_m_s": self.max_speed, "max_turn_rate_rad_s": self.max_turn_rate}

    @staticmethod
    def from_json_dict(d: Mapping[str, Any]) -> "ActuatorCaps":
        max_turn = d.get("max_turn_rate_rad_s")
        if max_turn is None and "max_turn_rate_deg_s" in d:
            max_turn = math.radians(float(d["max_turn_rate_deg_s"]))
        return ActuatorCaps(
            max_speed=float(d.get("max_speed_m_s", 1.0)),
            max_turn_rate=float(max_turn) if max_turn is not None else 3.0 * math.pi,
        )


@dataclass(frozen=True)
class ClassifierConfig:
    """Thresholds for labeling a finished run from its metric trace.

    The trailing window is max(ceil(window_fraction * rows), min_window_ticks)
    rows; a run shorter than the window cannot be classified. link_distance
    None means "use the population mean vision distance" at classify time.
    """

    mill_max: float = 0.2
    ellipse_max: float = 1.0
    window_fraction: float = 0.2
    min_window_ticks: int = 100
    link_distance: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "mill_max": self.mill_max,
            "ellipse_max": self.ellipse_max,
            "window_fraction": self.window_fraction,
            "min_window_ticks": self.min_window_ticks,
            "link_distance_m": self.link_distance,
        }

    @staticmethod
    def from_json_dict(d: Mapping[str, Any]) -> "ClassifierConfig":
        ld = d.get("link_distance_m")
        return ClassifierConfig(
            mill_max=float(d.get("mill_max", 0.2)),
            ellipse_max=float(d.get("ellipse_max", 1.0)),
            window_fraction=float(d.get("window_fraction", 0.2)),
            min_window_ticks=int(d.get("min_window_ticks", 100)),
            link_distance=None if ld is None else float(ld),
        )


@dataclass
class WorldConfig:
    """Complete description of one simulated world.

    seed drives every random draw for the world (spawn, idiosyncrasies, and
    any per-step noise); two runs of the same config are bit-identical.
    """

    n_agents: int
    seed: int
    controller: ControllerMode
    dt: float = DEFAULT_DT_S
    assignments: dict = field(default_factory=dict)  # agent id -> ControllerMode
    arena: ArenaSpec = field(default_factory=ArenaSpec.unbounded)
    spawn: SpawnSpec = field(default_factory=SpawnSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    idiosyncrasy: IdiosyncrasySpec = field(default_factory=IdiosyncrasySpec)
    caps: ActuatorCaps = field(default_factory=ActuatorCaps)
    body_radius: float = DEFAULT_BODY_RADIUS_M
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    sensing_backend: str = "auto"  # auto | dense | grid
    sensor_target: str = "point"  # point | body

    # -- validation ------------------------------------------------------

    def validate(self) -> "WorldConfig":
        if not isinstance(self.n_agents, int) or self.n_agents < 1:
            raise ConfigError(f"n_agents must be a positive integer, got {self.n_agents!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ConfigError(f"dt_s must be positive and finite, got {self.dt!r}")
        for aid in self.assignments:
            if not isinstance(aid, int) or not (0 <= aid < self.n_agents):
                raise ConfigError(f"assignment agent id {aid!r} out of range [0, {self.n_agents})")
        for where, mode in [("controller", self.controller)] + [
                (f"assignments[{i}]", m) for i, m in sorted(self.assignments.items())]:
            self._validate_mode(where, mode)
        ns = self.noise
        if ns.actuation_std < 0.0:
            raise ConfigError("noise.actuation_std must be non-negative")
        for name, rate in [("false_negative_rate", ns.false_negative_rate),
                           ("false_positive_rate", ns.false_positive_rate)]:
            if not (0.0 <= rate <= 1.0):
                raise ConfigError(f"noise.{name} must be in [0, 1], got {rate}")
        sp = self.spawn
        if sp.width < 0.0 or sp.height < 0.0:
            raise ConfigError("spawn extent must be non-negative")
        if sp.min_separation is not None and sp.min_separation <= 0.0:
            raise ConfigError("spawn.min_separation_m must be positive when set")
        ar = self.arena
        if ar.kind not in ArenaSpec.KINDS:
            raise ConfigError(f"arena.kind must be one of {ArenaSpec.KINDS}")
        if ar.kind != "unbounded":
            if not (ar.width > 0.0 and ar.height > 0.0):
                raise ConfigError("bounded/torus arena needs positive width and height")
            # spawn rectangle must sit inside the arena rectangle
            if (abs(sp.center[0]) + sp.width / 2.0 > ar.width / 2.0 + 1e-12
                    or abs(sp.center[1]) + sp.height / 2.0 > ar.height / 2.0 + 1e-12):
                raise ConfigError("spawn rectangle extends outside the arena")
        self._validate_idiosyncrasy()
        if self.body_radius < 0.0:
            raise ConfigError("body_radius_m must be non-negative")
        cl = self.classifier
        if not (0.0 < cl.mill_max < cl.ellipse_max):
            raise ConfigError("classifier thresholds must satisfy 0 < mill_max < ellipse_max")
        if not (0.0 < cl.window_fraction <= 1.0):
            raise ConfigError("classifier.window_fraction must be in (0, 1]")
        if cl.min_window_ticks < 1:
            raise ConfigError("classifier.min_window_ticks must be at least 1")
        if cl.link_distance is not None and cl.link_distance <= 0.0:
            raise ConfigError("classifier.link_distance_m must be positive when set")
        if self.sensing_backend not in ("auto", "dense", "grid"):
            raise ConfigError(f"sensing_backend must be auto|dense|grid, got {self.sensing_backend!r}")
        if self.sensing_backend == "grid" and self.arena.kind == "torus":
            raise ConfigError("grid sensing does not support torus arenas; use dense")
        if self.sensor_target not in ("point", "body"):
            raise ConfigError(f"sensor_target must be point|body, got {self.sensor_target!r}")
        return self

    @property
    def sensor_target_radius(self) -> float:
        """Radius of the disk a sensor has to catch: 0 for point targets.

        In body mode another agent is detected as soon as any part of its
        body disk (body_radius) overlaps the sensing cone, which widens the
        effective acceptance angle by asin(r/d) at distance d and extends
        reach to gamma + r. Point mode reproduces the bare center-point test.
        """
        return self.body_radius if self.sensor_target == "body" else 0.0

    def _validate_mode(self, where: str, mode: ControllerMode) -> None:
        if not isinstance(mode, ControllerMode):
            raise ConfigError(f"{where}: expected a ControllerMode")
        if not (math.isfinite(mode.v) and mode.v > 0.0):
            raise ConfigError(f"{where}: v must be positive and finite, got {mode.v}")
        if not (math.isfinite(mode.omega) and mode.omega > 0.0):
            raise ConfigError(f"{where}: omega must be positive and finite, got {mode.omega}")
        if mode.v > self.caps.max_speed:
            raise ConfigError(f"{where}: v={mode.v} exceeds cap {self.caps.max_speed}")
        # the no-contact branch of self-centering commands 3*omega
        peak_turn = 3.0 * mode.omega if mode.tag is Behavior.SELF_CENTERING else mode.omega
        if peak_turn > self.caps.max_turn_rate:
            raise ConfigError(
                f"{where}: peak turn rate {peak_turn} exceeds cap {self.caps.max_turn_rate}")

    def _validate_idiosyncrasy(self) -> None:
        spec = self.idiosyncrasy
        for name, fs, upper in [
            ("speed_factor", spec.speed_factor, math.inf),
            ("turn_factor", spec.turn_factor, math.inf),
            ("vision_distance_m", spec.vision_distance, math.inf),
            ("vision_halfangle_rad", spec.vision_halfangle, math.pi),
        ]:
            if isinstance(fs, NormalSpec):
                if fs.std < 0.0:
                    raise ConfigError(f"idiosyncrasy.{name}: std must be non-negative")
                if not (fs.mean > 0.0):
                    raise ConfigError(
                        f"idiosyncrasy.{name}: degenerate distribution, mean must be positive")
                if fs.mean > upper:
                    raise ConfigError(f"idiosyncrasy.{name}: mean {fs.mean} exceeds {upper}")
            else:
                vals = tuple(float(v) for v in fs)
                if len(vals) != self.n_agents:
                    raise ConfigError(
                        f"idiosyncrasy.{name}: expected {self.n_agents} explicit values, "
                        f"got {len(vals)}")
                for v in vals:
                    if not (math.isfinite(v) and 0.0 < v <= upper):
                        raise ConfigError(f"idiosyncrasy.{name}: value {v} out of range (0, {upper}]")

    # -- helpers ---------------------------------------------------------

    def mode_for(self, agent_id: int) -> ControllerMode:
        return self.assignments.get(agent_id, self.controller)

    def resolved_assignments(self) -> list:
        """Controller per agent id, in id order."""
        return [self.mode_for(i) for i in range(self.n_agents)]

    # -- JSON ------------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "version": CONFIG_VERSION,
            "n_agents": self.n_agents,
            "seed": self.seed,
            "dt_s": self.dt,
            "controller": self.controller.to_json_dict(),
            "assignments": {str(k): v.to_json_dict() for k, v in sorted(self.assignments.items())},
            "arena": self.arena.to_json_dict(),
            "spawn": self.spawn.to_json_dict(),
            "noise": self.noise.to_json_dict(),
            "idiosyncrasy": self.idiosyncrasy.to_json_dict(),
            "caps": self.caps.to_json_dict(),
            "body_radius_m": self.body_radius,
            "classifier": self.classifier.to_json_dict(),
            "sensing_backend": self.sensing_backend,
            "sensor_target": self.sensor_target,
        }

    @staticmethod
    def from_json_dict(d: Mapping[str, Any]) -> "WorldConfig":
        if not isinstance(d, Mapping):
            raise ConfigError("config root must be a JSON object")
        version = d.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version!r} (expected {CONFIG_VERSION})")
        try:
            n_agents = int(d["n_agents"])
            seed = int(d["seed"])
            controller = ControllerMode.from_json_dict(d["controller"])
        except KeyError as e:
            raise ConfigError(f"config missing required field {e.args[0]!r}") from e
        assignments = {}
        for k, v in d.get("assignments", {}).items():
            try:
                aid = int(k)
            except ValueError:
                raise ConfigError(f"assignments key {k!r} is not an agent id") from None
            assignments[aid] = ControllerMode.from_json_dict(v)
        cfg = WorldConfig(
            n_agents=n_agents,
            seed=seed,
            controller=controller,
            dt=float(d.get("dt_s", DEFAULT_DT_S)),
            assignments=assignments,
            arena=ArenaSpec.from_json_dict(d.get("arena", {"kind": "unbounded"})),
            spawn=SpawnSpec.from_json_dict(d.get("spawn", {})),
            noise=NoiseSpec.from_json_dict(d.get("noise", {})),
            idiosyncrasy=IdiosyncrasySpec.from_json_dict(d.get("idiosyncrasy", {})),
            caps=ActuatorCaps.from_json_dict(d.get("caps", {})),
            body_radius=float(d.get("body_radius_m", DEFAULT_BODY_RADIUS_M)),
            classifier=ClassifierConfig.from_json_dict(d.get("classifier", {})),
            sensing_backend=str(d.get("sensing_backend", "auto")),
            sensor_target=str(d.get("sensor_target", "point")),
        )
        return cfg.validate()

    def to_json(self) -> str:
        return dump_stable_json(self.to_json_dict())

    def replace(self, **kwargs) -> "WorldConfig":
        return dataclasses.replace(self, **kwargs)


def load_config(path: str | Path) -> WorldConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {p} is not valid JSON: {e}") from e
    return WorldConfig.from_json_dict(data)


def save_config(config: WorldConfig, path: str | Path) -> None:
    Path(path).write_text(config.to_json() + "\n")


# -- JSON field helpers ----------------------------------------------------

def _number(d: Mapping[str, Any], key: str, where: str) -> float:
    try:
        return float(d[key])
    except KeyError:
        raise ConfigError(f"missing required field {where}") from None
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be a number, got {d[key]!r}") from None


def _angular(d: Mapping[str, Any], rad_key: str, deg_key: str, where: str) -> float:
    """Read an angle-typed field, accepting a _deg alternative spelling."""
    if rad_key in d:
        return _number(d, rad_key, f"{where} ({rad_key})")
    if deg_key in d:
        return math.radians(_number(d, deg_key, f"{where} ({deg_key})"))
    raise ConfigError(f"missing required field {where} ({rad_key} or {deg_key})")


def _factor_to_json(fs: FactorSpec) -> Any:
    if isinstance(fs, NormalSpec):
        return fs.to_json_dict()
    return list(fs)


def _factor_from_json(v: Any, key: str, scale: float) -> FactorSpec:
    if isinstance(v, Mapping):
        if "mean" not in v:
            raise ConfigError(f"idiosyncrasy.{key}: distribution needs a mean")
        return NormalSpec(float(v["mean"]) * scale, float(v.get("std", 0.0)) * scale)
    if isinstance(v, (list, tuple)):
        return tuple(float(x) * scale for x in v)
    raise ConfigError(f"idiosyncrasy.{key}: expected mean/std object or value list")
