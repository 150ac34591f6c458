"""Agent kinematics, binary cone sensing, and the world state container.

Model summary. Agents are unicycles on the plane. Each control step an agent
reads one bit y (does any other agent fall inside my vision cone?), looks up
its controller's (forward speed, turn rate) pair for that bit, scales both by
its personal actuation factors, and takes one explicit Euler step:

    x'       = x + u1 * theta1 * cos(heading) * dt
    y'       = y + u1 * theta1 * sin(heading) * dt
    heading' = (heading + u2 * theta2 * dt) mod 2*pi

Headings follow the math convention: 0 along +x, increasing counterclockwise.
Positive turn rate turns left.

The module keeps two implementations of every per-agent rule:

* scalar reference functions (``apply_controller``, ``step_agent``,
  ``sense``) written for clarity, used in tests as an independent oracle
  (``sense`` uses atan2 bearings; the kernel uses a cosine projection);
* vectorized kernels over arrays of shape (B, N) where B worlds advance in
  lockstep. ``World`` is the B = 1 case.

Per-tick random draw order (frozen; replay depends on it): sensor-flip
uniforms, then speed factor normals, then turn factor normals, each drawn
from the world's own generator only when the corresponding noise is enabled.
World-init draw order: positions (x batch then y batch, or sequential x,y
pairs under min_separation), headings, speed factors, turn factors, vision
distances, vision halfangles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace
from typing import Sequence

import numpy as np

from .config import (
    ArenaSpec,
    Behavior,
    ConfigError,
    ControllerMode,
    IdiosyncrasySpec,
    NormalSpec,
    NoiseSpec,
    WorldConfig,
)
from .util import TWO_PI, positive_truncated_normal, wrap_angle

MODE_CODE = {Behavior.MILLING: 0, Behavior.DIFFUSING: 1, Behavior.SELF_CENTERING: 2}
CODE_MODE = {v: k for k, v in MODE_CODE.items()}

SPAWN_MAX_ATTEMPTS = 1000


class ModelError(RuntimeError):
    """Model-integrity violation: non-finite state or input reached the step."""


# ---------------------------------------------------------------------------
# scalar reference layer


@dataclass(frozen=True)
class ControlInput:
    forward_speed: float  # m/s, before actuation factors
    turn_rate: float      # rad/s, before actuation factors


@dataclass
class AgentState:
    id: int
    x: float
    y: float
    heading: float
    speed_factor: float = 1.0
    turn_factor: float = 1.0
    vision_distance: float = 1.10
    vision_halfangle: float = math.radians(49.0) / 2.0
    last_sensor: int = 0


def controller_table(mode: ControllerMode) -> tuple:
    """(u1_if0, u2_if0, u1_if1, u2_if1) for a controller mode.

    Milling always drives forward and flips turn direction on contact.
    Diffusing backs straight up on contact, spins in place otherwise.
    Self-centering drives toward whatever it sees and counter-spins three
    times faster when it sees nothing.
    """
    v, w = mode.v, mode.omega
    if mode.tag is Behavior.MILLING:
        return (v, -w, v, w)
    if mode.tag is Behavior.DIFFUSING:
        return (0.0, w, -v, 0.0)
    if mode.tag is Behavior.SELF_CENTERING:
        return (0.0, -3.0 * w, v, w)
    raise ConfigError(f"unknown controller tag {mode.tag!r}")


def apply_controller(mode: ControllerMode, sensor: int) -> ControlInput:
    """Map one sensor bit through a controller's lookup table."""
    if sensor not in (0, 1):
        raise ModelError(f"sensor must be 0 or 1, got {sensor!r}")
    u1_0, u2_0, u1_1, u2_1 = controller_table(mode)
    if sensor:
        return ControlInput(u1_1, u2_1)
    return ControlInput(u1_0, u2_0)


def _apply_arena_scalar(x: float, y: float, arena: ArenaSpec) -> tuple:
    if arena.kind == "bounded":
        hw, hh = arena.width / 2.0, arena.height / 2.0
        return (min(max(x, -hw), hw), min(max(y, -hh), hh))
    if arena.kind == "torus":
        hw, hh = arena.width / 2.0, arena.height / 2.0
        return ((x + hw) % arena.width - hw, (y + hh) % arena.height - hh)
    return (x, y)


def step_agent(state: AgentState, inp: ControlInput, dt: float,
               arena: ArenaSpec = ArenaSpec.unbounded(),
               noise_factors: tuple = (1.0, 1.0)) -> AgentState:
    """One Euler step for a single agent; returns a new state.

    noise_factors are the per-step multiplicative disturbances on the two
    actuation factors (both 1.0 when actuation noise is off).
    """
    vals = (state.x, state.y, state.heading, state.speed_factor, state.turn_factor,
            inp.forward_speed, inp.turn_rate, dt, noise_factors[0], noise_factors[1])
    if not all(math.isfinite(v) for v in vals):
        raise ModelError(f"non-finite state or input in step_agent: {vals}")
    if dt <= 0.0:
        raise ModelError(f"dt must be positive, got {dt}")
    u1e = inp.forward_speed * state.speed_factor * noise_factors[0]
    u2e = inp.turn_rate * state.turn_factor * noise_factors[1]
    nx = state.x + u1e * math.cos(state.heading) * dt
    ny = state.y + u1e * math.sin(state.heading) * dt
    nh = wrap_angle(state.heading + u2e * dt)
    nx, ny = _apply_arena_scalar(nx, ny, arena)
    return dc_replace(state, x=nx, y=ny, heading=nh)


def sense(states: Sequence[AgentState], index: int,
          arena: ArenaSpec = ArenaSpec.unbounded(),
          target_radius: float = 0.0) -> int:
    """Reference cone sensor: 1 iff any other agent is in range and in view.

    Uses atan2 bearings, deliberately different arithmetic from the
    vectorized kernel's cosine projection, so the two act as cross-checks.
    Inclusive boundaries: distance == range or |bearing| == halfangle count
    as seen. A coincident agent is seen regardless of bearing.

    target_radius > 0 treats the sensed agent as a disk of that radius
    rather than a point: reach extends to vision_distance + r and the cone
    accepts any bearing whose ray passes within asin(r / dist) of the disk
    center. An overlapped disk (dist <= r) is always seen.
    """
    me = states[index]
    r = float(target_radius)
    for j, other in enumerate(states):
        if j == index:
            continue
        dx, dy = other.x - me.x, other.y - me.y
        if arena.kind == "torus":
            dx -= arena.width * round(dx / arena.width)
            dy -= arena.height * round(dy / arena.height)
        dist = math.hypot(dx, dy)
        if dist > me.vision_distance + r:
            continue
        if dist <= r:
            return 1
        # IEEE remainder is exact, so an in-branch difference passes through
        # untouched and boundary bearings stay comparable against halfangle
        bearing = math.remainder(math.atan2(dy, dx) - me.heading, TWO_PI)
        if abs(bearing) <= me.vision_halfangle + math.asin(r / dist):
            return 1
    return 0


# ---------------------------------------------------------------------------
# vectorized kernels (arrays shaped (B, N))


def pair_displacements(x: np.ndarray, y: np.ndarray, arena: ArenaSpec) -> tuple:
    """dx[b,i,j] = x[b,j] - x[b,i] (minimum-image on a torus), plus d2."""
    dx = x[..., None, :] - x[..., :, None]
    dy = y[..., None, :] - y[..., :, None]
    if arena.kind == "torus":
        dx -= arena.width * np.rint(dx / arena.width)
        dy -= arena.height * np.rint(dy / arena.height)
    d2 = dx * dx + dy * dy
    return dx, dy, d2


def fov_seen_dense(dx: np.ndarray, dy: np.ndarray, d2: np.ndarray,
                   cos_h: np.ndarray, sin_h: np.ndarray,
                   range2: np.ndarray, cos_half: np.ndarray,
                   rt2: np.ndarray, sin_half_rt: np.ndarray) -> np.ndarray:
    """seen[b,i] = any j != i within reach of agent i's sensing cone.

    Targets are disks of radius rt (0 for point targets). range2 is
    (gamma + rt)^2 per agent, rt2 is rt^2 and sin_half_rt is
    sin(halfangle) * rt. A disk at distance d intersects the cone iff the
    bearing to its center is at most halfangle + asin(rt/d); expanding
    cos of that sum turns the test into

        proj >= cos_half * sqrt(d^2 - rt^2) - sin_half * rt

    which stays multiplication-only (no inverse trig) and reduces exactly
    to proj >= dist * cos_half when rt = 0. cos_half <= -1 (full-circle
    FOV) short-circuits to a pure range test so rounding can never reject
    an antipodal neighbor; an overlapped disk (d2 <= rt2) always counts.

    The cosine expansion is only an equivalence while halfangle +
    asin(rt/d) <= pi. Past that the disk wraps behind the agent and every
    bearing qualifies; that happens iff rt >= d * sin(halfangle) with
    halfangle >= pi/2, checked squared below.
    """
    n = d2.shape[-1]
    proj = dx * cos_h[..., :, None] + dy * sin_h[..., :, None]
    side = np.sqrt(np.maximum(d2 - rt2[..., :, None], 0.0))
    in_cone = proj >= side * cos_half[..., :, None] - sin_half_rt[..., :, None]
    in_cone |= (cos_half <= -1.0)[..., :, None]
    in_cone |= d2 <= rt2[..., :, None]
    wide = (cos_half <= 0.0) & (rt2 > 0.0)
    if wide.any():
        rt2_i = rt2[..., :, None]
        in_cone |= wide[..., :, None] & (rt2_i * rt2_i >=
                                         d2 * np.square(sin_half_rt)[..., :, None])
    hit = (d2 <= range2[..., :, None]) & in_cone
    idx = np.arange(n)
    hit[..., idx, idx] = False
    return hit.any(axis=-1)


def sense_batch(x: np.ndarray, y: np.ndarray, cos_h: np.ndarray, sin_h: np.ndarray,
                range2: np.ndarray, cos_half: np.ndarray,
                rt2: np.ndarray, sin_half_rt: np.ndarray,
                arena: ArenaSpec) -> tuple:
    """Dense path: returns (seen, d2) so callers can reuse the distances."""
    dx, dy, d2 = pair_displacements(x, y, arena)
    return fov_seen_dense(dx, dy, d2, cos_h, sin_h, range2, cos_half,
                          rt2, sin_half_rt), d2


def sense_grid(x: np.ndarray, y: np.ndarray, cos_h: np.ndarray, sin_h: np.ndarray,
               range2: np.ndarray, cos_half: np.ndarray,
               rt2: np.ndarray, sin_half_rt: np.ndarray, cell: float) -> np.ndarray:
    """Uniform-grid sensing for a single world (1-D arrays of length N).

    cell must be >= every agent's sensing reach (gamma + rt) so a 3x3
    neighborhood always covers the cone. Candidate pairs go through
    arithmetic identical to the dense kernel's, so results match it bit
    for bit.
    """
    n = x.shape[0]
    seen = np.zeros(n, dtype=bool)
    if n <= 1:
        return seen
    cx = np.floor(x / cell).astype(np.int64)
    cy = np.floor(y / cell).astype(np.int64)
    buckets: dict = {}
    for i in range(n):
        buckets.setdefault((int(cx[i]), int(cy[i])), []).append(i)
    offsets = [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)]
    for i in range(n):
        cand: list = []
        ci, cj = int(cx[i]), int(cy[i])
        for a, b in offsets:
            cand.extend(buckets.get((ci + a, cj + b), ()))
        cand = [j for j in cand if j != i]
        if not cand:
            continue
        js = np.asarray(cand, dtype=np.intp)
        ddx = x[js] - x[i]
        ddy = y[js] - y[i]
        dd2 = ddx * ddx + ddy * ddy
        proj = ddx * cos_h[i] + ddy * sin_h[i]
        side = np.sqrt(np.maximum(dd2 - rt2[i], 0.0))
        in_cone = proj >= side * cos_half[i] - sin_half_rt[i]
        if cos_half[i] <= -1.0:
            in_cone |= True
        in_cone |= dd2 <= rt2[i]
        if cos_half[i] <= 0.0 and rt2[i] > 0.0:
            in_cone |= rt2[i] * rt2[i] >= dd2 * (sin_half_rt[i] * sin_half_rt[i])
        hit = (dd2 <= range2[i]) & in_cone
        seen[i] = bool(hit.any())
    return seen


def apply_arena_batch(x: np.ndarray, y: np.ndarray, arena: ArenaSpec) -> None:
    """Clamp or wrap positions in place."""
    if arena.kind == "bounded":
        np.clip(x, -arena.width / 2.0, arena.width / 2.0, out=x)
        np.clip(y, -arena.height / 2.0, arena.height / 2.0, out=y)
    elif arena.kind == "torus":
        hw, hh = arena.width / 2.0, arena.height / 2.0
        x += hw
        x %= arena.width
        x -= hw
        y += hh
        y %= arena.height
        y -= hh


# ---------------------------------------------------------------------------
# world container


class World:
    """One simulated world: SoA arrays of shape (1, N) plus its generator.

    The leading batch axis keeps this bit-compatible with the batched engine
    (which runs the same kernels on (B, N) arrays); a single world stepped
    here and the same world run through the engine produce identical bytes.
    """

    def __init__(self, config: WorldConfig, rng: np.random.Generator,
                 x: np.ndarray, y: np.ndarray, heading: np.ndarray,
                 theta1: np.ndarray, theta2: np.ndarray,
                 gamma: np.ndarray, half_fov: np.ndarray):
        self.config = config
        self.rng = rng
        self.n = config.n_agents
        self.tick = 0
        self.collisions_total = 0
        shape = (1, self.n)
        for name, arr in [("x", x), ("y", y), ("heading", heading),
                          ("theta1", theta1), ("theta2", theta2),
                          ("gamma", gamma), ("half_fov", half_fov)]:
            a = np.ascontiguousarray(arr, dtype=np.float64).reshape(shape)
            setattr(self, name, a)
        self._refresh_sensor_consts()
        self.last_sensor = np.zeros(shape, dtype=np.uint8)
        # effective inputs applied on the step entering the current tick
        self.u1_eff = np.zeros(shape, dtype=np.float64)
        self.u2_eff = np.zeros(shape, dtype=np.float64)
        self._install_modes([config.mode_for(i) for i in range(self.n)])

    def _refresh_sensor_consts(self) -> None:
        """Derive the sensing-kernel arrays from gamma / half_fov / config."""
        rt = self.config.sensor_target_radius
        self.gamma2 = self.gamma * self.gamma
        self.cos_half = np.cos(self.half_fov)
        self.rt2 = np.full_like(self.gamma, rt * rt)
        self.sense_range2 = (self.gamma + rt) ** 2
        self.sin_half_rt = np.sin(self.half_fov) * rt

    # -- controllers -----------------------------------------------------

    def _install_modes(self, modes: list) -> None:
        self.modes = list(modes)
        self.mode_code = np.array([[MODE_CODE[m.tag] for m in modes]], dtype=np.uint8)
        tables = np.array([controller_table(m) for m in modes], dtype=np.float64)
        self.u1_if0 = np.ascontiguousarray(tables[:, 0]).reshape(1, self.n)
        self.u2_if0 = np.ascontiguousarray(tables[:, 1]).reshape(1, self.n)
        self.u1_if1 = np.ascontiguousarray(tables[:, 2]).reshape(1, self.n)
        self.u2_if1 = np.ascontiguousarray(tables[:, 3]).reshape(1, self.n)

    def set_mode(self, agent_id: int, mode: ControllerMode) -> None:
        """Reassign one agent's controller (live steering)."""
        if not (0 <= agent_id < self.n):
            raise ConfigError(f"agent id {agent_id} out of range [0, {self.n})")
        trial = self.config.replace(assignments={**self.config.assignments, agent_id: mode})
        trial.validate()
        self.config = trial
        modes = list(self.modes)
        modes[agent_id] = mode
        self._install_modes(modes)

    def set_shared_param(self, name: str, value: float) -> None:
        """Update a shared numeric parameter for every agent.

        v / omega rewrite every controller's gain (tags preserved);
        vision_distance / vision_halfangle overwrite the per-agent sensor
        arrays and pin the config's idiosyncrasy to the explicit values.
        """
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"set_param {name}: value must be finite")
        if name in ("v", "omega"):
            def rewrite(m: ControllerMode) -> ControllerMode:
                return dc_replace(m, **{("v" if name == "v" else "omega"): value})
            trial = self.config.replace(
                controller=rewrite(self.config.controller),
                assignments={k: rewrite(m) for k, m in self.config.assignments.items()})
            trial.validate()
            self.config = trial
            self._install_modes([rewrite(m) for m in self.modes])
        elif name == "vision_distance":
            if value <= 0.0:
                raise ConfigError("vision_distance must be positive")
            vals = tuple([value] * self.n)
            self.config = self.config.replace(
                idiosyncrasy=dc_replace(self.config.idiosyncrasy, vision_distance=vals))
            self.gamma[:] = value
            self._refresh_sensor_consts()
        elif name == "vision_halfangle":
            if not (0.0 < value <= math.pi):
                raise ConfigError("vision_halfangle must be in (0, pi]")
            vals = tuple([value] * self.n)
            self.config = self.config.replace(
                idiosyncrasy=dc_replace(self.config.idiosyncrasy, vision_halfangle=vals))
            self.half_fov[:] = value
            self._refresh_sensor_consts()
        else:
            raise ConfigError(
                f"unknown shared parameter {name!r} "
                "(expected v, omega, vision_distance, or vision_halfangle)")

    # -- batch-state protocol (advance_batch reads these) ------------------

    @property
    def rngs(self) -> list:
        return [self.rng]

    @property
    def dt(self) -> float:
        return self.config.dt

    @property
    def arena(self) -> ArenaSpec:
        return self.config.arena

    @property
    def noise(self) -> NoiseSpec:
        return self.config.noise

    # -- sensing backend selection ---------------------------------------

    GRID_MIN_AGENTS = 64

    def _use_grid(self) -> bool:
        backend = self.config.sensing_backend
        if backend == "dense":
            return False
        if backend == "grid":
            return True
        return self.n >= self.GRID_MIN_AGENTS and self.config.arena.kind != "torus"

    def _grid_cell(self) -> float:
        # Strictly larger than the sensing reach: the visibility test
        # (dd2 <= range2, in floats) can pass pairs whose exact separation
        # exceeds the reach by a rounding ulp, and with cell == reach such
        # a pair can straddle two cell boundaries and escape the 3x3 scan.
        reach = float(self.gamma.max()) + self.config.sensor_target_radius
        return max(reach, 1e-9) * (1.0 + 1e-9)

    def sense_now(self) -> np.ndarray:
        """Geometric sensor bits for the current state (no noise, no draws)."""
        cos_h, sin_h = np.cos(self.heading), np.sin(self.heading)
        if self._use_grid():
            seen = sense_grid(self.x[0], self.y[0], cos_h[0], sin_h[0],
                              self.sense_range2[0], self.cos_half[0],
                              self.rt2[0], self.sin_half_rt[0], self._grid_cell())
            return seen.reshape(1, self.n)
        seen, _ = sense_batch(self.x, self.y, cos_h, sin_h,
                              self.sense_range2, self.cos_half,
                              self.rt2, self.sin_half_rt, self.config.arena)
        return seen

    # -- stepping ---------------------------------------------------------

    def step(self, n_ticks: int = 1) -> None:
        """Advance n ticks, accumulating the collision-event counter."""
        cfg = self.config
        use_grid = self._use_grid()
        grid_cell = self._grid_cell() if use_grid else 0.0
        body2 = cfg.body_radius * cfg.body_radius
        iu = np.triu_indices(self.n, k=1)
        for _ in range(n_ticks):
            cos_h, sin_h = np.cos(self.heading), np.sin(self.heading)
            if use_grid:
                seen = sense_grid(self.x[0], self.y[0], cos_h[0], sin_h[0],
                                  self.sense_range2[0], self.cos_half[0],
                                  self.rt2[0], self.sin_half_rt[0], grid_cell
                                  ).reshape(1, self.n)
                self.collisions_total += _colliding_pairs_kdtree(
                    self.x[0], self.y[0], cfg.body_radius)
            else:
                seen, d2 = sense_batch(self.x, self.y, cos_h, sin_h,
                                       self.sense_range2, self.cos_half,
                                       self.rt2, self.sin_half_rt, cfg.arena)
                if self.n > 1:
                    self.collisions_total += int((d2[0][iu] < body2).sum())
            advance_batch(self, seen, cos_h, sin_h)

    def check_finite(self) -> None:
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all()
                and np.isfinite(self.heading).all()):
            raise ModelError("non-finite agent state encountered")

    # -- views -------------------------------------------------------------

    def agent_states(self) -> list:
        return [AgentState(
            id=i, x=float(self.x[0, i]), y=float(self.y[0, i]),
            heading=float(self.heading[0, i]),
            speed_factor=float(self.theta1[0, i]), turn_factor=float(self.theta2[0, i]),
            vision_distance=float(self.gamma[0, i]),
            vision_halfangle=float(self.half_fov[0, i]),
            last_sensor=int(self.last_sensor[0, i]),
        ) for i in range(self.n)]

    # -- snapshot / restore -------------------------------------------------

    SNAPSHOT_VERSION = 1

    def snapshot(self) -> dict:
        """Full resumable state: config, arrays, inputs, and generator state."""
        return {
            "kind": "world_snapshot",
            "version": self.SNAPSHOT_VERSION,
            "tick": self.tick,
            "collisions_total": self.collisions_total,
            "config": self.config.to_json_dict(),
            "state": {
                "x": self.x[0].tolist(),
                "y": self.y[0].tolist(),
                "heading": self.heading[0].tolist(),
                "last_sensor": self.last_sensor[0].tolist(),
                "u1_eff": self.u1_eff[0].tolist(),
                "u2_eff": self.u2_eff[0].tolist(),
                "speed_factor": self.theta1[0].tolist(),
                "turn_factor": self.theta2[0].tolist(),
                "vision_distance_m": self.gamma[0].tolist(),
                "vision_halfangle_rad": self.half_fov[0].tolist(),
                "modes": [m.to_json_dict() for m in self.modes],
            },
            "rng": self.rng.bit_generator.state,
        }

    @staticmethod
    def from_snapshot(snap: dict) -> "World":
        if snap.get("kind") != "world_snapshot":
            raise ConfigError("not a world snapshot (missing kind marker)")
        if snap.get("version") != World.SNAPSHOT_VERSION:
            raise ConfigError(f"unsupported snapshot version {snap.get('version')!r}")
        config = WorldConfig.from_json_dict(snap["config"])
        st = snap["state"]
        n = config.n_agents
        arrays = {}
        for key in ("x", "y", "heading", "speed_factor", "turn_factor",
                    "vision_distance_m", "vision_halfangle_rad",
                    "last_sensor", "u1_eff", "u2_eff"):
            vals = st.get(key)
            if vals is None or len(vals) != n:
                raise ConfigError(f"snapshot state.{key} missing or wrong length")
            arrays[key] = np.asarray(vals, dtype=np.float64)
        rng = np.random.default_rng(0)
        try:
            rng.bit_generator.state = snap["rng"]
        except (KeyError, ValueError, TypeError) as e:
            raise ConfigError(f"snapshot rng state invalid: {e}") from e
        world = World(config, rng,
                      arrays["x"], arrays["y"], arrays["heading"],
                      arrays["speed_factor"], arrays["turn_factor"],
                      arrays["vision_distance_m"], arrays["vision_halfangle_rad"])
        world.tick = int(snap.get("tick", 0))
        world.collisions_total = int(snap.get("collisions_total", 0))
        world.last_sensor[0] = np.asarray(st["last_sensor"], dtype=np.uint8)
        world.u1_eff[0] = arrays["u1_eff"]
        world.u2_eff[0] = arrays["u2_eff"]
        modes = [ControllerMode.from_json_dict(m) for m in st["modes"]]
        if len(modes) != n:
            raise ConfigError("snapshot state.modes has wrong length")
        world._install_modes(modes)
        return world


def advance_batch(st, seen: np.ndarray,
                  cos_h: np.ndarray, sin_h: np.ndarray) -> None:
    """Shared tail of one tick: noise, controller lookup, Euler update.

    st is any batch-state bundle exposing the (B, N) arrays (x, y, heading,
    theta1, theta2, controller tables, last_sensor, u1_eff, u2_eff), plus n,
    dt, arena, noise, rngs, and a tick counter. World satisfies this with
    B = 1; the engine's stacked batch satisfies it with B = len(worlds).
    Both therefore consume random draws identically: per tick, per world,
    sensor uniforms then speed normals then turn normals.
    """
    noise = st.noise
    n = st.n
    y_bits = seen
    if noise.any_sensor:
        u = np.empty(seen.shape)
        for b, rng in enumerate(st.rngs):
            u[b] = rng.random(n)
        y_bits = np.where(seen, u >= noise.false_negative_rate,
                          u < noise.false_positive_rate)
    u1 = np.where(y_bits, st.u1_if1, st.u1_if0)
    u2 = np.where(y_bits, st.u2_if1, st.u2_if0)
    u1e = u1 * st.theta1
    u2e = u2 * st.theta2
    if noise.any_actuation:
        f1 = np.empty(seen.shape)
        for b, rng in enumerate(st.rngs):
            f1[b] = rng.normal(size=n)
        f2 = np.empty(seen.shape)
        for b, rng in enumerate(st.rngs):
            f2[b] = rng.normal(size=n)
        u1e = u1e * (1.0 + noise.actuation_std * f1)
        u2e = u2e * (1.0 + noise.actuation_std * f2)
    dt = st.dt
    st.x += u1e * cos_h * dt
    st.y += u1e * sin_h * dt
    st.heading += u2e * dt
    st.heading %= TWO_PI
    apply_arena_batch(st.x, st.y, st.arena)
    st.last_sensor[:] = y_bits
    st.u1_eff[:] = u1e
    st.u2_eff[:] = u2e
    st.tick += 1


def _colliding_pairs_kdtree(x: np.ndarray, y: np.ndarray, body_radius: float) -> int:
    """Count pairs strictly closer than body_radius (large-N path)."""
    from scipy.spatial import cKDTree
    pts = np.column_stack([x, y])
    tree = cKDTree(pts)
    pairs = tree.query_pairs(r=body_radius, output_type="ndarray")
    if len(pairs) == 0:
        return 0
    d = np.hypot(x[pairs[:, 0]] - x[pairs[:, 1]], y[pairs[:, 0]] - y[pairs[:, 1]])
    return int((d < body_radius).sum())


# ---------------------------------------------------------------------------
# world construction


def _sample_factor(rng: np.random.Generator, fs, n: int, upper: float) -> np.ndarray:
    if isinstance(fs, NormalSpec):
        return positive_truncated_normal(rng, fs.mean, fs.std, n, upper=upper)
    return np.asarray(fs, dtype=np.float64).copy()


def _spawn_positions(rng: np.random.Generator, spawn, n: int) -> tuple:
    cx, cy = spawn.center
    w, h = spawn.width, spawn.height
    if spawn.min_separation is None:
        xs = cx - w / 2.0 + w * rng.random(n)
        ys = cy - h / 2.0 + h * rng.random(n)
        return xs, ys
    min2 = spawn.min_separation ** 2
    xs = np.empty(n)
    ys = np.empty(n)
    for i in range(n):
        for _ in range(SPAWN_MAX_ATTEMPTS):
            u = rng.random(2)
            px = cx - w / 2.0 + w * u[0]
            py = cy - h / 2.0 + h * u[1]
            if i == 0 or ((xs[:i] - px) ** 2 + (ys[:i] - py) ** 2 >= min2).all():
                xs[i], ys[i] = px, py
                break
        else:
            raise ConfigError(
                f"could not place agent {i} with min_separation="
                f"{spawn.min_separation} after {SPAWN_MAX_ATTEMPTS} attempts; "
                "spawn region too small")
    return xs, ys


def init_world(config: WorldConfig) -> World:
    """Validate a config and sample the initial world from its seed."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    spec = config.idiosyncrasy
    xs, ys = _spawn_positions(rng, config.spawn, config.n_agents)
    heading = (rng.random(config.n_agents) * TWO_PI) % TWO_PI
    theta1 = _sample_factor(rng, spec.speed_factor, config.n_agents, math.inf)
    theta2 = _sample_factor(rng, spec.turn_factor, config.n_agents, math.inf)
    gamma = _sample_factor(rng, spec.vision_distance, config.n_agents, math.inf)
    half_fov = _sample_factor(rng, spec.vision_halfangle, config.n_agents, math.pi)
    return World(config, rng, xs, ys, heading, theta1, theta2, gamma, half_fov)


def step_world(world: World, n_ticks: int = 1) -> World:
    """Functional-style wrapper over World.step for API symmetry."""
    if n_ticks < 0:
        raise ConfigError(f"n_ticks must be non-negative, got {n_ticks}")
    world.step(n_ticks)
    return world
