"""Batched lockstep runner with metric-trace capture.

A batch stacks B compatible worlds into (B, N) arrays and advances them all
with the same vectorized kernels a single World uses, one tick at a time.
Compatible means identical n_agents, dt, arena, noise, body radius, and
sensing backend; controllers, idiosyncrasies, and seeds may differ per
world, which is what makes whole sweep cells (and whole runs of trials)
advance in one numpy call per tick.

Trace convention (row = tick index, a run of T ticks captures T + 1 rows):
row L holds the state at tick L; its sensor column is the reading that
produced the step into L (row 0: all zero); its diffusion value uses the
effective inputs applied on that same step (row 0: undefined turn, so every
pivot falls back to the agent's position). This way a resumed snapshot
continues the stream without re-sensing, and live frames match records.

Per row the engine always captures circliness, min pairwise distance, and
the count of colliding pairs (pairs closer than body_radius); the two
costlier metrics (diffusion, component count) are captured from
``metrics_from`` onward, which sweeps set to the start of the
classification window. Rows before that hold NaN / 0 sentinels.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import WorldConfig
from .metrics import (
    circliness_batch,
    colliding_pairs_from_d2,
    min_pair_distance,
    min_pair_from_d2,
    n_components_batch,
    pivots_batch,
    radii_batch,
)
from .model import (
    advance_batch,
    fov_seen_dense,
    init_world,
    pair_displacements,
    sense_grid,
)


class EngineError(RuntimeError):
    """Engine-level failures: incompatible batches, bad options."""


@dataclass(frozen=True)
class RunOptions:
    ticks: int
    metrics_from: int = 0        # first row with diffusion / component capture
    record_states: bool = False  # keep per-row (x, y, heading) + sensor bits
    capture_radii: bool = False  # keep per-row distance-to-centroid per agent
    check_finite: bool = True

    def validated(self) -> "RunOptions":
        if self.ticks < 0:
            raise EngineError(f"ticks must be non-negative, got {self.ticks}")
        if self.metrics_from < 0:
            raise EngineError(f"metrics_from must be non-negative, got {self.metrics_from}")
        return self


@dataclass
class RunResult:
    """Per-row metric arrays (rows, B) plus optional state capture."""

    n_worlds: int
    n_agents: int
    rows: int
    ticks: int
    dt: float
    circliness: np.ndarray       # (rows, B) float64, +inf possible
    diffusion: np.ndarray        # (rows, B) float64, NaN before metrics_from
    min_pair: np.ndarray         # (rows, B) float64
    n_components: np.ndarray     # (rows, B) int32, 0 before metrics_from
    colliding_pairs: np.ndarray  # (rows, B) int32
    collisions_total: np.ndarray  # (B,) int64, pair-tick events over all rows
    wall_s: float
    agent_ticks: int
    worlds: list = field(default_factory=list)
    states: np.ndarray | None = None   # (rows, B, N, 3): x, y, heading
    sensors: np.ndarray | None = None  # (rows, B, N) uint8
    radii: np.ndarray | None = None    # (rows, B, N) float64

    @property
    def agent_ticks_per_ms(self) -> float:
        if self.wall_s <= 0.0:
            return float("inf")
        return self.agent_ticks / (self.wall_s * 1e3)

    def world_view(self, b: int) -> "RunResult":
        """Single-world slice (metric columns only), used by record export."""
        return RunResult(
            n_worlds=1, n_agents=self.n_agents, rows=self.rows, ticks=self.ticks,
            dt=self.dt,
            circliness=self.circliness[:, b:b + 1],
            diffusion=self.diffusion[:, b:b + 1],
            min_pair=self.min_pair[:, b:b + 1],
            n_components=self.n_components[:, b:b + 1],
            colliding_pairs=self.colliding_pairs[:, b:b + 1],
            collisions_total=self.collisions_total[b:b + 1],
            wall_s=self.wall_s, agent_ticks=self.agent_ticks,
            worlds=[self.worlds[b]] if self.worlds else [],
            states=None if self.states is None else self.states[:, b:b + 1],
            sensors=None if self.sensors is None else self.sensors[:, b:b + 1],
            radii=None if self.radii is None else self.radii[:, b:b + 1],
        )


class _BatchState:
    """Stacked view over several worlds; satisfies the advance_batch protocol."""

    def __init__(self, worlds: list):
        ref = worlds[0]
        self.worlds = worlds
        self.n = ref.n
        self.dt = ref.config.dt
        self.arena = ref.config.arena
        self.noise = ref.config.noise
        self.rngs = [w.rng for w in worlds]
        self.tick = ref.tick
        stack = lambda name: np.concatenate([getattr(w, name) for w in worlds], axis=0)
        for name in ("x", "y", "heading", "theta1", "theta2", "gamma", "gamma2",
                     "cos_half", "rt2", "sense_range2", "sin_half_rt",
                     "u1_if0", "u2_if0", "u1_if1", "u2_if1",
                     "u1_eff", "u2_eff"):
            setattr(self, name, stack(name))
        self.last_sensor = np.concatenate([w.last_sensor for w in worlds], axis=0)

    def write_back(self, ticks_done: int, collisions_per_world: np.ndarray) -> None:
        for b, w in enumerate(self.worlds):
            w.x[0] = self.x[b]
            w.y[0] = self.y[b]
            w.heading[0] = self.heading[b]
            w.last_sensor[0] = self.last_sensor[b]
            w.u1_eff[0] = self.u1_eff[b]
            w.u2_eff[0] = self.u2_eff[b]
            w.tick += ticks_done
            w.collisions_total += int(collisions_per_world[b])


def _check_compatible(worlds: list) -> None:
    ref = worlds[0].config
    ref_grid = worlds[0]._use_grid()
    for w in worlds[1:]:
        c = w.config
        same = (c.n_agents == ref.n_agents and c.dt == ref.dt
                and c.arena == ref.arena and c.noise == ref.noise
                and c.body_radius == ref.body_radius
                and w._use_grid() == ref_grid)
        if not same:
            raise EngineError(
                "worlds in a batch must share n_agents, dt, arena, noise, "
                "body_radius, and sensing backend")
    if ref_grid and len(worlds) > 1:
        raise EngineError("grid sensing supports single-world batches only")


def run_worlds(worlds: list, options: RunOptions) -> RunResult:
    """Advance worlds in lockstep for options.ticks, capturing traces.

    The worlds are mutated in place (positions, tick counters, generators),
    so a caller can keep stepping them afterwards; the returned arrays are
    standalone copies.
    """
    options = options.validated()
    if not worlds:
        raise EngineError("run_worlds needs at least one world")
    _check_compatible(worlds)
    st = _BatchState(worlds)
    n_b, n = len(worlds), st.n
    ticks = options.ticks
    rows = ticks + 1
    use_grid = worlds[0]._use_grid()
    body_radius = worlds[0].config.body_radius

    cbar = np.empty((rows, n_b))
    delta = np.full((rows, n_b), np.nan)
    min_pair = np.empty((rows, n_b))
    ncomp = np.zeros((rows, n_b), dtype=np.int32)
    colliding = np.zeros((rows, n_b), dtype=np.int32)
    states = sensors = radii = None
    if options.record_states:
        states = np.empty((rows, n_b, n, 3))
        sensors = np.empty((rows, n_b, n), dtype=np.uint8)
    if options.capture_radii:
        radii = np.empty((rows, n_b, n))

    gamma_bar = st.gamma.mean(axis=-1)                     # (B,)
    link = np.array([
        w.config.classifier.link_distance if w.config.classifier.link_distance
        is not None else float(gamma_bar[b])
        for b, w in enumerate(worlds)])
    dt = st.dt
    arena = st.arena

    t0 = time.perf_counter()
    for row in range(rows):
        cos_h = np.cos(st.heading)
        sin_h = np.sin(st.heading)
        if use_grid:
            seen = sense_grid(st.x[0], st.y[0], cos_h[0], sin_h[0],
                              st.sense_range2[0], st.cos_half[0],
                              st.rt2[0], st.sin_half_rt[0],
                              worlds[0]._grid_cell()).reshape(1, n)
            d2 = None
        else:
            dx, dy, d2 = pair_displacements(st.x, st.y, arena)
            seen = fov_seen_dense(dx, dy, d2, cos_h, sin_h,
                                  st.sense_range2, st.cos_half,
                                  st.rt2, st.sin_half_rt)

        # -- capture row ---------------------------------------------------
        cbar[row] = circliness_batch(st.x, st.y)
        if d2 is not None:
            min_pair[row] = min_pair_from_d2(d2)
            colliding[row] = colliding_pairs_from_d2(d2, body_radius)
        else:
            min_pair[row], colliding[row] = _pairwise_kdtree(st.x[0], st.y[0], body_radius)
        if row >= options.metrics_from:
            px, py = pivots_batch(st.x, st.y, st.heading, st.u1_eff, st.u2_eff, dt)
            delta[row] = min_pair_distance(px, py) / gamma_bar
            if d2 is not None:
                ncomp[row] = n_components_batch(d2, link)
            else:
                ncomp[row] = _n_components_kdtree(st.x[0], st.y[0], float(link[0]))
        if states is not None:
            states[row, :, :, 0] = st.x
            states[row, :, :, 1] = st.y
            states[row, :, :, 2] = st.heading
            sensors[row] = st.last_sensor
        if radii is not None:
            radii[row] = radii_batch(st.x, st.y)

        if row == ticks:
            break
        advance_batch(st, seen, cos_h, sin_h)
    wall_s = time.perf_counter() - t0

    # world counters track pre-move snapshots only (rows 0 .. T-1), which is
    # what stepping the worlds one tick at a time would have accumulated
    st.write_back(ticks, colliding[:ticks].sum(axis=0) if ticks > 0
                  else np.zeros(n_b, dtype=np.int64))
    if options.check_finite:
        for w in worlds:
            w.check_finite()

    return RunResult(
        n_worlds=n_b, n_agents=n, rows=rows, ticks=ticks, dt=dt,
        circliness=cbar, diffusion=delta, min_pair=min_pair,
        n_components=ncomp, colliding_pairs=colliding,
        # pre-move rows only, so resumed runs add up instead of counting
        # the boundary row twice (matches World.step's counter)
        collisions_total=colliding[:ticks].sum(axis=0, dtype=np.int64)
        if ticks > 0 else np.zeros(n_b, dtype=np.int64),
        wall_s=wall_s, agent_ticks=n_b * n * ticks,
        worlds=list(worlds), states=states, sensors=sensors, radii=radii,
    )


def run_configs(configs: list, options: RunOptions) -> RunResult:
    """Initialize one world per config and run them as a single batch."""
    if not configs:
        raise EngineError("run_configs needs at least one config")
    return run_worlds([init_world(c) for c in configs], options)


def run_config(config: WorldConfig, options: RunOptions) -> RunResult:
    return run_configs([config], options)


# -- large-N single-world metric fallbacks (grid sensing path) --------------


def _pairwise_kdtree(x: np.ndarray, y: np.ndarray, body_radius: float) -> tuple:
    from scipy.spatial import cKDTree
    n = x.shape[0]
    if n < 2:
        return np.array([np.inf]), np.array([0])
    pts = np.column_stack([x, y])
    tree = cKDTree(pts)
    d, _ = tree.query(pts, k=2)
    nearest = float(d[:, 1].min())
    pairs = tree.query_pairs(r=body_radius, output_type="ndarray")
    hits = 0
    if len(pairs):
        pd = np.hypot(x[pairs[:, 0]] - x[pairs[:, 1]], y[pairs[:, 0]] - y[pairs[:, 1]])
        hits = int((pd < body_radius).sum())
    return np.array([nearest]), np.array([hits])


def _n_components_kdtree(x: np.ndarray, y: np.ndarray, link: float) -> int:
    from scipy.spatial import cKDTree
    n = x.shape[0]
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    tree = cKDTree(np.column_stack([x, y]))
    for i, j in tree.query_pairs(r=link):
        ra, rb = find(i), find(j)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return sum(1 for i in range(n) if find(i) == i)
