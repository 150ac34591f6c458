"""Order parameters, pivots, clustering, and run classification.

Circliness of a set of positions is (r_max - r_min) / r_min over distances
to the centroid: 0 for a perfect circle, +inf when some agent sits on the
centroid (r_min below epsilon). Lower is rounder.

The pivot of an agent is the center of the circular path its current input
would trace. Because the engine integrates with explicit Euler steps, the
discrete trajectory under constant input is an exact rotation about

    o = p + R_d * (-sin(a), cos(a)),   a = heading - u2e*dt/2,
    R_d = u1e*dt / (2*sin(u2e*dt/2)),

with u1e, u2e the factor-scaled speed and turn rate. This is the fixed point
of the actual update map (the trajectory orbits o forever, to rounding), and
it converges to the continuous-time center p + (u1e/u2e)(-sin h, cos h) as
dt -> 0. A straight mover (|u2e| below epsilon_omega but u1e nonzero) has no
pivot; a stationary or purely spinning agent pivots on its own position.

The diffusion measure is the minimum pairwise distance between pivots
(positions substituted for undefined pivots), normalized by the population
mean vision distance; above 1 the swarm has spread beyond sensing contact.

Classification reads a run's trailing window of the circliness trace:
window mean < mill_max is a mill; < ellipse_max an ellipsoidal near-mill;
anything flatter is a breakup, split into colliding clusters (collision
events in the window, or everyone still in one connected component at the
end) versus cleanly separated groups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .config import ClassifierConfig
from .model import AgentState, ControlInput, World

CIRCLINESS_EPS = 1e-9
PIVOT_EPS_OMEGA = 1e-6


class MetricError(ValueError):
    """Raised for metric arguments outside the defined domain."""


class PhaseLabel(str, Enum):
    MILL = "mill"
    ELLIPSOIDAL = "ellipsoidal"
    COLLIDING_CLUSTERS = "colliding_clusters"
    SEPARATED_GROUPS = "separated_groups"


# tie-break order for aggregating labels: later entries win ties (pessimistic)
LABEL_SEVERITY = {
    PhaseLabel.MILL: 0,
    PhaseLabel.ELLIPSOIDAL: 1,
    PhaseLabel.SEPARATED_GROUPS: 2,
    PhaseLabel.COLLIDING_CLUSTERS: 3,
}


# ---------------------------------------------------------------------------
# scalar / public operations


def centroid(positions: Sequence) -> tuple:
    pts = np.asarray(positions, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise MetricError(f"positions must be (N, 2) with N >= 1, got {pts.shape}")
    c = pts.mean(axis=0)
    return (float(c[0]), float(c[1]))


def circliness(positions: Sequence, eps: float = CIRCLINESS_EPS) -> float:
    pts = np.asarray(positions, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise MetricError(f"positions must be (N, 2), got {pts.shape}")
    if pts.shape[0] < 2:
        raise MetricError("circliness needs at least two agents")
    c = pts.mean(axis=0)
    r = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1])
    rmin = float(r.min())
    if rmin < eps:
        return math.inf
    return float((r.max() - rmin) / rmin)


def pivot(state: AgentState, inp: ControlInput, dt: float,
          eps_omega: float = PIVOT_EPS_OMEGA):
    """Center of the discrete circular path, or None when undefined.

    Applies the agent's actuation factors to the raw input first. Returns
    the agent's own position for zero effective speed (spin or rest), None
    for a straight mover, and None in the degenerate case where the per-step
    turn is so large that sin(u2e*dt/2) vanishes.
    """
    if dt <= 0.0 or not math.isfinite(dt):
        raise MetricError(f"dt must be positive and finite, got {dt}")
    u1e = inp.forward_speed * state.speed_factor
    u2e = inp.turn_rate * state.turn_factor
    if abs(u2e) < eps_omega:
        if u1e == 0.0:
            return (state.x, state.y)
        return None
    half_phase = u2e * dt / 2.0
    s = math.sin(half_phase)
    if s == 0.0:
        return None
    r_d = u1e * dt / (2.0 * s)
    a = state.heading - half_phase
    return (state.x - r_d * math.sin(a), state.y + r_d * math.cos(a))


def diffusion_metric(world: World, eps_omega: float = PIVOT_EPS_OMEGA) -> float:
    """Min pairwise pivot distance over mean vision distance for a world.

    Uses the effective inputs applied on the step entering the current tick
    (zero before the first step, which makes every pivot the agent's own
    position). Values above 1 mean no pivot pair remains within mutual
    sensing range.
    """
    if world.n < 2:
        raise MetricError("diffusion metric needs at least two agents")
    px, py = pivots_batch(world.x, world.y, world.heading,
                          world.u1_eff, world.u2_eff, world.config.dt, eps_omega)
    gamma_bar = float(world.gamma.mean())
    if gamma_bar <= 0.0:
        raise MetricError("mean vision distance must be positive")
    return float(min_pair_distance(px, py)[0] / gamma_bar)


def cluster_components(positions: Sequence, link_distance: float) -> list:
    """Connected components under 'within link_distance' adjacency.

    Distance ties count as linked. Components are returned as sorted id
    lists, ordered by their smallest member, so the numbering is
    deterministic for a given input.
    """
    pts = np.asarray(positions, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise MetricError(f"positions must be (N, 2) with N >= 1, got {pts.shape}")
    if not (link_distance > 0.0):
        raise MetricError(f"link_distance must be positive, got {link_distance}")
    n = pts.shape[0]
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    link2 = link_distance * link_distance
    for i in range(n):
        for j in range(i + 1, n):
            dx = pts[j, 0] - pts[i, 0]
            dy = pts[j, 1] - pts[i, 1]
            if dx * dx + dy * dy <= link2:
                ra, rb = find(i), find(j)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    groups: dict = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [sorted(members) for _, members in sorted(groups.items())]


# ---------------------------------------------------------------------------
# batched kernels (arrays shaped (B, N))


def centroid_batch(x: np.ndarray, y: np.ndarray) -> tuple:
    return x.mean(axis=-1, keepdims=True), y.mean(axis=-1, keepdims=True)


def radii_batch(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-agent distance to the world centroid, shape (B, N)."""
    cx, cy = centroid_batch(x, y)
    return np.hypot(x - cx, y - cy)


def circliness_batch(x: np.ndarray, y: np.ndarray,
                     eps: float = CIRCLINESS_EPS) -> np.ndarray:
    r = radii_batch(x, y)
    rmin = r.min(axis=-1)
    rmax = r.max(axis=-1)
    out = np.full(rmin.shape, np.inf)
    ok = rmin >= eps
    np.divide(rmax - rmin, rmin, out=out, where=ok)
    return out


def pivots_batch(x: np.ndarray, y: np.ndarray, heading: np.ndarray,
                 u1e: np.ndarray, u2e: np.ndarray, dt: float,
                 eps_omega: float = PIVOT_EPS_OMEGA) -> tuple:
    """Vectorized pivot with position substituted where undefined.

    The substitution implements the diffusion metric's convention directly;
    callers needing to distinguish undefined pivots should use the scalar op.
    """
    half_phase = u2e * (dt / 2.0)
    s = np.sin(half_phase)
    turning = (np.abs(u2e) >= eps_omega) & (s != 0.0)
    denom = np.where(turning, 2.0 * s, 1.0)
    r_d = np.where(turning, u1e * dt / denom, 0.0)
    a = heading - half_phase
    px = np.where(turning, x - r_d * np.sin(a), x)
    py = np.where(turning, y + r_d * np.cos(a), y)
    # straight movers (u1e != 0, u2e ~ 0) have no pivot; fall back to position
    return px, py


def min_pair_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimum pairwise Euclidean distance per world; +inf for N < 2."""
    n = x.shape[-1]
    if n < 2:
        return np.full(x.shape[:-1], np.inf)
    dx = x[..., None, :] - x[..., :, None]
    dy = y[..., None, :] - y[..., :, None]
    d2 = dx * dx + dy * dy
    idx = np.arange(n)
    d2[..., idx, idx] = np.inf
    return np.sqrt(d2.min(axis=(-2, -1)))


def min_pair_from_d2(d2: np.ndarray) -> np.ndarray:
    """Same, reusing a precomputed squared-distance matrix (not mutated)."""
    n = d2.shape[-1]
    if n < 2:
        return np.full(d2.shape[:-2], np.inf)
    masked = d2.copy()
    idx = np.arange(n)
    masked[..., idx, idx] = np.inf
    return np.sqrt(masked.min(axis=(-2, -1)))


def colliding_pairs_from_d2(d2: np.ndarray, body_radius: float) -> np.ndarray:
    """Count of agent pairs strictly closer than body_radius, per world."""
    n = d2.shape[-1]
    if n < 2:
        return np.zeros(d2.shape[:-2], dtype=np.int64)
    iu = np.triu_indices(n, k=1)
    return (d2[..., iu[0], iu[1]] < body_radius * body_radius).sum(axis=-1)


def n_components_batch(d2: np.ndarray, link_distance) -> np.ndarray:
    """Connected-component counts per world via min-label propagation.

    Equivalent to union-find on the 'within link_distance' graph; iterating
    the elementwise minimum over neighbors converges to each component's
    smallest id in at most N sweeps. link_distance may be a scalar or a
    per-world array of shape (B,).
    """
    n = d2.shape[-1]
    link2 = np.asarray(link_distance, dtype=np.float64) ** 2
    if link2.ndim > 0:
        link2 = link2.reshape(link2.shape + (1, 1))
    adj = d2 <= link2
    labels = np.broadcast_to(np.arange(n), adj.shape[:-2] + (n,)).copy()
    sentinel = n  # larger than any real label
    for _ in range(n):
        cand = np.where(adj, labels[..., None, :], sentinel).min(axis=-1)
        if (cand == labels).all():
            break
        labels = cand
    return (labels == np.arange(n)).sum(axis=-1)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Classification:
    label: PhaseLabel
    window_rows: int
    circliness_window_mean: float
    diffusion_window_mean: float
    collisions_in_window: int
    n_components_final: int


def window_rows(n_rows: int, cfg: ClassifierConfig) -> int:
    """Trailing-window length in rows; errors when the run is too short."""
    if n_rows < 1:
        raise MetricError("empty trace cannot be classified")
    w = max(math.ceil(cfg.window_fraction * n_rows), cfg.min_window_ticks)
    if w > n_rows:
        raise MetricError(
            f"trace too short to classify: window needs {w} rows, trace has {n_rows}")
    return w


def classify_arrays(cbar: np.ndarray, delta: np.ndarray,
                    colliding_pairs: np.ndarray, n_components_final: int,
                    cfg: ClassifierConfig) -> Classification:
    """Label one run from its per-row metric arrays (full-run length)."""
    n_rows = len(cbar)
    w = window_rows(n_rows, cfg)
    cw = float(np.mean(cbar[-w:]))
    dw = float(np.mean(delta[-w:]))
    hits = int(np.sum(colliding_pairs[-w:] > 0))
    if cw < cfg.mill_max:
        label = PhaseLabel.MILL
    elif cw < cfg.ellipse_max:
        label = PhaseLabel.ELLIPSOIDAL
    elif hits > 0 or n_components_final == 1:
        label = PhaseLabel.COLLIDING_CLUSTERS
    else:
        label = PhaseLabel.SEPARATED_GROUPS
    return Classification(
        label=label,
        window_rows=w,
        circliness_window_mean=cw,
        diffusion_window_mean=dw,
        collisions_in_window=hits,
        n_components_final=int(n_components_final),
    )


def classify_run(record, classifier: ClassifierConfig | None = None) -> Classification:
    """Classify a finished run record (anything exposing the trace arrays)."""
    cfg = classifier if classifier is not None else record.config.classifier
    ncomp = record.n_components
    if len(ncomp) == 0:
        raise MetricError("record has no metric rows")
    return classify_arrays(
        np.asarray(record.circliness, dtype=np.float64),
        np.asarray(record.diffusion, dtype=np.float64),
        np.asarray(record.colliding_pairs, dtype=np.int64),
        int(ncomp[-1]),
        cfg,
    )


def worst_label(labels: Sequence) -> PhaseLabel:
    """Majority label with pessimistic tie-breaking (higher severity wins)."""
    if not labels:
        raise MetricError("no labels to aggregate")
    counts: dict = {}
    for lb in labels:
        counts[lb] = counts.get(lb, 0) + 1
    best = max(counts.items(), key=lambda kv: (kv[1], LABEL_SEVERITY[kv[0]]))
    return best[0]
