"""Order metrics, pivots, clustering, and the run classifier."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swarmsim.config import ClassifierConfig
from swarmsim.metrics import (
    Classification,
    MetricError,
    PhaseLabel,
    centroid,
    circliness,
    circliness_batch,
    classify_arrays,
    cluster_components,
    diffusion_metric,
    min_pair_distance,
    min_pair_from_d2,
    n_components_batch,
    pivot,
    pivots_batch,
    window_rows,
    worst_label,
)
from swarmsim.model import AgentState, ControlInput, init_world

from conftest import small_config


def regular_polygon(n, radius=1.0, phase=0.0, center=(0.0, 0.0)):
    ang = phase + 2.0 * math.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(ang),
                            center[1] + radius * np.sin(ang)])


# -- circliness ---------------------------------------------------------------


def test_circliness_zero_on_regular_polygons():
    for n in range(3, 13):
        pts = regular_polygon(n, radius=0.7, phase=0.3)
        assert circliness(pts) <= 1e-9


def test_circliness_positive_off_circle():
    pts = regular_polygon(6)
    pts[0] *= 1.3
    assert circliness(pts) > 0.05


def test_circliness_known_value():
    # two agents on a line: radii r and r, centroid midway -> 0
    assert circliness([(-1.0, 0.0), (1.0, 0.0)]) == 0.0
    # square with one inset corner: rmin = 0.5, rmax ~ 1.118
    pts = np.array([(1, 1), (-1, 1), (-1, -1), (0.5, -0.5)], dtype=float)
    c = pts.mean(axis=0)
    r = np.hypot(*(pts - c).T)
    expect = (r.max() - r.min()) / r.min()
    assert circliness(pts) == pytest.approx(expect, rel=1e-12)


def test_circliness_inf_when_agent_on_centroid():
    assert circliness([(0.0, 0.0), (0.0, 1.0), (0.0, -1.0)]) == math.inf


def test_circliness_rejects_bad_shapes():
    with pytest.raises(MetricError):
        circliness([(0.0, 0.0)])
    with pytest.raises(MetricError):
        circliness([[1.0, 2.0, 3.0]])


@given(st.data())
def test_circliness_rigid_motion_invariant(data):
    n = data.draw(st.integers(2, 9))
    pts = np.array([[data.draw(st.floats(-5, 5)), data.draw(st.floats(-5, 5))]
                    for _ in range(n)])
    theta = data.draw(st.floats(0, 2 * math.pi))
    tx = data.draw(st.floats(-10, 10))
    ty = data.draw(st.floats(-10, 10))
    rot = np.array([[math.cos(theta), -math.sin(theta)],
                    [math.sin(theta), math.cos(theta)]])
    moved = pts @ rot.T + (tx, ty)
    a, b = circliness(pts), circliness(moved)
    if math.isinf(a) or math.isinf(b):
        # a point near the centroid can cross the eps guard under rotation
        assert min(np.hypot(*(pts - pts.mean(0)).T)) < 1e-6
    else:
        assert b == pytest.approx(a, rel=1e-6, abs=1e-9)


def test_circliness_batch_matches_scalar(rng):
    x = rng.uniform(-3, 3, size=(5, 8))
    y = rng.uniform(-3, 3, size=(5, 8))
    out = circliness_batch(x, y)
    for b in range(5):
        assert out[b] == pytest.approx(
            circliness(np.column_stack([x[b], y[b]])), rel=1e-12)


# -- pivots and diffusion -----------------------------------------------------


def test_pivot_fixed_point_of_discrete_arc():
    """Stepping a pure turner never moves it away from its pivot."""
    from swarmsim.model import step_agent
    dt = 0.022
    s = AgentState(id=0, x=0.3, y=-0.2, heading=1.1)
    inp = ControlInput(0.25, math.radians(45.0))
    p = pivot(s, inp, dt)
    r0 = math.hypot(s.x - p[0], s.y - p[1])
    cur = s
    for _ in range(500):
        cur = step_agent(cur, inp, dt)
    r1 = math.hypot(cur.x - p[0], cur.y - p[1])
    assert r1 == pytest.approx(r0, abs=1e-9)


def test_pivot_conventions():
    s = AgentState(id=0, x=2.0, y=3.0, heading=0.5)
    assert pivot(s, ControlInput(0.0, 0.0), 0.022) == (2.0, 3.0)
    assert pivot(s, ControlInput(0.3, 0.0), 0.022) is None
    spin = pivot(s, ControlInput(0.0, 2.0), 0.022)
    assert spin == pytest.approx((2.0, 3.0))


def test_pivot_radius_approaches_continuous_limit():
    # discrete pivot radius |u1 dt / (2 sin(u2 dt / 2))| -> u1/u2 as dt -> 0
    s = AgentState(id=0, x=0.0, y=0.0, heading=0.0)
    inp = ControlInput(0.25, math.radians(45.0))
    p = pivot(s, inp, 1e-6)
    r = math.hypot(p[0], p[1])
    assert r == pytest.approx(0.25 / math.radians(45.0), rel=1e-9)


def test_pivots_batch_matches_scalar(rng):
    n = 12
    x, y = rng.uniform(-2, 2, (1, n)), rng.uniform(-2, 2, (1, n))
    heading = rng.uniform(0, 2 * math.pi, (1, n))
    u1 = rng.uniform(-0.5, 0.5, (1, n))
    u2 = rng.uniform(-3, 3, (1, n))
    u2[0, 0] = 0.0                      # straight mover: falls back to position
    px, py = pivots_batch(x, y, heading, u1, u2, 0.022)
    for i in range(n):
        s = AgentState(id=i, x=float(x[0, i]), y=float(y[0, i]),
                       heading=float(heading[0, i]))
        p = pivot(s, ControlInput(float(u1[0, i]), float(u2[0, i])), 0.022)
        if p is None:
            p = (float(x[0, i]), float(y[0, i]))
        assert (px[0, i], py[0, i]) == pytest.approx(p, rel=1e-12, abs=1e-12)


def test_diffusion_metric_spinners_far_apart():
    # two spinners 3 m apart with gamma 1.1: pivots are the positions
    cfg = small_config(n=2)
    w = init_world(cfg)
    w.x[0] = [-1.5, 1.5]
    w.y[0] = 0.0
    assert diffusion_metric(w) == pytest.approx(3.0 / 1.1)


def test_min_pair_distance_matches_bruteforce(rng):
    x, y = rng.uniform(-4, 4, (3, 9)), rng.uniform(-4, 4, (3, 9))
    out = min_pair_distance(x, y)
    for b in range(3):
        best = min(math.hypot(x[b, i] - x[b, j], y[b, i] - y[b, j])
                   for i in range(9) for j in range(i + 1, 9))
        assert out[b] == pytest.approx(best, rel=1e-12)
    dx = x[:, None, :] - x[:, :, None]
    dy = y[:, None, :] - y[:, :, None]
    assert np.allclose(min_pair_from_d2(dx * dx + dy * dy), out)


# -- clustering ---------------------------------------------------------------


def brute_components(pts, link):
    n = len(pts)
    ids = list(range(n))
    changed = True
    comp = {i: {i} for i in range(n)}
    while changed:
        changed = False
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                d = math.hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1])
                if d <= link and comp[ids[i]] is not comp[ids[j]]:
                    merged = comp[ids[i]] | comp[ids[j]]
                    for k in merged:
                        ids[k] = min(merged)
                        comp[min(merged)] = merged
                    changed = True
    return sorted({frozenset(c) for c in (comp[ids[i]] for i in range(n))},
                  key=lambda s: min(s))


def test_cluster_components_examples():
    pts = [(0, 0), (0.5, 0), (3, 0), (3.4, 0)]
    assert cluster_components(pts, 1.0) == [[0, 1], [2, 3]]
    assert cluster_components(pts, 0.1) == [[0], [1], [2], [3]]
    assert cluster_components(pts, 5.0) == [[0, 1, 2, 3]]
    # ties count as linked
    assert cluster_components([(0, 0), (1.0, 0)], 1.0) == [[0, 1]]


def test_cluster_components_chain_transitivity():
    pts = [(i * 0.9, 0.0) for i in range(6)]
    assert cluster_components(pts, 1.0) == [list(range(6))]


def test_cluster_components_matches_bruteforce(rng):
    for _ in range(120):
        n = int(rng.integers(1, 18))
        pts = [(float(rng.uniform(-3, 3)), float(rng.uniform(-3, 3)))
               for _ in range(n)]
        link = float(rng.uniform(0.2, 2.5))
        got = cluster_components(pts, link)
        want = [sorted(c) for c in brute_components(pts, link)]
        assert got == want


def test_n_components_batch_matches_scalar(rng):
    n = 14
    x, y = rng.uniform(-3, 3, (6, n)), rng.uniform(-3, 3, (6, n))
    dx = x[:, None, :] - x[:, :, None]
    dy = y[:, None, :] - y[:, :, None]
    d2 = dx * dx + dy * dy
    link = rng.uniform(0.3, 2.0, size=6)
    out = n_components_batch(d2, link)
    for b in range(6):
        want = len(cluster_components(np.column_stack([x[b], y[b]]), link[b]))
        assert out[b] == want


# -- classifier ---------------------------------------------------------------


def mkcfg(**kw):
    return ClassifierConfig(**kw)


def test_window_rows_rules():
    cfg = mkcfg()
    assert window_rows(1000, cfg) == 200       # ceil(0.2 * 1000)
    assert window_rows(100, cfg) == 100        # floor at min_window_ticks
    with pytest.raises(MetricError):
        window_rows(99, cfg)
    with pytest.raises(MetricError):
        window_rows(0, cfg)


def classify(cbar, delta=None, colliding=None, ncomp=1, cfg=None):
    cfg = cfg or ClassifierConfig(min_window_ticks=1)
    n = len(cbar)
    return classify_arrays(
        np.asarray(cbar, dtype=float),
        np.zeros(n) if delta is None else np.asarray(delta, dtype=float),
        np.zeros(n, dtype=int) if colliding is None else np.asarray(colliding),
        ncomp, cfg)


def test_classifier_regions():
    assert classify([0.05] * 10).label is PhaseLabel.MILL
    assert classify([0.5] * 10).label is PhaseLabel.ELLIPSOIDAL
    # circliness over 1: split by contact evidence
    crowded = classify([3.0] * 10, colliding=[1] * 10, ncomp=1)
    assert crowded.label is PhaseLabel.COLLIDING_CLUSTERS
    single_blob = classify([3.0] * 10, ncomp=1)
    assert single_blob.label is PhaseLabel.COLLIDING_CLUSTERS
    spread = classify([3.0] * 10, ncomp=4)
    assert spread.label is PhaseLabel.SEPARATED_GROUPS


def test_classifier_uses_trailing_window_only():
    cbar = [5.0] * 80 + [0.1] * 20
    out = classify(cbar, cfg=ClassifierConfig(min_window_ticks=20))
    assert out.window_rows == 20
    assert out.label is PhaseLabel.MILL
    assert out.circliness_window_mean == pytest.approx(0.1)


def test_classifier_boundaries():
    cfg = ClassifierConfig(min_window_ticks=1)
    assert classify([cfg.mill_max] * 4, cfg=cfg).label is PhaseLabel.ELLIPSOIDAL
    assert classify([cfg.mill_max - 1e-9] * 4, cfg=cfg).label is PhaseLabel.MILL
    assert classify([cfg.ellipse_max] * 4, ncomp=2, cfg=cfg).label is \
        PhaseLabel.SEPARATED_GROUPS


def test_classification_is_frozen_value():
    out = classify([0.05] * 10)
    assert isinstance(out, Classification)
    with pytest.raises(AttributeError):
        out.label = PhaseLabel.MILL


def test_worst_label_majority_and_ties():
    L = PhaseLabel
    assert worst_label([L.MILL, L.MILL, L.ELLIPSOIDAL]) is L.MILL
    assert worst_label([L.MILL, L.COLLIDING_CLUSTERS]) is L.COLLIDING_CLUSTERS
    assert worst_label([L.SEPARATED_GROUPS, L.ELLIPSOIDAL]) is L.SEPARATED_GROUPS
    with pytest.raises(MetricError):
        worst_label([])


def test_centroid():
    assert centroid([(0, 0), (2, 4)]) == (1.0, 2.0)
    with pytest.raises(MetricError):
        centroid(np.empty((0, 2)))
