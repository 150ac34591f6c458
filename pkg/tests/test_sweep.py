"""Sweep plans, batching, aggregation, and phase-diagram files."""

import math

import pytest

from swarmsim.config import SpawnSpec
from swarmsim.metrics import PhaseLabel
from swarmsim.sweep import (
    AxisSpec,
    SweepError,
    SweepPlan,
    compose_batches,
    emit_phase_diagram,
    load_plan,
    plan_grid,
    read_phase_csv,
    read_phase_jsonl,
    run_batch,
    run_sweep,
    save_plan,
)
from swarmsim.util import derive_trial_seed

from conftest import small_config


def tiny_plan(trials=2, ticks=120, seed=77, **base_kw) -> SweepPlan:
    base = small_config(seed=0, n=4, **base_kw)
    return plan_grid(
        axes=[("v_m_s", (0.2, 0.3)), ("omega_rad_s", (0.6, 1.2))],
        base_config=base, trials=trials, ticks=ticks, master_seed=seed)


def test_cell_order_is_row_major_last_axis_fastest():
    plan = tiny_plan()
    assert plan.n_cells == 4
    coords = [plan.cell_coords(i) for i in range(4)]
    assert [(c["v_m_s"], c["omega_rad_s"]) for c in coords] == [
        (0.2, 0.6), (0.2, 1.2), (0.3, 0.6), (0.3, 1.2)]
    with pytest.raises(SweepError, match="out of range"):
        plan.cell_coords(4)


def test_cell_config_applies_axes_and_unique_seeds():
    plan = tiny_plan()
    cfg = plan.cell_config(2, 1)
    assert cfg.controller.v == 0.3
    assert cfg.controller.omega == 0.6
    assert cfg.seed == derive_trial_seed(plan.master_seed, 2, 1)
    seeds = {plan.cell_config(c, t).seed
             for c in range(plan.n_cells) for t in range(plan.trials)}
    assert len(seeds) == plan.n_cells * plan.trials


def test_plan_validation_rejects_bad_inputs():
    base = small_config(seed=0, n=4)
    with pytest.raises(SweepError, match="at least one axis"):
        plan_grid([], base, trials=1, ticks=10, master_seed=0)
    with pytest.raises(SweepError, match="unknown sweep axis"):
        plan_grid([("speed", (0.1,))], base, trials=1, ticks=10, master_seed=0)
    with pytest.raises(SweepError, match="no values"):
        plan_grid([("v_m_s", ())], base, trials=1, ticks=10, master_seed=0)
    with pytest.raises(SweepError, match="trials"):
        plan_grid([("v_m_s", (0.2,))], base, trials=0, ticks=10, master_seed=0)
    with pytest.raises(SweepError, match="ticks"):
        plan_grid([("v_m_s", (0.2,))], base, trials=1, ticks=0, master_seed=0)
    with pytest.raises(SweepError, match="master_seed"):
        plan_grid([("v_m_s", (0.2,))], base, trials=1, ticks=10, master_seed=-1)
    # an axis value that produces an invalid config is caught at plan time
    with pytest.raises(SweepError, match="cell 1"):
        plan_grid([("v_m_s", (0.2, -1.0))], base, trials=1, ticks=10, master_seed=0)


def test_plan_roundtrip_and_degree_alias(tmp_path):
    plan = tiny_plan()
    path = tmp_path / "plan.json"
    save_plan(plan, path)
    back = load_plan(path)
    assert back.to_json() == plan.to_json()

    # the degree spelling is accepted on input and stored in radians
    d = plan.to_json_dict()
    d["axes"][1] = {"name": "omega_deg_s", "values": [45.0, 90.0]}
    back = SweepPlan.from_json_dict(d)
    assert back.axes[1].name == "omega_rad_s"
    assert back.axes[1].values == (math.radians(45.0), math.radians(90.0))

    with pytest.raises(SweepError, match="not found"):
        load_plan(tmp_path / "missing.json")


def test_batches_fixed_by_plan():
    plan = tiny_plan(trials=3)
    batches = compose_batches(plan)
    flat = [job for b in batches for job in b]
    assert flat == [(c, t) for c in range(4) for t in range(3)]
    assert all(len(b) <= plan.batch_size for b in batches)
    # all cells share one compatibility signature here: single batch
    assert len(batches) == 1


def test_batches_split_on_incompatible_cells_and_size():
    base = small_config(seed=0, n=4)
    plan = plan_grid([("n_agents", (3.0, 5.0))], base, trials=2, ticks=50,
                     master_seed=1, batch_size=64)
    batches = compose_batches(plan)
    # different agent counts cannot share an array walk
    assert [sorted({c for c, _ in b}) for b in batches] == [[0], [1]]

    small_batches = compose_batches(
        plan_grid([("v_m_s", (0.2, 0.3))], base, trials=3, ticks=50,
                  master_seed=1, batch_size=2))
    assert [len(b) for b in small_batches] == [2, 2, 2]


def test_sweep_results_identical_across_worker_counts(tmp_path):
    plan = tiny_plan()
    outs = {}
    for workers in (1, 2):
        res = run_sweep(plan, workers=workers)
        assert res.workers == workers
        d = tmp_path / f"w{workers}"
        emit_phase_diagram(res, d)
        outs[workers] = ((d / "phase_diagram.csv").read_bytes(),
                         (d / "phase_diagram.jsonl").read_bytes())
    assert outs[1] == outs[2]


def test_sweep_rerun_is_byte_identical(tmp_path):
    plan = tiny_plan()
    blobs = []
    for name in ("a", "b"):
        res = run_sweep(plan, workers=1)
        d = tmp_path / name
        emit_phase_diagram(res, d, formats=("jsonl",))
        blobs.append((d / "phase_diagram.jsonl").read_bytes())
    assert blobs[0] == blobs[1]


def test_cell_aggregation_counts():
    plan = tiny_plan(trials=3)
    res = run_sweep(plan, workers=1)
    assert len(res.cells) == 4
    for cell in res.cells:
        assert sum(cell.label_counts.values()) + cell.n_error == plan.trials
        assert cell.label is not None
        assert cell.coords == plan.cell_coords(cell.index)
    assert res.agent_ticks == 4 * plan.ticks * plan.trials * 4
    assert res.n_batches >= 1
    assert res.agent_ticks_per_ms > 0


def test_unplaceable_spawn_marks_trials_as_errors():
    # passes config validation but rejection sampling cannot satisfy it
    base = small_config(seed=0, n=4,
                        spawn=SpawnSpec(width=0.01, height=0.01,
                                        min_separation=0.5))
    plan = plan_grid([("v_m_s", (0.2,))], base, trials=2, ticks=120,
                     master_seed=3)
    outcomes = run_batch(plan, compose_batches(plan)[0])
    assert len(outcomes) == 2
    for (_, _, label, cbar, delta, coll, error) in outcomes:
        assert label is None and cbar is None and delta is None and coll is None
        assert "min_separation" in error

    res = run_sweep(plan, workers=1)
    cell = res.cells[0]
    assert cell.n_error == 2
    assert cell.label is None
    assert cell.errors and "min_separation" in cell.errors[0]


def test_workers_must_be_positive():
    with pytest.raises(SweepError, match="workers"):
        run_sweep(tiny_plan(), workers=0)


def test_phase_csv_roundtrip(tmp_path):
    plan = tiny_plan()
    res = run_sweep(plan, workers=1)
    path = tmp_path / "pd.csv"
    emit_phase_diagram(res, tmp_path, formats=("csv",), stem="pd")
    parsed = read_phase_csv(path)
    assert parsed["meta"]["master_seed"] == plan.master_seed
    assert parsed["meta"]["trials"] == plan.trials
    assert parsed["header"][:2] == ["v_m_s", "omega_rad_s"]
    assert len(parsed["rows"]) == 4
    lab_col = parsed["header"].index("majority_label")
    valid = {lb.value for lb in PhaseLabel}
    for i, row in enumerate(parsed["rows"]):
        assert float(row[0]) == res.cells[i].coords["v_m_s"]
        assert row[lab_col] in valid
        counts = [int(row[parsed["header"].index(k)]) for k in (
            "n_mill", "n_ellipsoidal", "n_colliding_clusters",
            "n_separated_groups", "n_error")]
        assert sum(counts) == plan.trials

    with pytest.raises(SweepError, match="missing meta"):
        bad = tmp_path / "bad.csv"
        bad.write_text("v,omega\n1,2\n")
        read_phase_csv(bad)


def test_phase_jsonl_roundtrip(tmp_path):
    plan = tiny_plan()
    res = run_sweep(plan, workers=1)
    emit_phase_diagram(res, tmp_path, formats=("jsonl",), stem="pd")
    parsed = read_phase_jsonl(tmp_path / "pd.jsonl")
    assert parsed["meta"]["format"] == "swarmsim.phase_diagram"
    assert len(parsed["cells"]) == 4
    for d, cell in zip(parsed["cells"], res.cells):
        assert d["index"] == cell.index
        assert d["majority_label"] == cell.label.value
        assert d["label_counts"] == cell.label_counts
        assert d["circliness_mean"] == pytest.approx(cell.circliness_mean)

    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    with pytest.raises(SweepError, match="empty"):
        read_phase_jsonl(empty)


def test_emit_rejects_unknown_format(tmp_path):
    res = run_sweep(tiny_plan(ticks=120, trials=1), workers=1)
    with pytest.raises(SweepError, match="unknown phase diagram format"):
        emit_phase_diagram(res, tmp_path, formats=("parquet",))


def test_axisspec_from_pairs_or_instances():
    base = small_config(seed=0, n=4)
    a = plan_grid([AxisSpec("v_m_s", (0.2,))], base, 1, 10, 0)
    b = plan_grid([("v_m_s", (0.2,))], base, 1, 10, 0)
    assert a.to_json() == b.to_json()
