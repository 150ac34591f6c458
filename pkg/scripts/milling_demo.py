"""Run one milling swarm and print how it settles.

Usage: python3 scripts/milling_demo.py [seed] [ticks]
"""

import sys

from swarmsim.engine import RunOptions, run_worlds
from swarmsim.metrics import window_rows
from swarmsim.model import init_world
from swarmsim.records import RunRecord
from swarmsim.scenarios import DEFAULT_TICKS, milling_config


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    ticks = int(sys.argv[2]) if len(sys.argv) > 2 else DEFAULT_TICKS

    cfg = milling_config(seed=seed)
    world = init_world(cfg)
    res = run_worlds([world], RunOptions(ticks=ticks, record_states=True))
    record = RunRecord.from_result(res)
    cls = record.classify()

    w = window_rows(res.rows, cfg.classifier)
    print(f"seed {seed}, {ticks} ticks ({ticks * cfg.dt:.0f} sim-s), "
          f"wall {res.wall_s:.2f}s")
    print(f"label: {cls.label.value}")
    print(f"trailing window ({w} rows): circliness "
          f"{cls.circliness_window_mean:.4f}, diffusion "
          f"{cls.diffusion_window_mean:.4f}")
    # a settled mill sits in one component with no contact events
    print(f"components at end: {cls.n_components_final}, "
          f"collisions in window: {cls.collisions_in_window}")

    checkpoints = [0, res.rows // 4, res.rows // 2, 3 * res.rows // 4, res.rows - 1]
    print("circliness trace:")
    for row in checkpoints:
        c = res.circliness[row, 0]
        print(f"  t={row * cfg.dt:6.1f}s  c={c:.4f}")


if __name__ == "__main__":
    main()
