"""One self-centering agent inside a milling ring, with noise.

Prints each agent's trailing-window mean distance to the swarm centroid so
the distinguished agent's position in the formation is visible at a glance.

Usage: python3 scripts/bullseye_demo.py [seed]
"""

import sys

import numpy as np

from swarmsim.engine import RunOptions, run_worlds
from swarmsim.metrics import window_rows
from swarmsim.model import init_world
from swarmsim.scenarios import DEFAULT_TICKS, bullseye_config


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    cfg = bullseye_config(seed=seed)
    rows = DEFAULT_TICKS + 1
    w = window_rows(rows, cfg.classifier)
    res = run_worlds([init_world(cfg)],
                     RunOptions(ticks=DEFAULT_TICKS, record_states=True,
                                metrics_from=rows - w))

    states = res.states[rows - w:, 0]          # (w, N, 3)
    x, y = states[:, :, 0], states[:, :, 1]
    cx, cy = x.mean(axis=1, keepdims=True), y.mean(axis=1, keepdims=True)
    dist = np.hypot(x - cx, y - cy).mean(axis=0)

    print(f"seed {seed}, window {w} rows, wall {res.wall_s:.2f}s")
    for i, d in enumerate(dist):
        tag = cfg.mode_for(i).tag.value
        mark = "  <- distinguished" if tag == "self_centering" else ""
        print(f"  agent {i} ({tag:>14}): centroid distance {d:.3f} m{mark}")
    ratio = dist[0] / dist[1:].mean()
    print(f"distinguished/others ratio: {ratio:.3f}")


if __name__ == "__main__":
    main()
