"""Measure engine throughput across batch sizes.

The batch walk advances every world in one array op per tick, so
agent-ticks/ms should grow with batch size until memory bandwidth wins.
"""

import time

from swarmsim.engine import RunOptions, run_worlds
from swarmsim.model import init_world
from swarmsim.scenarios import milling_config

TICKS = 2000
BATCHES = (1, 4, 16, 64, 128)


def bench(n_worlds: int) -> float:
    worlds = [init_world(milling_config(seed=s)) for s in range(n_worlds)]
    opts = RunOptions(ticks=TICKS)
    t0 = time.perf_counter()
    res = run_worlds(worlds, opts)
    wall = time.perf_counter() - t0
    return res.agent_ticks / (wall * 1e3)


def main() -> None:
    print(f"{TICKS} ticks per world, 6 agents each\n")
    print("  batch   agent-ticks/ms")
    bench(1)  # warm-up: first call pays numpy allocation costs
    for b in BATCHES:
        rate = bench(b)
        print(f"  {b:5d}   {rate:10.0f}")


if __name__ == "__main__":
    main()
