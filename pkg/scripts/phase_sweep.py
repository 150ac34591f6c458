"""Build the 7x8 speed/turn-rate phase diagram and print the label grid.

The full study plan (11 trials, 120 sim-s) takes tens of seconds; pass
--quick for a coarse pass while iterating.
"""

import argparse
import math
from pathlib import Path

from swarmsim.scenarios import DEFAULT_SWEEP_OMEGA_DEG, DEFAULT_SWEEP_V, default_phase_plan
from swarmsim.sweep import emit_phase_diagram, run_sweep

GLYPH = {"mill": "M", "ellipsoidal": "E", "colliding_clusters": "C",
         "separated_groups": "S", None: "?"}


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--workers", type=int, default=8)
    ap.add_argument("--out", default="out/phase")
    ap.add_argument("--quick", action="store_true",
                    help="3 trials, 30 sim-s per run")
    args = ap.parse_args()

    if args.quick:
        plan = default_phase_plan(trials=3, ticks=1364)
    else:
        plan = default_phase_plan()
    result = run_sweep(plan, workers=args.workers)

    print(f"{plan.n_cells} cells x {plan.trials} trials, "
          f"wall {result.wall_s:.1f}s at {result.workers} workers "
          f"({result.agent_ticks_per_ms:.0f} agent-ticks/ms)\n")

    # rows: v (slow to fast), columns: omega (deg/s)
    header = "  v\\w  " + " ".join(f"{w:5.0f}" for w in DEFAULT_SWEEP_OMEGA_DEG)
    print(header)
    cells = {c.index: c for c in result.cells}
    n_omega = len(DEFAULT_SWEEP_OMEGA_DEG)
    for i, v in enumerate(DEFAULT_SWEEP_V):
        glyphs = []
        for j in range(n_omega):
            cell = cells[i * n_omega + j]
            label = cell.label.value if cell.label is not None else None
            glyphs.append(GLYPH[label])
        print(f"  {v:4.2f}  " + " ".join(f"{g:>5}" for g in glyphs))
    print("\n  M mill   E ellipsoidal   C colliding clusters   S separated groups")

    written = emit_phase_diagram(result, Path(args.out))
    for p in written:
        print(f"wrote {p}")


if __name__ == "__main__":
    main()
