"""Fit per-robot actuation factors from the bundled measurement CSV.

Shows the calibration table (speed factor per command level, per robot)
and the population fit used to sample simulated swarms.
"""

from pathlib import Path

from swarmsim.calibration import build_profile, parse_measurements, sample_profile

DATA = Path(__file__).resolve().parent.parent / "data" / "robot_measurements.csv"


def main() -> None:
    trials = parse_measurements(DATA)
    profile = build_profile(trials)

    print(f"{len(trials)} trials, {len(profile.robots)} robots\n")
    print("speed factors (theta1) by forward command level:")
    levels = [lv for lv, _ in profile.speed_map]
    print("  robot  " + "  ".join(f"u1={lv:g}" for lv in levels) + "   mean")
    for rid in sorted(profile.robots):
        rc = profile.robots[rid]
        by = dict(rc.theta1_by_level)
        cols = "  ".join(f"{by[lv]:5.3f}" for lv in levels)
        print(f"  {rid:>5}  {cols}  {rc.theta1:6.3f}")

    print("\nturn factors (theta2):")
    for rid in sorted(profile.robots):
        print(f"  {rid:>5}  {profile.robots[rid].theta2:5.3f}")

    sf, tf = profile.speed_factor, profile.turn_factor
    print(f"\npopulation: speed N({sf.mean:.4f}, {sf.std:.4f}^2), "
          f"turn N({tf.mean:.4f}, {tf.std:.4f}^2)")

    draw = sample_profile(profile, n=6, seed=0)
    print("\nexample 6-agent draw (speed factors): "
          + " ".join(f"{v:.3f}" for v in draw["speed_factor"]))


if __name__ == "__main__":
    main()
