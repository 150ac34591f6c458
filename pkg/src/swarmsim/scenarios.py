"""Canonical study configurations.

These bundle the measured-robot defaults (dt 22 ms, vision 1.10 m, FOV 49
degrees) with the behavior gains the study scenarios use, so tests, scripts,
and the CLI examples all start from the same place.
"""

from __future__ import annotations

import math

from .config import (
    Behavior,
    ControllerMode,
    IdiosyncrasySpec,
    NoiseSpec,
    NormalSpec,
    SpawnSpec,
    WorldConfig,
)
from .sweep import AxisSpec, SweepPlan, validate_plan

MILL_V = 0.25                      # m/s
MILL_OMEGA = math.radians(45.0)    # rad/s
DIFFUSE_V = 0.30
DIFFUSE_OMEGA = math.radians(150.0)

# 120 simulated seconds at 45 Hz
DEFAULT_TICKS = 5455


def _heterogeneous(theta_std: float) -> IdiosyncrasySpec:
    return IdiosyncrasySpec(
        speed_factor=NormalSpec(1.0, theta_std),
        turn_factor=NormalSpec(1.0, theta_std),
    )


def milling_config(seed: int, n: int = 6, v: float = MILL_V,
                   omega: float = MILL_OMEGA, theta_std: float = 0.04,
                   spawn: float = 2.0) -> WorldConfig:
    """Milling swarm: N unicycles in a spawn box, heterogeneous actuation.

    Body-target sensing: the physical robots detect each other's hulls,
    not center points, and with actuation spread the single-file mill only
    closes when the cone holds the whole body of the agent ahead.
    """
    return WorldConfig(
        n_agents=n,
        seed=seed,
        controller=ControllerMode(Behavior.MILLING, v, omega),
        spawn=SpawnSpec(width=spawn, height=spawn),
        idiosyncrasy=_heterogeneous(theta_std),
        sensor_target="body",
    ).validate()


def diffusing_config(seed: int, n: int = 8, v: float = DIFFUSE_V,
                     omega: float = DIFFUSE_OMEGA, theta_std: float = 0.04,
                     spawn: float = 2.0) -> WorldConfig:
    """Diffusing swarm: spin-in-place search, straight retreat on contact."""
    return WorldConfig(
        n_agents=n,
        seed=seed,
        controller=ControllerMode(Behavior.DIFFUSING, v, omega),
        spawn=SpawnSpec(width=spawn, height=spawn),
        idiosyncrasy=_heterogeneous(theta_std),
        sensor_target="body",
    ).validate()


def bullseye_config(seed: int, n: int = 7, distinguished: int = 0,
                    v: float = MILL_V, omega: float = MILL_OMEGA,
                    theta_std: float = 0.04,
                    actuation_std: float = 0.05,
                    false_negative_rate: float = 0.05,
                    false_positive_rate: float = 0.02) -> WorldConfig:
    """Mixed swarm: one self-centering agent inside a milling ring, noisy.

    The noise magnitudes are study choices, not measured values; the
    self-centering agent should end up circling the swarm centroid well
    inside the ring formed by the others.
    """
    if not (0 <= distinguished < n):
        raise ValueError(f"distinguished agent {distinguished} out of range")
    return WorldConfig(
        n_agents=n,
        seed=seed,
        controller=ControllerMode(Behavior.MILLING, v, omega),
        assignments={distinguished: ControllerMode(Behavior.SELF_CENTERING, v, omega)},
        spawn=SpawnSpec(width=2.0, height=2.0),
        noise=NoiseSpec(actuation_std=actuation_std,
                        false_negative_rate=false_negative_rate,
                        false_positive_rate=false_positive_rate),
        idiosyncrasy=_heterogeneous(theta_std),
        sensor_target="body",
    ).validate()


DEFAULT_SWEEP_V = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35)
DEFAULT_SWEEP_OMEGA_DEG = (10.0, 20.0, 30.0, 45.0, 60.0, 90.0, 120.0, 150.0)


def default_phase_plan(master_seed: int = 2024, trials: int = 11,
                       ticks: int = DEFAULT_TICKS, n: int = 6) -> SweepPlan:
    """7 x 8 (speed x turn rate) milling phase diagram, row-major cells."""
    base = milling_config(seed=0, n=n)
    plan = SweepPlan(
        axes=[
            AxisSpec("v_m_s", tuple(DEFAULT_SWEEP_V)),
            AxisSpec("omega_rad_s", tuple(math.radians(w)
                                          for w in DEFAULT_SWEEP_OMEGA_DEG)),
        ],
        base_config=base,
        trials=trials,
        ticks=ticks,
        master_seed=master_seed,
    )
    return validate_plan(plan)
