"""swarmsim: deterministic simulation of minimal reactive robot swarms.

Agents are unicycles with a single binary cone sensor and a three-row
controller table. Top-level exports cover world construction, the batched
runner, order-parameter metrics, sweeps, calibration, and records; the live
session service lives in swarmsim.service.
"""

from .config import (
    ArenaSpec,
    Behavior,
    ClassifierConfig,
    ConfigError,
    ControllerMode,
    IdiosyncrasySpec,
    NoiseSpec,
    NormalSpec,
    SpawnSpec,
    WorldConfig,
    load_config,
    save_config,
)
from .engine import EngineError, RunOptions, RunResult, run_config, run_configs, run_worlds
from .metrics import (
    Classification,
    MetricError,
    PhaseLabel,
    centroid,
    circliness,
    classify_run,
    cluster_components,
    diffusion_metric,
    pivot,
)
from .model import (
    AgentState,
    ControlInput,
    ModelError,
    World,
    apply_controller,
    init_world,
    sense,
    step_agent,
    step_world,
)
from .records import RunRecord, read_record, write_record_binary, write_record_jsonl
from .sweep import SweepPlan, emit_phase_diagram, plan_grid, run_sweep

__version__ = "0.1.0"

__all__ = [
    "AgentState", "ArenaSpec", "Behavior", "Classification", "ClassifierConfig",
    "ConfigError", "ControlInput", "ControllerMode", "EngineError",
    "IdiosyncrasySpec", "MetricError", "ModelError", "NoiseSpec", "NormalSpec",
    "PhaseLabel", "RunOptions", "RunRecord", "RunResult", "SpawnSpec",
    "SweepPlan", "World", "WorldConfig", "apply_controller", "centroid",
    "circliness", "classify_run", "cluster_components", "diffusion_metric",
    "emit_phase_diagram", "init_world", "load_config", "pivot", "plan_grid",
    "read_record", "run_config", "run_configs", "run_sweep", "run_worlds",
    "save_config", "sense", "step_agent", "step_world", "write_record_binary",
    "write_record_jsonl", "__version__",
]
