from lorasb.harness.config import ArmSpec, ExperimentConfig, TrainSettings, load_experiment_config
from lorasb.harness.runner import (
    CurveOrder, ExperimentSummary, curve_order, resolve_workers, run_arm, run_arms, run_estimate, run_experiment,
    summarize_experiment, write_run_artifacts
)
from lorasb.harness.checks import SUITES, CheckReport, run_checks
from lorasb.harness.ablation import NOISE_GRID, AblationSummary, ablation_arms, run_ablation, summarize_ablation

__all__ = [
    "ArmSpec",
    "ExperimentConfig",
    "TrainSettings",
    "load_experiment_config",
    "CurveOrder",
    "ExperimentSummary",
    "curve_order",
    "resolve_workers",
    "run_arm",
    "run_arms",
    "run_estimate",
    "run_experiment",
    "summarize_experiment",
    "write_run_artifacts",
    "SUITES",
    "CheckReport",
    "run_checks",
    "NOISE_GRID",
    "AblationSummary",
    "ablation_arms",
    "run_ablation",
    "summarize_ablation"
]
