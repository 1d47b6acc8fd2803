from lorasb.training.optimizers import (
    AdamWConfig, AdamWState, adamw_step, scheduled_eta, sgd_step
)
from lorasb.training.report import (
    RunReport, StepRecord, read_run_report_csv, run_report_csv, run_report_summary, write_run_report
)
from lorasb.training.trainer import (
    AdapterRun, TrainConfig, batch_cycle, prepare_adapters, probe_stable_eta, rebatch, train
)

__all__ = [
    "AdamWConfig",
    "AdamWState",
    "adamw_step",
    "scheduled_eta",
    "sgd_step",
    "RunReport",
    "StepRecord",
    "read_run_report_csv",
    "run_report_csv",
    "run_report_summary",
    "write_run_report",
    "AdapterRun",
    "TrainConfig",
    "batch_cycle",
    "prepare_adapters",
    "probe_stable_eta",
    "rebatch",
    "train"
]
