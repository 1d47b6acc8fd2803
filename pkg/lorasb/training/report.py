from ..adapters.algebra import AdapterState
from ..core.common import config_hash, describe_version, dumps_json, writeFile
from ..core.defaults import CSV_SIGNIFICANT_DIGITS, DEFAULT_ENCODING, REPORT_SCHEMA_VERSION, RUN_REPORT_CSV_COLUMNS, RUN_TIMING_SUFFIX
from ..core.errors import RejectedInputError
from ..kernel.matrix import Matrix

from pydantic import BaseModel, ConfigDict, Field, computed_field
from typing import Any, Dict, List, Optional, Tuple, Union
from pathlib import Path
import numpy as np
import csv
import io


class StepRecord(BaseModel):
    step :int
    loss :float
    grad_norm :float
    dl_pred :float
    dl_real :float
    subspace_ok :Optional[bool] = None
    b_ortho_residual :Optional[float] = None
    a_ortho_residual :Optional[float] = None
    core_grad_error :Optional[float] = None
    eta :float


class RunReport(BaseModel):
    """Per-step trace and final metrics of one (arm, seed) training run."""
    arm :str
    seed :int
    config :Dict[str, Any] = Field(default_factory=dict)
    records :List[StepRecord] = Field(default_factory=list)
    final_loss :Optional[float] = None
    initial_loss :Optional[float] = None
    final_updates :List[Matrix] = Field(default_factory=list, exclude=True)
    final_states :List[AdapterState] = Field(default_factory=list, exclude=True)
    wall_clock_seconds :float = Field(default=0.0, exclude=True)
    samples_used :Optional[int] = None
    diverged :bool = False
    diverged_at :Optional[int] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @computed_field
    @property
    def steps(self)->int:
        return len(self.records)

    @property
    def losses(self)->List[float]:
        return [record.loss for record in self.records]

    @property
    def update_norms(self)->List[float]:
        return [float(np.linalg.norm(update)) for update in self.final_updates]

    @property
    def stem(self)->str:
        return f"{self.arm}_seed{self.seed}"


def _cell(value :Any)->str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.{CSV_SIGNIFICANT_DIGITS}g}"
    return str(value)

def run_report_csv(report :RunReport)->str:
    """Per-step CSV preceded by a ``#schema_version=N`` line."""
    buffer = io.StringIO()
    buffer.write(f"#schema_version={REPORT_SCHEMA_VERSION}\n")
    writer = csv.DictWriter(buffer, fieldnames=RUN_REPORT_CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for record in report.records:
        row = record.model_dump()
        writer.writerow({column: _cell(row[column]) for column in RUN_REPORT_CSV_COLUMNS})
    return buffer.getvalue()

def run_report_summary(report :RunReport)->Dict[str, Any]:
    """JSON summary of everything but the per-step records; wall-clock time is not part of it."""
    summary = report.model_dump(mode="json", exclude={"records"})
    summary.update({
        "schema_version": REPORT_SCHEMA_VERSION,
        "config_hash": config_hash(report.config),
        "version": describe_version(),
        "update_norms": report.update_norms
    })
    return summary

def write_run_report(report :RunReport, directory :Union[str, Path])->Tuple[Path, Path]:
    """
    Writes ``<arm>_seed<k>.csv`` and ``<arm>_seed<k>.json`` under ``directory``,
    plus ``<arm>_seed<k>.timing.json`` with the wall-clock time.
    """
    directory = Path(directory)
    csv_path = directory / f"{report.stem}.csv"
    json_path = directory / f"{report.stem}.json"
    writeFile(run_report_csv(report), csv_path)
    writeFile(dumps_json(run_report_summary(report)), json_path)
    writeFile(dumps_json({"wall_clock_seconds": report.wall_clock_seconds}), directory / f"{report.stem}{RUN_TIMING_SUFFIX}")
    return csv_path, json_path

def read_run_report_csv(path :Union[str, Path])->Tuple[int, List[Dict[str, str]]]:
    """Schema version and raw rows of a run CSV."""
    with open(path, "r", encoding=DEFAULT_ENCODING, newline="") as handle:
        header = handle.readline().strip()
        if not header.startswith("#schema_version="):
            raise RejectedInputError(f"{path} has no schema version header")
        rows = list(csv.DictReader(handle))
    return int(header.split("=", 1)[1]), rows
