from ..adapters.algebra import AdapterMethod
from ..adapters.io import save_adapter_states
from ..core.common import config_hash, describe_version, dumps_json, writeFile
from ..core.defaults import (
    CURVE_ORDER_MIN_FRACTION, DEFAULT_WORKERS, ESTIMATE_DIR, EXPERIMENT_SUMMARY_FILE, MANIFEST_FILE,
    REPORT_SCHEMA_VERSION, RUN_ADAPTERS_DIR, RUN_MODEL_DIR, WORKERS_ENV_VAR
)
from ..core.errors import RejectedInputError
from ..core.logs import logger
from ..initializers.estimate import estimate_update
from ..gradients.law import GradientPathway
from ..initializers.recipes import InitKind, resolve_recipe
from ..kernel.io import save_matrix
from ..nn.io import save_model
from ..nn.tasks import task_from_spec
from ..training.report import RunReport, write_run_report
from ..training.trainer import train
from .config import ArmSpec, ExperimentConfig

from pydantic import BaseModel
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple, Union
from pathlib import Path
import numpy as np
import os


class CurveOrder(BaseModel):
    """Per seed, the fraction of logged steps at which ``leader``'s batch loss is at most ``follower``'s."""
    leader :str
    follower :str
    fractions :List[float]
    seeds_holding :int
    min_fraction :float = CURVE_ORDER_MIN_FRACTION


class ExperimentSummary(BaseModel):
    medians :Dict[str, float]
    diverged_runs :List[str]
    curve_order :Optional[CurveOrder] = None
    seeds :List[int]
    config_hash :str
    version :str
    schema_version :int = REPORT_SCHEMA_VERSION


def resolve_workers(requested :Optional[int]=None)->int:
    """``LORASB_WORKERS`` wins over the CLI value, which wins over the default."""
    raw = os.getenv(WORKERS_ENV_VAR)
    if raw:
        try:
            workers = int(raw)
        except ValueError as e:
            raise RejectedInputError(f"{WORKERS_ENV_VAR}={raw!r} is not an integer") from e
    else:
        workers = requested if requested is not None else DEFAULT_WORKERS

    if workers < 1:
        raise RejectedInputError(f"worker count must be positive, got {workers}")
    return workers

def run_arm(config :ExperimentConfig, arm :ArmSpec, seed :int)->RunReport:
    """One fully private run: its own task copy, model, adapters and optimizer state."""
    with logger.contextualize(run=f"{arm.label}/seed{seed}"):
        task = task_from_spec(config.task_for_seed(seed))
        return train(task.student(), config.train_config(arm, seed), task.batches, arm=arm.label)

def write_run_artifacts(config :ExperimentConfig, report :RunReport, out_dir :Union[str, Path])->Path:
    """
    Replay material for one run under ``<out_dir>/<arm>_seed<k>/``: the pre-trained
    model with its TaskSpec in ``model/`` and the trained adapter states in
    ``adapters/``. Diverged runs carry no final states, so only ``model/`` is written.
    """
    run_dir = Path(out_dir) / report.stem
    spec = config.task_for_seed(report.seed)
    save_model(task_from_spec(spec).student(), run_dir / RUN_MODEL_DIR, task=spec)
    if report.final_states:
        save_adapter_states(report.final_states, run_dir / RUN_ADAPTERS_DIR, metadata={
            "arm": report.arm,
            "seed": report.seed,
            "final_loss": report.final_loss,
            "config_hash": config_hash(report.config)
        })
    return run_dir

def run_arms(
    config :ExperimentConfig,
    arms :List[ArmSpec],
    out_dir :Optional[Union[str, Path]]=None,
    workers :int=DEFAULT_WORKERS)->Dict[Tuple[str, int], RunReport]:
    """
    Dispatches arms x seeds to a bounded thread pool. Reports are written from the
    calling thread as runs finish, so every file has a single writer.
    """
    jobs = [(arm, seed) for arm in arms for seed in config.seeds]
    logger.info(f"{config.name}: {len(arms)} arm(s) x {len(config.seeds)} seed(s) on {workers} worker(s)")

    reports :Dict[Tuple[str, int], RunReport] = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [((arm.label, seed), pool.submit(run_arm, config, arm, seed)) for arm, seed in jobs]
        for key, future in futures:
            report = future.result()
            reports[key] = report
            if out_dir is not None:
                write_run_report(report, out_dir)
                write_run_artifacts(config, report, out_dir)
    return reports

def curve_order(
    reports :Dict[Tuple[str, int], RunReport],
    leader :str,
    follower :str,
    seeds :List[int])->CurveOrder:
    """Both arms see the same batch at every step; steps past a diverged follower's end count as held."""
    fractions = []
    for seed in seeds:
        lead = reports[(leader, seed)].losses
        follow = reports[(follower, seed)].losses
        held = sum(1 for index, loss in enumerate(lead) if index >= len(follow) or loss <= follow[index])
        fractions.append(held / len(lead) if lead else 0.0)

    return CurveOrder(
        leader=leader,
        follower=follower,
        fractions=fractions,
        seeds_holding=sum(fraction >= CURVE_ORDER_MIN_FRACTION for fraction in fractions)
    )

def median_final_losses(reports :Dict[Tuple[str, int], RunReport], seeds :List[int])->Dict[str, float]:
    labels = sorted({label for label, _ in reports})
    return {
        label: float(np.median([reports[(label, seed)].final_loss for seed in seeds]))
        for label in labels
    }

def diverged_runs(reports :Dict[Tuple[str, int], RunReport])->List[str]:
    return sorted(report.stem for report in reports.values() if report.diverged)

def _corrected_arm(arms :List[ArmSpec], method :AdapterMethod, kind :InitKind)->Optional[str]:
    return next((
        arm.label for arm in arms
        if arm.method == method and arm.recipe.kind == kind and arm.gradient_pathway == GradientPathway.CORRECTED
    ), None)

def summarize_experiment(config :ExperimentConfig, reports :Dict[Tuple[str, int], RunReport])->ExperimentSummary:
    """Median final losses, diverged runs, and the lora_sb vs pissa-initialized lora_xs curve ordering when both arms exist."""
    leader = _corrected_arm(config.arms, AdapterMethod.LORA_SB, InitKind.LORA_SB)
    follower = _corrected_arm(config.arms, AdapterMethod.LORA_XS, InitKind.PISSA_STYLE)
    return ExperimentSummary(
        medians=median_final_losses(reports, config.seeds),
        diverged_runs=diverged_runs(reports),
        curve_order=curve_order(reports, leader, follower, config.seeds) if leader and follower else None,
        seeds=list(config.seeds),
        config_hash=config_hash(config.model_dump(mode="json")),
        version=describe_version()
    )

def run_experiment(
    config :ExperimentConfig,
    out_dir :Optional[Union[str, Path]]=None,
    workers :int=DEFAULT_WORKERS)->Dict[Tuple[str, int], RunReport]:
    """Every configured arm for every seed; writes the run reports and ``experiment_summary.json``."""
    out_dir = Path(out_dir if out_dir is not None else config.output_dir)
    reports = run_arms(config, config.arms, out_dir, workers)
    writeFile(dumps_json(summarize_experiment(config, reports).model_dump(mode="json")), out_dir / EXPERIMENT_SUMMARY_FILE)
    return reports

def run_estimate(
    config :ExperimentConfig,
    out_dir :Optional[Union[str, Path]]=None,
    budget_fraction :Optional[float]=None)->Path:
    """
    Dumps ΔW_avg for the first estimate-based arm (or the first arm) on the first
    seed's task: ``estimate/module_<i>.csv`` plus ``estimate/manifest.json``.
    """
    out_dir = Path(out_dir if out_dir is not None else config.output_dir) / ESTIMATE_DIR
    seed = config.seeds[0]
    arm = next((arm for arm in config.arms if arm.recipe.kind.needs_estimate), config.arms[0])
    task = task_from_spec(config.task_for_seed(seed))
    fraction = budget_fraction if budget_fraction is not None else config.train.budget_fraction

    recipe = resolve_recipe(
        arm.recipe.model_copy(update={"seed": seed}),
        train_eta=config.train.eta,
        train_optimizer=config.train.optimizer,
        num_samples=task.num_samples,
        batch_size=task.batches[0].size,
        budget_fraction=fraction
    )
    estimate = estimate_update(task.student(), task.batches, recipe)

    modules = []
    for index, delta in enumerate(estimate.deltas):
        filename = f"module_{index}.csv"
        save_matrix(delta, out_dir / filename)
        modules.append({"file": filename, "shape": list(delta.shape)})

    manifest = {
        "arm": arm.label,
        "method": AdapterMethod(arm.method).value,
        "seed": seed,
        "recipe": recipe.model_dump(mode="json"),
        "budget_fraction": fraction,
        "samples_used": estimate.samples_used,
        "samples_available": task.num_samples,
        "optimizer_model": estimate.optimizer_model.value,
        "eta": estimate.eta,
        "modules": modules,
        "config_hash": config_hash(config.model_dump(mode="json")),
        "version": describe_version()
    }
    path = out_dir / MANIFEST_FILE
    writeFile(dumps_json(manifest), path)
    logger.info(f"wrote {len(modules)} ΔW_avg module(s) to {out_dir} using {estimate.samples_used} sample(s)")
    return path
