from ..adapters.algebra import AdapterMethod
from ..core.common import config_hash, describe_version, dumps_json, writeFile
from ..core.defaults import (
    ABLATION_GRID_FILE, ABLATION_SUMMARY_FILE, DEFAULT_WORKERS, REPORT_SCHEMA_VERSION, TIED_WORST_RTOL
)
from ..core.logs import logger
from ..gradients.law import GradientPathway
from ..initializers.recipes import InitKind, InitRecipe
from ..training.report import RunReport
from .config import ArmSpec, ExperimentConfig
from .runner import CurveOrder, curve_order, diverged_runs, median_final_losses, run_arms

from pydantic import BaseModel, Field
from typing import Dict, List, Optional, Tuple, Union
from pathlib import Path
import numpy as np
import csv
import io

NOISE_GRID = [0.0, 1e-5, 1e-4, 1e-3, 1e-2]
GRID_COLUMNS = ["arm", "kind", "sigma", "gradient_pathway", "seed", "final_loss", "diverged"]


class AblationSummary(BaseModel):
    medians :Dict[str, float]
    sigma_zero_max_gap :float
    noise_monotone_seeds :int
    median_noise_monotone :bool
    kaiming_worst :bool
    nonortho_corrected_beats_raw :bool
    curve_order :CurveOrder
    diverged_runs :List[str] = Field(default_factory=list)
    seeds :List[int]
    config_hash :str
    version :str
    schema_version :int = REPORT_SCHEMA_VERSION
    noise_grid :List[float] = Field(default_factory=lambda: list(NOISE_GRID))
    tied_worst_rtol :float = TIED_WORST_RTOL


def ablation_arms(config :ExperimentConfig)->List[ArmSpec]:
    """
    Initializations compared under the corrected pathway, plus the non-orthonormal
    raw/corrected cross. Each kind takes its recipe (rank, estimate lr, budget) from
    the first configured arm of that kind, falling back to the first arm's recipe;
    the noisy arms share the lora_sb recipe.
    """
    base = config.arms[0].recipe

    def recipe_for(kind :InitKind)->InitRecipe:
        return next((spec.recipe for spec in config.arms if spec.recipe.kind == kind), base)

    def arm(name :str, kind :InitKind, sigma :float=0.0, method :AdapterMethod=AdapterMethod.LORA_SB,
            pathway :GradientPathway=GradientPathway.CORRECTED, source :Optional[InitKind]=None)->ArmSpec:
        return ArmSpec(
            name=name,
            method=method,
            recipe=recipe_for(source or kind).model_copy(update={"kind": kind, "sigma": sigma}),
            gradient_pathway=pathway
        )

    arms = [arm("lora_sb", InitKind.LORA_SB)]
    arms.extend(
        arm(f"noisy_sb_sigma{sigma:g}", InitKind.NOISY_SB, sigma, source=InitKind.LORA_SB) for sigma in NOISE_GRID
    )
    arms.extend([
        arm("kaiming_svd", InitKind.KAIMING_SVD),
        arm("nonortho_sb", InitKind.NONORTHO_SB),
        arm("pissa_style", InitKind.PISSA_STYLE, method=AdapterMethod.LORA_XS),
        arm("nonortho_sb_raw", InitKind.NONORTHO_SB, pathway=GradientPathway.RAW_XS)
    ])
    return arms

def ablation_grid_csv(arms :List[ArmSpec], reports :Dict[Tuple[str, int], RunReport], seeds :List[int])->str:
    buffer = io.StringIO()
    buffer.write(f"#schema_version={REPORT_SCHEMA_VERSION}\n")
    writer = csv.DictWriter(buffer, fieldnames=GRID_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for spec in arms:
        for seed in seeds:
            report = reports[(spec.label, seed)]
            writer.writerow({
                "arm": spec.label,
                "kind": InitKind(spec.recipe.kind).value,
                "sigma": f"{spec.recipe.sigma:g}",
                "gradient_pathway": GradientPathway(spec.gradient_pathway).value,
                "seed": seed,
                "final_loss": f"{report.final_loss:.17g}",
                "diverged": "true" if report.diverged else "false"
            })
    return buffer.getvalue()

def summarize_ablation(config :ExperimentConfig, reports :Dict[Tuple[str, int], RunReport])->AblationSummary:
    """
    Noise monotonicity per seed and of the medians, kaiming_svd against every other
    SVD-derived init (tied-worst within ``TIED_WORST_RTOL``), the non-orthonormal
    pathway cross, and the lora_sb vs pissa_style loss-curve ordering.
    """
    seeds = config.seeds

    def finals(label :str)->np.ndarray:
        return np.array([reports[(label, seed)].final_loss for seed in seeds])

    medians = median_final_losses(reports, seeds)

    noisy = [f"noisy_sb_sigma{sigma:g}" for sigma in NOISE_GRID]
    grid = np.stack([finals(label) for label in noisy])
    monotone_seeds = int(np.sum(np.all(np.diff(grid, axis=0) >= 0.0, axis=0)))
    noisy_medians = [medians[label] for label in noisy]

    svd_based = ["lora_sb", "nonortho_sb", "pissa_style"] + noisy
    worst_other = max(medians[label] for label in svd_based)
    return AblationSummary(
        medians=medians,
        sigma_zero_max_gap=float(np.max(np.abs(finals(noisy[0]) - finals("lora_sb")))),
        noise_monotone_seeds=monotone_seeds,
        median_noise_monotone=all(a <= b for a, b in zip(noisy_medians, noisy_medians[1:])),
        kaiming_worst=medians["kaiming_svd"] >= (1.0 - TIED_WORST_RTOL) * worst_other,
        nonortho_corrected_beats_raw=medians["nonortho_sb"] < medians["nonortho_sb_raw"],
        curve_order=curve_order(reports, "lora_sb", "pissa_style", seeds),
        diverged_runs=diverged_runs(reports),
        seeds=list(seeds),
        config_hash=config_hash(config.model_dump(mode="json")),
        version=describe_version()
    )

def run_ablation(
    config :ExperimentConfig,
    out_dir :Optional[Union[str, Path]]=None,
    workers :int=DEFAULT_WORKERS)->AblationSummary:
    """Runs every ablation arm for every seed and writes the grid CSV and summary JSON."""
    out_dir = Path(out_dir if out_dir is not None else config.output_dir)
    arms = ablation_arms(config)
    reports = run_arms(config, arms, out_dir, workers)

    writeFile(ablation_grid_csv(arms, reports, config.seeds), out_dir / ABLATION_GRID_FILE)
    summary = summarize_ablation(config, reports)
    writeFile(dumps_json(summary.model_dump(mode="json")), out_dir / ABLATION_SUMMARY_FILE)
    logger.info(
        f"ablation: noise-monotone on {summary.noise_monotone_seeds}/{len(config.seeds)} seed(s), "
        f"kaiming worst={summary.kaiming_worst}, corrected beats raw on nonortho={summary.nonortho_corrected_beats_raw}, "
        f"lora_sb ahead of pissa_style on {summary.curve_order.seeds_holding}/{len(config.seeds)} seed(s)"
    )
    if summary.diverged_runs:
        logger.warning(f"ablation: {len(summary.diverged_runs)} run(s) diverged: {', '.join(summary.diverged_runs)}")
    return summary
