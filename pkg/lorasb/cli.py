from lorasb.adapters.algebra import AdapterMethod
from lorasb.adapters.layouts import available_layouts, load_layout
from lorasb.core.common import describe_version, dumps_json, writeFile
from lorasb.core.defaults import (
    CHECK_REPORT_FILE, DEFAULT_BUDGET_FRACTION, DEFAULT_ENCODING, PARAMS_REPORT_FILE
)
from lorasb.core.errors import LoraSBError, RejectedInputError, RunAbortedError
from lorasb.core.logs import logger
from lorasb.harness.ablation import run_ablation
from lorasb.harness.checks import SUITES, run_checks
from lorasb.harness.config import ExperimentConfig, load_experiment_config
from lorasb.harness.runner import resolve_workers, run_estimate, run_experiment

from pydantic import ValidationError
from typing import List, Optional
from pathlib import Path
import numpy as np
import argparse
import sys

EXIT_OK = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_INPUT_ERROR = 2
EXIT_RUN_ABORTED = 3

def safe_print(string :str):
    try:
        print(string)
    except (UnicodeEncodeError, UnicodeError):
        try:
            if sys.stdout.encoding != DEFAULT_ENCODING:
                sys.stdout.reconfigure(encoding=DEFAULT_ENCODING)
            print(string)
        except Exception:
            print(string.encode('ascii', 'replace').decode('ascii'))

def seed_list(value :str)->List[int]:
    try:
        seeds = [int(part) for part in value.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"seed list must be comma-separated integers, got {value!r}") from e
    if not seeds:
        raise argparse.ArgumentTypeError("seed list is empty")
    return seeds

def budget_fraction(value :str)->float:
    fraction = float(value)
    if not 0.0 < fraction <= 1.0:
        raise argparse.ArgumentTypeError(f"budget fraction must lie in (0, 1], got {fraction}")
    return fraction

def load_config(args)->ExperimentConfig:
    """Config file plus command-line overrides, re-validated as a whole."""
    config = load_experiment_config(args.config)
    document = config.model_dump(mode="json")
    if getattr(args, "seed_list", None):
        document["seeds"] = args.seed_list
    if getattr(args, "strict", False):
        document["train"]["strict"] = True
    if getattr(args, "budget_fraction", None) is not None:
        document["train"]["budget_fraction"] = args.budget_fraction
    return ExperimentConfig.model_validate(document)

def output_dir(args, config :ExperimentConfig)->Path:
    return Path(args.out if args.out else config.output_dir)

def handle_estimate(args)->int:
    config = load_config(args)
    manifest = run_estimate(config, output_dir(args, config), args.budget_fraction)
    safe_print(f"[ESTIMATE] ΔW_avg written to {manifest.parent}")
    return EXIT_OK

def handle_train(args)->int:
    config = load_config(args)
    out_dir = output_dir(args, config)
    reports = run_experiment(config, out_dir, resolve_workers(args.workers))

    for arm in config.arms:
        finals = [reports[(arm.label, seed)].final_loss for seed in config.seeds]
        safe_print(f"[TRAIN] {arm.label}: median final loss {float(np.median(finals)):.6e} over {len(finals)} seed(s)")
    for key in sorted(key for key, report in reports.items() if report.diverged):
        safe_print(f"[TRAIN] diverged: {reports[key].stem} at step {reports[key].diverged_at}")
    safe_print(f"[TRAIN] {len(reports)} report(s) written to {out_dir}")
    return EXIT_OK

def handle_check(args)->int:
    report = run_checks(args.suite, seed=args.seed)
    passed = sum(result.passed for result in report.results)
    safe_print(f"[CHECK] {args.suite}: {passed}/{len(report.results)} properties passed")

    if args.out:
        path = Path(args.out) / CHECK_REPORT_FILE
        writeFile(dumps_json(report.model_dump(mode="json")), path)
        safe_print(f"[CHECK] report written to {path}")

    if report.passed:
        return EXIT_OK
    safe_print(dumps_json(report.first_failure.model_dump(mode="json")).decode(DEFAULT_ENCODING))
    return EXIT_PROPERTY_FAILURE

def handle_params(args)->int:
    layout = load_layout(args.layout)
    methods = [AdapterMethod(method) for method in args.method] if args.method else list(AdapterMethod)

    rows = []
    for method in methods:
        for rank in args.rank:
            rows.append({
                "method": method.value,
                "rank": rank,
                "count": layout.count(method, rank),
                "formatted": layout.formatted(method, rank)
            })

    safe_print(f"{layout.name}: {layout.module_count} adapted modules ({layout.num_layers} layers)")
    safe_print(f"{'method':<10}{'rank':>6}{'count':>16}{'formatted':>14}")
    for row in rows:
        safe_print(f"{row['method']:<10}{row['rank']:>6}{row['count']:>16,}{row['formatted']:>14}")

    if args.out:
        path = Path(args.out) / PARAMS_REPORT_FILE
        writeFile(dumps_json({
            "layout": layout.model_dump(mode="json"),
            "rows": rows,
            "version": describe_version()
        }), path)
    return EXIT_OK

def handle_ablate(args)->int:
    config = load_config(args)
    out_dir = output_dir(args, config)
    summary = run_ablation(config, out_dir, resolve_workers(args.workers))

    for label, median in summary.medians.items():
        safe_print(f"[ABLATE] {label:<28} median final loss {median:.6e}")
    safe_print(f"[ABLATE] loss non-decreasing in sigma on {summary.noise_monotone_seeds}/{len(summary.seeds)} seed(s)")
    safe_print(f"[ABLATE] kaiming_svd worst of the SVD-based inits: {summary.kaiming_worst}")
    safe_print(f"[ABLATE] corrected beats raw on nonortho_sb: {summary.nonortho_corrected_beats_raw}")
    safe_print(f"[ABLATE] lora_sb curve ahead of pissa_style on {summary.curve_order.seeds_holding}/{len(summary.seeds)} seed(s)")
    for stem in summary.diverged_runs:
        safe_print(f"[ABLATE] diverged: {stem}")
    return EXIT_OK

def build_parser()->argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lorasb", description="LoRA-SB adapters on desk-scale networks")
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(sub :argparse.ArgumentParser, workers :bool=True):
        sub.add_argument("--config", required=True, help="Experiment config (.json, .yml or .yaml)")
        sub.add_argument("--seed-list", type=seed_list, help="Comma-separated seeds overriding the config")
        sub.add_argument("--out", help="Output directory (defaults to the config's output_dir)")
        if workers:
            sub.add_argument("--workers", type=int, default=None, help="Worker threads for arms x seeds")

    parser_estimate = subparsers.add_parser("estimate", help="Dump the ΔW_avg update estimate")
    add_config_flags(parser_estimate, workers=False)
    parser_estimate.add_argument(
        "--budget-fraction", type=budget_fraction, default=DEFAULT_BUDGET_FRACTION,
        help="Fraction of training samples used for the estimate"
    )
    parser_estimate.set_defaults(func=handle_estimate)

    parser_train = subparsers.add_parser("train", help="Train every arm for every seed and write run reports")
    add_config_flags(parser_train)
    parser_train.add_argument("--strict", action="store_true", help="Abort on the first broken invariant")
    parser_train.add_argument(
        "--budget-fraction", type=budget_fraction, default=None,
        help="Override the estimate sample fraction"
    )
    parser_train.set_defaults(func=handle_train)

    parser_check = subparsers.add_parser("check", help="Run property-check suites")
    parser_check.add_argument("suite", nargs="?", default="all", choices=["all", *SUITES])
    parser_check.add_argument("--seed", type=int, default=0, help="Base seed for the suites")
    parser_check.add_argument("--out", help="Directory for the JSON check report")
    parser_check.set_defaults(func=handle_check)

    parser_params = subparsers.add_parser("params", help="Count trainable adapter parameters")
    parser_params.add_argument("--layout", required=True, help=f"Layout file or bundled name ({', '.join(available_layouts())})")
    parser_params.add_argument("--method", nargs="+", choices=[method.value for method in AdapterMethod], help="Methods to count (default all)")
    parser_params.add_argument("--rank", type=int, nargs="+", required=True, help="Adapter rank(s)")
    parser_params.add_argument("--out", help="Directory for the JSON count table")
    parser_params.set_defaults(func=handle_params)

    parser_ablate = subparsers.add_parser("ablate", help="Sweep initializations and the gradient pathway cross")
    add_config_flags(parser_ablate)
    parser_ablate.add_argument("--strict", action="store_true", help="Abort on the first broken invariant")
    parser_ablate.add_argument(
        "--budget-fraction", type=budget_fraction, default=None,
        help="Override the estimate sample fraction"
    )
    parser_ablate.set_defaults(func=handle_ablate)

    return parser

def main(argv :Optional[List[str]]=None)->int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RunAbortedError as e:
        logger.error(f"run aborted at step {e.step}: {e}")
        return EXIT_RUN_ABORTED
    except (RejectedInputError, ValidationError, OSError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_INPUT_ERROR
    except LoraSBError as e:
        logger.error(f"{args.command}: numerical failure: {e}")
        return EXIT_RUN_ABORTED

if __name__ == "__main__":
    sys.exit(main())
