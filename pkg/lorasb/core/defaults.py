from pathlib import Path
import os

INSTALLATION_DIR = Path(os.path.abspath(os.path.dirname(__file__))).parent

DEFAULT_ENCODING = "utf-8"

# kernel
CSV_SIGNIFICANT_DIGITS = 17
SVD_SWEEPS_PER_DIM = 100
INVERSE_MAX_DIM = 256
INVERSE_CONDITION_GUARD = 1e12
FULL_RANK_RATIO_GUARD = 1e-10

# adapters
DEFAULT_SUBSPACE_TOL = 1e-8
LAYOUTS_DIR = INSTALLATION_DIR / "adapters" / "layouts"
LAYOUT_SUFFIX = ".layout"

# initializer
DEFAULT_BUDGET_FRACTION = 0.001
DEGENERATE_SIGMA_RATIO = 1e-12
ADAPTER_STREAM_TAG = 0x5B  # spawn-key tag that keeps adapter draws off the task stream

# trainer
DEFAULT_ADAMW_BETA1 = 0.9
DEFAULT_ADAMW_BETA2 = 0.999
DEFAULT_ADAMW_EPS = 1e-8
DEFAULT_ADAMW_WEIGHT_DECAY = 0.0
DEFAULT_LR_SCHEDULE = "constant"
DEFAULT_WARMUP_RATIO = 0.0
DESCENT_TOL = 1e-12
PROBE_START_ETA = 1e-2
PROBE_WINDOW = 20
PROBE_MAX_HALVINGS = 40
CORE_GRAD_CHECK_TOL = 1e-9

# harness
REPORT_SCHEMA_VERSION = 2
DEFAULT_WORKERS = 1
WORKERS_ENV_VAR = "LORASB_WORKERS"
DEFAULT_OUTPUT_DIR = "./lorasb_runs"
RUN_REPORT_CSV_COLUMNS = [
    "step", "loss", "grad_norm", "dl_pred", "dl_real",
    "subspace_ok", "b_ortho_residual", "a_ortho_residual", "core_grad_error", "eta"
]
RUN_TIMING_SUFFIX = ".timing.json"
RUN_MODEL_DIR = "model"
RUN_ADAPTERS_DIR = "adapters"
EXPERIMENT_SUMMARY_FILE = "experiment_summary.json"
CURVE_ORDER_MIN_FRACTION = 0.8
TIED_WORST_RTOL = 5e-2
ESTIMATE_DIR = "estimate"
MANIFEST_FILE = "manifest.json"
MODEL_FILE = "model.json"
ABLATION_GRID_FILE = "ablation_grid.csv"
ABLATION_SUMMARY_FILE = "ablation_summary.json"
CHECK_REPORT_FILE = "check_report.json"
PARAMS_REPORT_FILE = "params.json"

# logging
DEFAULT_LOG_DIR = "./logs"
DEFAULT_LOG_LEVEL = "INFO"
LOG_DIR_ENV_VAR = "LORASB_LOG_DIR"
LOG_LEVEL_ENV_VAR = "LORASB_LOG_LEVEL"
LOG_RETENTION = "5 days"

# oracles
ORACLE_MAX_DIM = 32
ORACLE_MAX_RANK = 8
FD_MIN_STEP = 1e-8
FD_MAX_STEP = 1e-4
DEFAULT_FD_STEP = 1e-6
