"""Constants used throughout the application."""

# Testing defaults
DEFAULT_ALPHA = 0.05
DEFAULT_REPLICATIONS = 100  # B, so B - 1 artificial samples
DEFAULT_SEED = 8032
DEFAULT_FDP_GAMMA = 0.1

# Tolerances
CORRELATION_SLACK = 1e-12
INTEGRALITY_TOLERANCE = 1e-9
EIGENVALUE_TOLERANCE = 1e-10
KKT_TOLERANCE = 1e-8
WEIGHT_CLAMP = 1e-10

# Regularization
DEFAULT_EPSILON = 0.01

# Random substreams derived from one root seed
SIGN_STREAM = 0
UNIFORM_STREAM = 1
DGP_STREAM = 2
REPLICATION_STREAM = 3
CALIBRATION_STREAM = 4

# Simulation defaults
DEFAULT_GARCH = (0.01, 0.1, 0.85)
BURN_IN = 500
DEFAULT_SIM_REPLICATIONS = 2000

# Backtest defaults
TRADING_DAYS = 252
DEFAULT_HOLDING = 21
DEFAULT_KAPPA = 0.0005  # 5 basis points
DEFAULT_WINDOW = 252

# CSV layout
DATE_COLUMN = "date"
SIMULATION_COLUMNS = [
    "N",
    "T",
    "delta",
    "innovation",
    "procedure",
    "replications",
    "error_rate",
    "error_rate_stderr",
    "average_power",
    "average_power_stderr",
    "frobenius_loss_mean",
    "sample_frobenius_loss_mean",
    "fdp_failures",
]

# Null distribution dump
NULL_DUMP_MAGIC = b"MTCNULL1"

# Logging
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
