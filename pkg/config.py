import os
import logging
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

# === Search ===
DEFAULT_M_MAX = int(os.environ.get('SWITCHCERT_M_MAX', 64))
_max_interior = os.environ.get('SWITCHCERT_MAX_INTERIOR', '')
DEFAULT_MAX_INTERIOR: Optional[int] = int(_max_interior) if _max_interior else None
DEFAULT_WORKERS = int(os.environ.get('SWITCHCERT_WORKERS', 1))
LAMBDA_TOL = float(os.environ.get('SWITCHCERT_LAMBDA_TOL', 1e-9))

# === Numerics ===
TOL_SCHUR = 1e-9
UNDERFLOW_NORM = 1e-300

# === Simulation ===
DEFAULT_HORIZON = int(os.environ.get('SWITCHCERT_HORIZON', 500))
DEFAULT_TRIALS = int(os.environ.get('SWITCHCERT_TRIALS', 100))
DEFAULT_SEED = int(os.environ.get('SWITCHCERT_SEED', 2019))

# === Reporting ===
LOG_LEVEL = os.environ.get('SWITCHCERT_LOG_LEVEL', 'INFO')
SIGNIFICANT_DIGITS = 7


def setup_logging(level: Optional[str] = None):
    """Configure root logging for command-line runs"""
    name = (level or LOG_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s'
    )
