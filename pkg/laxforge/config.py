from __future__ import annotations
import math
import os

from dotenv import load_dotenv

load_dotenv()

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

def _getenv(*names: str, default: str = "") -> str:
    """Return the first defined env var from names, else default."""
    for n in names:
        v = os.getenv(n)
        if v not in (None, ""):
            return v
    return default

def _as_float(x: str, default: float) -> float:
    try:
        return float(x)
    except Exception:
        return default

def _as_int(x: str, default: int) -> int:
    try:
        return int(x)
    except Exception:
        return default

def _as_bool(x: str, default: bool) -> bool:
    s = str(x).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    return default

GOLDEN_DIR = _getenv("LAXFORGE_GOLDEN_DIR", default=os.path.join(_ROOT, "golden"))
OUTPUT_DIR = _getenv("LAXFORGE_OUTPUT_DIR", "OUTPUT_DIR", default=os.path.join(_ROOT, "output"))
LOG_LEVEL  = _getenv("LAXFORGE_LOG_LEVEL", "LOG_LEVEL", default="INFO")

DEFAULT_SEED = _as_int(_getenv("LAXFORGE_SEED", default="1729"), 1729)
EVAL_SAMPLES = _as_int(_getenv("LAXFORGE_EVAL_SAMPLES", default="100"), 100)
EVAL_TOL     = _as_float(_getenv("LAXFORGE_EVAL_TOL", default="1e-10"), 1e-10)

# numeric value of the kappa parameter when densities are compiled onto a grid
KAPPA        = _as_float(_getenv("LAXFORGE_KAPPA", default="1.0"), 1.0)
# RK4 stability on the imaginary axis (~2.8) over the largest second-derivative eigenvalue (pi/dx)^2
CFL_CONSTANT = _as_float(_getenv("LAXFORGE_CFL_CONSTANT", default=str(2.8 / math.pi ** 2)), 2.8 / math.pi ** 2)
MIN_GRID     = _as_int(_getenv("LAXFORGE_MIN_GRID", default="64"), 64)
PHASE_GUARD  = _as_float(_getenv("LAXFORGE_PHASE_GUARD", default="1e-12"), 1e-12)
DEALIAS      = _as_bool(_getenv("LAXFORGE_DEALIAS", default="1"), True)

def golden_dir() -> str:
    """Golden directory, re-read from the environment on every call."""
    return _getenv("LAXFORGE_GOLDEN_DIR", default=GOLDEN_DIR)
