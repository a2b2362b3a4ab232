"""Run every experiment script in sequence; exit non-zero if any reported a violation."""

import subprocess
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
SCRIPTS = ["lrp_constants", "implication_graph", "rate_tables", "perturbation_study",
           "discontinuity", "logistic", "heavy_ball_sweep"]

if __name__ == "__main__":
    codes = [subprocess.call([sys.executable, str(HERE / f"{s}.py"), *sys.argv[1:]]) for s in SCRIPTS]
    sys.exit(max(codes))
