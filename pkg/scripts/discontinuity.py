import sys

from _common import run

# constant-based tuning vs fixed step on families that converge to a smooth limit

if __name__ == "__main__":
    sys.exit(run("discontinuity", "discontinuity"))
