import sys

from _common import run

# empirical heavy-ball rate over the (alpha, beta) grid, with the quadratic tunings marked

if __name__ == "__main__":
    sys.exit(run("hb-sweep", "hb_sweep", workers=2))
