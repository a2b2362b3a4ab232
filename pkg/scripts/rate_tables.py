import sys

from _common import run

# guaranteed vs measured contraction for every applicable rule

if __name__ == "__main__":
    sys.exit(run("rates", "rates", objective=("quadratic:1,10", "f_lrp"), iters=500))
