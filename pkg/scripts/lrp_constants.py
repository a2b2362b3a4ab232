import sys

from _common import run

# every condition constant for the piecewise quadratic, the quadratic and the f_eps ladder

if __name__ == "__main__":
    sys.exit(run("constants", "constants", objective=("f_lrp", "quadratic:1,10", "f_eps:0.4", "f_eps:0.2", "f_eps:0.1", "f_eps:0.05", "smooth_abs")))
