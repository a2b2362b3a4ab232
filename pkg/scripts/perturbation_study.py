import sys

from _common import run

# GD iterate deviation as the perturbation star norm shrinks

if __name__ == "__main__":
    sys.exit(run("perturb-study", "perturbation"))
