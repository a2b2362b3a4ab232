import sys

from _common import run

# squared logistic loss: constants, best guarantee and the adaptive-step run

if __name__ == "__main__":
    sys.exit(run("logistic", "logistic"))
