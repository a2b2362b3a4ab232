import sys

from _common import run

# each edge of the implication graph checked on the default corpus

if __name__ == "__main__":
    sys.exit(run("verify-graph", "implication_graph"))
