import argparse
import sys
import time
from pathlib import Path

from condgraph.experiments import COMMANDS, ExperimentConfig

ROOT = Path(__file__).resolve().parent.parent


def run(command: str, name: str, **overrides) -> int:
    """Run one experiment command and write results/<name>.csv plus any artifacts."""
    p = argparse.ArgumentParser(description=f"{command} -> results/{name}.csv")
    p.add_argument("--out-dir", default=str(ROOT / "results"))
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    args = p.parse_args()

    cfg = ExperimentConfig(**overrides)
    for item in args.set:
        k, v = item.split("=", 1)
        cfg = cfg.update(k, v)
    out = Path(args.out_dir) / f"{name}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    rep = COMMANDS[command](cfg)
    rep.write(out)
    print(f"{name}: {len(rep.rows)} rows -> {out} ({time.perf_counter() - t0:.1f}s)")
    for v in rep.violations:
        print(f"  violation: {v}", file=sys.stderr)
    return 1 if rep.violations else 0
