"""Run an experiment grid from a config file (defaults to the bundled synthetic one).

    python3 scripts/run_grid.py                       # 9 pairs x 8 variants, synthetic
    python3 scripts/run_grid.py my_config.json --out runs/mine --seed 1
"""

import argparse
import sys
from importlib import resources

from teenadapt.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", nargs="?", default=str(resources.files("teenadapt") / "data" / "synthetic.json"))
    ap.add_argument("--out", default=None)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    argv = []
    if args.out:
        argv += ["--out", args.out]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    return cli_main([*argv, "run", args.config])


if __name__ == "__main__":
    sys.exit(main())
