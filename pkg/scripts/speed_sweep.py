"""Speed sweep (engine / request / total time, vec size) on the clustered preset.

    python scripts/speed_sweep.py --batch 128 --out speed.csv
"""

import argparse

from _preset import add_dataset_args, build_index, emit
from vectokens.eval import speed_grid, run_speed_grid


def _ints(text):
    return [int(t) for t in text.split(",")]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    add_dataset_args(parser)
    parser.add_argument("--batch", type=int, default=128)
    parser.add_argument("--parallel", type=_ints, default=[1, 4, 16])
    parser.add_argument("--trims", type=lambda s: [float(t) for t in s.split(",")], default=[0.0, 0.05, 0.10])
    parser.add_argument("--pages", type=_ints, default=[20, 80, 320])
    parser.add_argument("--fanout", type=int, default=1, help="threads for shard fan-out")
    args = parser.parse_args(argv)

    index = build_index(args, fanout_workers=args.fanout)
    grid = speed_grid(args.parallel, args.trims, args.pages)
    emit(run_speed_grid(index, args.batch, grid, seed=args.seed), args.out)


if __name__ == "__main__":
    main()
