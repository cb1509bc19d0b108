"""Quality sweep (Precision@10, nDCG@10, avg. diff.) on the clustered preset.

    python scripts/quality_sweep.py --queries 200 --out quality.csv
    python scripts/quality_sweep.py --full-grid --queries 100
"""

import argparse

from _preset import add_dataset_args, build_index, emit
from vectokens.eval import PRESETS, quality_grid, run_quality_grid


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    add_dataset_args(parser)
    parser.add_argument("--queries", type=int, default=200)
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--full-grid", action="store_true",
                        help="every trim x best x page cell of the quality preset (90 cells)")
    args = parser.parse_args(argv)

    if args.full_grid:
        grid = PRESETS["paper-quality"]
    else:
        # page trend per trim, then the best-m trend at page 640
        grid = (quality_grid([0.0, 0.05, 0.10], [None], [20, 80, 320, 640, None])
                + quality_grid([0.0], [320, 90, 40, 17, 6], [640]))
    index = build_index(args)
    emit(run_quality_grid(index, args.queries, grid, k=args.k, seed=args.seed), args.out)


if __name__ == "__main__":
    main()
