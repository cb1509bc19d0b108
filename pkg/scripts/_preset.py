"""Shared dataset / index construction for the sweep scripts."""

import argparse
import time

from vectokens import Dataset, EncodingConfig, InvertedIndex
from vectokens.synth import clustered_vectors


def add_dataset_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dims", type=int, default=400)
    parser.add_argument("--docs", type=int, default=10_000)
    parser.add_argument("--clusters", type=int, default=100)
    parser.add_argument("--sigma", type=float, default=0.3)
    parser.add_argument("--encoding", default="P2+I10")
    parser.add_argument("--shards", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="CSV path (default: stdout)")


def build_index(args, fanout_workers: int = 1) -> InvertedIndex:
    t0 = time.perf_counter()
    rows = clustered_vectors(args.dims, args.docs, args.clusters, args.sigma, args.seed)
    index = InvertedIndex.build(
        Dataset.from_rows(rows), encoding=EncodingConfig.parse(args.encoding),
        shards=args.shards, fanout_workers=fanout_workers,
    )
    print(f"# indexed {index.doc_count} docs, vocabulary {index.vocabulary_size} "
          f"in {time.perf_counter() - t0:.2f} s")
    return index


def emit(report, out) -> None:
    print(report.table())
    if out:
        with open(out, "w") as fh:
            fh.write(report.to_csv())
        print(f"# wrote {len(report.rows)} rows to {out}")
