"""Command-line driver: ``vectokens gen|index|search|eval|bench|snapshot-info``.

Exit codes: 0 success, 1 usage error, 2 data or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from .core import (
    ConfigError,
    DenseVector,
    EncodingConfig,
    FilterConfig,
    IngestionError,
    SearchParams,
    format_count,
    normalize,
    parse_count,
)
from .eval import PRESETS, quality_grid, run_quality_grid, run_speed_grid, speed_grid
from .index import SCORERS, InvertedIndex, SnapshotError
from .search import two_phase_search
from .synth import clustered_vectors
from .vecfile import load_dataset, write_tvec

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    """Validated options for one command; built from parsed arguments."""

    command: str
    encoding: Optional[EncodingConfig] = None
    index_filter: FilterConfig = field(default_factory=FilterConfig)
    query_filter: FilterConfig = field(default_factory=FilterConfig)
    params: SearchParams = field(default_factory=SearchParams)
    trims: List[float] = field(default_factory=list)
    bests: List[Optional[int]] = field(default_factory=list)
    pages: List[Optional[int]] = field(default_factory=list)
    parallel: List[int] = field(default_factory=list)
    shards: int = 1
    scorer: str = "bm25"
    batch: int = 128
    seed: int = 0
    json: bool = False

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        errors: List[str] = []
        cfg = cls(command=args.command, seed=getattr(args, "seed", 0), json=getattr(args, "json", False))

        def attempt(fn, *a):
            try:
                return fn(*a)
            except (ConfigError, ValueError) as exc:
                errors.append(str(exc))
                return None

        if hasattr(args, "encoding"):
            cfg.encoding = attempt(EncodingConfig.parse, args.encoding)
        if hasattr(args, "shards"):
            cfg.shards = args.shards
            if args.shards < 1:
                errors.append("--shards must be >= 1")
        if hasattr(args, "scorer"):
            cfg.scorer = args.scorer
        if hasattr(args, "index_trim"):
            best = attempt(parse_count, args.index_best, "--index-best")
            f = attempt(FilterConfig, args.index_trim, best)
            if f is not None:
                cfg.index_filter = f
        if args.command == "search":
            best = attempt(parse_count, args.best, "--best")
            page = attempt(parse_count, args.page, "--page")
            f = attempt(FilterConfig, args.trim, best)
            p = attempt(lambda: SearchParams(args.k, page, args.exclude_self))
            if f is not None:
                cfg.query_filter = f
            if p is not None:
                cfg.params = p
        if args.command in ("eval", "bench"):
            preset = PRESETS.get(args.preset) if args.preset else None
            if args.preset and preset is None:
                errors.append(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
            cfg.trims = attempt(_float_list, args.trim, "--trim") or []
            cfg.pages = attempt(_count_list, args.page, "--page") or []
            if args.k < 1:
                errors.append("--k must be >= 1")
            cfg.params = SearchParams(k=max(args.k, 1))
            if args.command == "eval":
                cfg.bests = attempt(_count_list, args.best, "--best") or []
                if args.queries < 1:
                    errors.append("--queries must be >= 1")
            else:
                cfg.parallel = attempt(_int_list, args.parallel, "--parallel") or []
                cfg.batch = args.batch
                if args.batch < 1:
                    errors.append("--batch must be >= 1")
            for t in cfg.trims:
                if not 0.0 <= t <= 1.0:
                    errors.append(f"--trim values must be in [0, 1], got {t}")
            for p in cfg.pages:
                if p is not None and p < cfg.params.k:
                    errors.append(f"--page {p} is smaller than --k {cfg.params.k}")
        if errors:
            raise UsageError("; ".join(errors))
        return cfg


def _split(text: Optional[str]) -> List[str]:
    if text is None:
        return []
    return [t.strip() for t in text.split(",") if t.strip()]


def _float_list(text, flag):
    try:
        return [float(t) for t in _split(text)]
    except ValueError:
        raise ConfigError(f"{flag}: expected comma-separated numbers, got {text!r}") from None


def _int_list(text, flag):
    out = []
    for t in _split(text):
        try:
            v = int(t)
        except ValueError:
            raise ConfigError(f"{flag}: expected comma-separated integers, got {text!r}") from None
        if v < 1:
            raise ConfigError(f"{flag}: values must be >= 1")
        out.append(v)
    return out


def _count_list(text, flag):
    return [parse_count(t, flag) for t in _split(text)]


# ---------------------------------------------------------------- commands

def cmd_gen(args, cfg: RunConfig) -> int:
    if args.dims < 1 or args.docs < 1 or args.clusters < 1 or not args.sigma > 0:
        raise UsageError("gen needs dims, docs, clusters >= 1 and sigma > 0")
    rows = clustered_vectors(args.dims, args.docs, args.clusters, args.sigma, cfg.seed)
    write_tvec(args.out, rows)
    print(f"wrote {args.docs} x {args.dims} vectors ({args.clusters} clusters, sigma {args.sigma}) to {args.out}")
    return EXIT_OK


def cmd_index(args, cfg: RunConfig) -> int:
    data = load_dataset(args.vectors)
    index = InvertedIndex.build(
        data, encoding=cfg.encoding, shards=cfg.shards, scorer=cfg.scorer,
        index_filter=cfg.index_filter,
    )
    index.save_snapshot(args.out)
    stats = {
        "docs": index.doc_count, "tokens": index.token_count,
        "vocabulary": index.vocabulary_size, "shards": index.n_shards,
        "encoding": index.encoding.spec, "snapshot": str(args.out),
    }
    if cfg.json:
        print(json.dumps(stats))
    else:
        print(f"indexed {stats['docs']} docs, {stats['tokens']} tokens, vocabulary {stats['vocabulary']}, "
              f"{stats['shards']} shard(s), encoding {stats['encoding']} -> {args.out}")
    return EXIT_OK


def _query_vector(args, index: InvertedIndex) -> DenseVector:
    if args.doc is not None:
        if args.doc not in index:
            raise UsageError(f"document {args.doc} is not in the index")
        return DenseVector(args.doc, index.vectors_of([args.doc])[0])
    try:
        values = [float(x) for x in args.vector.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"malformed query vector {args.vector!r}") from None
    if len(values) != index.dim:
        raise UsageError(f"query has {len(values)} values, index expects {index.dim}")
    try:
        return DenseVector(None, normalize(values))
    except IngestionError as exc:
        raise UsageError(f"malformed query vector: {exc}") from None


def cmd_search(args, cfg: RunConfig) -> int:
    index = InvertedIndex.load_snapshot(args.snapshot)
    q = _query_vector(args, index)
    res = two_phase_search(index, q, cfg.params, cfg.query_filter)
    if cfg.json:
        print(json.dumps(res.to_json()))
        return EXIT_OK
    if res.empty_query:
        print("0 results (empty query after filtering)")
        return EXIT_OK
    for rank, hit in enumerate(res.hits, start=1):
        print(f"{rank:>4}  doc {hit.doc_id:<10} sim {hit.score:.6f}")
    print(f"{len(res.hits)} results, candidates={res.candidates}, "
          f"engine {res.engine_s * 1e3:.3f} ms, total {res.total_s * 1e3:.3f} ms")
    return EXIT_OK


def _grid_or_preset(args, cfg: RunConfig, build, defaults):
    if args.preset:
        return PRESETS[args.preset]
    axes = [getattr(cfg, name) if getattr(args, flag) is not None else default
            for name, flag, default in defaults]
    grid = build(*axes)
    if not grid:
        raise UsageError("empty grid")
    return grid


def _report(report, args, cfg: RunConfig) -> None:
    text = report.to_jsonl() if cfg.json else report.to_csv()
    if args.out:
        Path(args.out).write_text(text)
        print(report.table())
        print(f"wrote {len(report.rows)} rows to {args.out}")
    else:
        sys.stdout.write(text)
        if not cfg.json:
            sys.stderr.write(report.table() + "\n")


def cmd_eval(args, cfg: RunConfig) -> int:
    index = InvertedIndex.load_snapshot(args.snapshot)
    grid = _grid_or_preset(args, cfg, quality_grid, [
        ("trims", "trim", [0.0]), ("bests", "best", [None]), ("pages", "page", [20, 80, 320, 640]),
    ])
    if args.queries > index.doc_count:
        raise UsageError(f"--queries {args.queries} exceeds the {index.doc_count} indexed docs")
    report = run_quality_grid(index, args.queries, grid, k=cfg.params.k, seed=cfg.seed,
                              exclude_self=args.exclude_self)
    _report(report, args, cfg)
    return EXIT_OK


def cmd_bench(args, cfg: RunConfig) -> int:
    index = InvertedIndex.load_snapshot(args.snapshot, fanout_workers=args.fanout)
    grid = _grid_or_preset(args, cfg, speed_grid, [
        ("parallel", "parallel", [1]), ("trims", "trim", [0.0, 0.05, 0.10]), ("pages", "page", [80]),
    ])
    report = run_speed_grid(index, cfg.batch, grid, k=cfg.params.k, seed=cfg.seed)
    _report(report, args, cfg)
    return EXIT_OK


def cmd_snapshot_info(args, cfg: RunConfig) -> int:
    index = InvertedIndex.load_snapshot(args.snapshot)
    info = dict(index.metadata())
    info["filter"] = {"trim": index.index_filter.trim, "best": format_count(index.index_filter.best)}
    info.update(tokens=index.token_count, vocabulary=index.vocabulary_size,
                bytes=Path(args.snapshot).stat().st_size)
    if cfg.json:
        print(json.dumps(info, sort_keys=True))
    else:
        for key in sorted(info):
            print(f"{key:>10}: {info[key]}")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen, "index": cmd_index, "search": cmd_search,
    "eval": cmd_eval, "bench": cmd_bench, "snapshot-info": cmd_snapshot_info,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vectokens", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--json", action="store_true", help="JSON / JSON-lines output")

    p = sub.add_parser("gen", help="write a synthetic clustered TVEC file")
    p.add_argument("--dims", type=int, default=400)
    p.add_argument("--docs", type=int, default=10000)
    p.add_argument("--clusters", type=int, default=100)
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--out", required=True)
    common(p)

    p = sub.add_parser("index", help="build an index snapshot from a vector file")
    p.add_argument("vectors")
    p.add_argument("--out", required=True)
    p.add_argument("--encoding", default="P2+I10", help="P<p>, I<W> or P<p>+I<W>")
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--scorer", choices=SCORERS, default="bm25")
    p.add_argument("--index-trim", type=float, default=0.0)
    p.add_argument("--index-best", default="all")
    common(p)

    p = sub.add_parser("search", help="two-phase search for one query")
    p.add_argument("snapshot")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--doc", type=int, help="use an indexed document as the query")
    g.add_argument("--vector", help="query values, whitespace or comma separated")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--page", default="all")
    p.add_argument("--trim", type=float, default=0.0)
    p.add_argument("--best", default="all")
    p.add_argument("--exclude-self", action="store_true")
    common(p)

    for name, helptext in (("eval", "quality sweep against brute force"),
                           ("bench", "speed sweep over query batches")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("snapshot")
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--trim", help="comma-separated trim thresholds")
        p.add_argument("--page", help="comma-separated page sizes (or 'all')")
        p.add_argument("--k", type=int, default=10)
        p.add_argument("--out", help="write CSV (or JSON-lines with --json) here")
        common(p)
    eval_p = sub.choices["eval"]
    eval_p.add_argument("--best", help="comma-separated best counts (or 'all')")
    eval_p.add_argument("--queries", type=int, default=100)
    eval_p.add_argument("--exclude-self", action="store_true")
    bench_p = sub.choices["bench"]
    bench_p.add_argument("--parallel", help="comma-separated parallel queue counts")
    bench_p.add_argument("--batch", type=int, default=128)
    bench_p.add_argument("--fanout", type=int, default=1, help="threads for shard fan-out")

    p = sub.add_parser("snapshot-info", help="print snapshot metadata")
    p.add_argument("snapshot")
    common(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_args(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"vectokens {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestionError, SnapshotError, OSError) as exc:
        print(f"vectokens {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
