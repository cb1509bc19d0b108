"""Retrieval quality metrics and the quality / speed parameter sweeps.

Quality: each sampled query gets a gold top-k from :func:`naive_search`;
each grid cell (trim, best, page) is scored with Precision@k, nDCG@k
(relevance = cosine to the query) and avg. diff. (mean per-rank cosine
gap to gold).

Speed: each cell (parallelism, trim, page) runs a freshly sampled batch
through :func:`batch_search`. Engine time covers phase 1 only, request
time the whole two-phase call. Standard deviations are population (ddof=0).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, fields
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .core import Dataset, FilterConfig, SearchParams, format_count
from .encoder import surviving_features
from .index import InvertedIndex
from .search import RankedResults, batch_search, naive_search, two_phase_search

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- metrics

def precision_at_k(result: RankedResults, gold: RankedResults, k: int = 10) -> float:
    got = set(result.doc_ids[:k])
    want = set(gold.doc_ids[:k])
    return len(got & want) / k


def dcg(rels: Sequence[float]) -> float:
    return sum(r / math.log2(i + 2) for i, r in enumerate(rels))


def ndcg_at_k(result: RankedResults, gold: RankedResults, k: int = 10) -> float:
    """DCG of the returned ranking over DCG of the gold ranking, in [0, 1].

    Hit scores are the cosine similarities to the query, so they serve
    directly as relevance values. A gold DCG of zero yields 1.0.
    """
    ideal = dcg(gold.sims[:k])
    if ideal <= 0.0:
        log.warning("query %s: gold DCG is %s; nDCG taken as 1.0", gold.query_id, ideal)
        return 1.0
    return min(1.0, max(0.0, dcg(result.sims[:k]) / ideal))


def avg_diff_at_k(result: RankedResults, gold: RankedResults, k: int = 10) -> float:
    g = gold.sims[:k]
    r = result.sims[:k] + [0.0] * (k - len(result.sims[:k]))
    g = g + [0.0] * (k - len(g))
    return sum(a - b for a, b in zip(g, r)) / k


# ---------------------------------------------------------------- grids

@dataclass(frozen=True)
class QualityCell:
    trim: float = 0.0
    best: Optional[int] = None
    page: Optional[int] = None


@dataclass(frozen=True)
class SpeedCell:
    parallelism: int = 1
    trim: float = 0.0
    page: Optional[int] = None


def quality_grid(trims: Iterable[float], bests: Iterable[Optional[int]],
                 pages: Iterable[Optional[int]]) -> List[QualityCell]:
    return [QualityCell(t, b, p) for t in trims for b in bests for p in pages]


def speed_grid(parallel: Iterable[int], trims: Iterable[float],
               pages: Iterable[Optional[int]]) -> List[SpeedCell]:
    return [SpeedCell(q, t, p) for q in parallel for t in trims for p in pages]


PRESETS = {
    # trim x best-m x page; page sizes match the speed sweep plus "all"
    "paper-quality": quality_grid(
        (0.0, 0.05, 0.10), (None, 320, 90, 40, 17, 6), (20, 80, 320, 640, None)),
    "paper-speed": speed_grid((1, 4, 16), (0.0, 0.05, 0.10), (20, 80, 320)),
}


# ---------------------------------------------------------------- reports

@dataclass(frozen=True)
class QualityRow:
    trim: float
    best: str
    page: str
    queries: int
    min_precision: float
    avg_precision: float
    max_precision: float
    ndcg: float
    avg_diff: float
    empty_queries: int
    degenerate: bool


@dataclass(frozen=True)
class SpeedRow:
    parallelism: int
    trim: float
    page: str
    queries: int
    engine_avg: float
    engine_std: float
    request_avg: float
    request_std: float
    total: float
    vec_size_avg: float
    vec_size_std: float
    errors: int


class Report:
    row_type = None

    def __init__(self, rows):
        self.rows = list(rows)

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls.row_type)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.columns(), lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(asdict(row))
        return buf.getvalue()

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r)) + "\n" for r in self.rows)

    def table(self) -> str:
        cols = self.columns()
        cells = [[_fmt(getattr(r, c)) for c in cols] for r in self.rows]
        widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
        lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
        lines.append("  ".join("-" * w for w in widths))
        lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "yes" if v else ""
    if isinstance(v, float):
        return f"{v:.6f}" if abs(v) < 1e4 else f"{v:.1f}"
    return str(v)


class QualityReport(Report):
    row_type = QualityRow


class SpeedReport(Report):
    row_type = SpeedRow


# ---------------------------------------------------------------- runners

def sample_queries(data: Dataset, count: int, seed: int) -> List:
    if count > len(data):
        raise ValueError(f"query count {count} exceeds dataset size {len(data)}")
    rng = np.random.default_rng(seed)
    rows = rng.choice(len(data), size=count, replace=False)
    return [data.vector(int(r)) for r in rows]


def gold_standard(data: Dataset, queries, k: int = 10, exclude_self: bool = False):
    return [naive_search(data, q, k, exclude_self) for q in queries]


def quality_row(cell: QualityCell, results: Sequence[RankedResults],
                golds: Sequence[RankedResults], k: int) -> QualityRow:
    prec = np.array([precision_at_k(r, g, k) for r, g in zip(results, golds)])
    ndcg = np.array([ndcg_at_k(r, g, k) for r, g in zip(results, golds)])
    diff = np.array([avg_diff_at_k(r, g, k) for r, g in zip(results, golds)])
    empty = sum(r.empty_query for r in results)
    return QualityRow(
        trim=cell.trim,
        best=format_count(cell.best),
        page=format_count(cell.page),
        queries=len(results),
        min_precision=float(prec.min()),
        avg_precision=float(prec.mean()),
        max_precision=float(prec.max()),
        ndcg=float(ndcg.mean()),
        avg_diff=float(diff.mean()),
        empty_queries=int(empty),
        degenerate=bool(empty == len(results)),
    )


def run_quality_grid(
    index: InvertedIndex,
    query_count: int,
    grid: Sequence[QualityCell],
    k: int = 10,
    seed: int = 0,
    exclude_self: bool = False,
) -> QualityReport:
    if not grid:
        raise ValueError("empty grid")
    data = index.dataset()
    queries = sample_queries(data, query_count, seed)
    golds = gold_standard(data, queries, k, exclude_self)
    rows = []
    for cell in grid:
        params = SearchParams(k=k, page=cell.page, exclude_self=exclude_self)
        flt = FilterConfig(cell.trim, cell.best)
        results = [two_phase_search(index, q, params, flt) for q in queries]
        row = quality_row(cell, results, golds, k)
        if row.degenerate:
            log.warning("cell %s empties every query", cell)
        rows.append(row)
    return QualityReport(rows)


def _pstd(x: np.ndarray) -> float:
    return float(np.std(x)) if x.size else 0.0


def run_speed_grid(
    index: InvertedIndex,
    batch_size: int,
    grid: Sequence[SpeedCell],
    k: int = 10,
    seed: int = 0,
) -> SpeedReport:
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    if not grid:
        raise ValueError("empty grid")
    data = index.dataset()
    rng = np.random.default_rng(seed)
    rows = []
    for cell in grid:
        picks = rng.choice(len(data), size=batch_size, replace=batch_size > len(data))
        queries = [data.vector(int(r)) for r in picks]
        flt = FilterConfig(cell.trim, None)
        params = SearchParams(k=min(k, cell.page) if cell.page else k, page=cell.page)
        t0 = time.perf_counter()
        results = batch_search(index, queries, params, flt, cell.parallelism)
        total = time.perf_counter() - t0
        engine = np.array([r.engine_s for r in results])
        request = np.array([r.total_s for r in results])
        sizes = np.array([len(surviving_features(q, flt)) for q in queries], dtype=np.float64)
        rows.append(SpeedRow(
            parallelism=cell.parallelism,
            trim=cell.trim,
            page=format_count(cell.page),
            queries=batch_size,
            engine_avg=round(float(engine.mean()), 6),
            engine_std=round(_pstd(engine), 6),
            request_avg=round(float(request.mean()), 6),
            request_std=round(_pstd(request), 6),
            total=round(total, 6),
            vec_size_avg=float(sizes.mean()),
            vec_size_std=_pstd(sizes),
            errors=sum(r.error is not None for r in results),
        ))
    return SpeedReport(rows)
