"""Brute-force and two-phase (token match + cosine re-rank) search."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import NO_FILTER, Dataset, DenseVector, FilterConfig, SearchParams, cosine_rows
from .encoder import filter_encode
from .index import InvertedIndex, SearchHit, rank_order


@dataclass(frozen=True)
class RankedResults:
    query_id: Optional[int]
    hits: Tuple[SearchHit, ...]
    candidates: int = 0
    engine_s: float = 0.0
    total_s: float = 0.0
    query_tokens: int = 0
    empty_query: bool = False
    error: Optional[str] = None

    @property
    def doc_ids(self) -> List[int]:
        return [h.doc_id for h in self.hits]

    @property
    def sims(self) -> List[float]:
        return [h.score for h in self.hits]

    def to_json(self) -> dict:
        out = {
            "query_id": self.query_id,
            "hits": [{"doc": h.doc_id, "sim": h.score} for h in self.hits],
            "candidates": self.candidates,
            "engine_ms": self.engine_s * 1e3,
            "total_ms": self.total_s * 1e3,
        }
        if self.empty_query:
            out["empty_query"] = True
        if self.error is not None:
            out["error"] = self.error
        return out


def _top_k(ids: np.ndarray, sims: np.ndarray, k: int) -> Tuple[SearchHit, ...]:
    order = rank_order(sims, ids)[:k]
    return tuple(SearchHit(int(ids[i]), float(sims[i])) for i in order)


def rerank(source, q: DenseVector, candidates: Sequence[int], k: int) -> Tuple[SearchHit, ...]:
    """Top ``k`` of ``candidates`` by exact cosine with ``q``.

    ``source`` is anything with ``vectors_of(ids)`` (an index or its view).
    The input order of ``candidates`` does not matter.
    """
    ids = np.asarray(candidates, dtype=np.int64)
    if ids.size == 0:
        return ()
    sims = cosine_rows(source.vectors_of(ids), q.values)
    return _top_k(ids, sims, k)


def _as_dataset(data) -> Dataset:
    return data.dataset() if isinstance(data, InvertedIndex) else data


def naive_search(data, q: DenseVector, k: int = 10, exclude_self: bool = False) -> RankedResults:
    """Exact top-k by cosine over every live vector in ``data``.

    ``data`` is a :class:`Dataset` or an :class:`InvertedIndex` (its live
    vector store is scanned).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    t0 = time.perf_counter()
    ds = _as_dataset(data)
    if len(ds) == 0:
        raise ValueError("empty dataset")
    if ds.dim != q.dim:
        raise ValueError(f"dimension mismatch: dataset has {ds.dim}, query has {q.dim}")
    ids, matrix = ds.ids, ds.matrix
    if exclude_self and q.doc_id is not None:
        keep = ids != q.doc_id
        ids, matrix = ids[keep], matrix[keep]
    sims = cosine_rows(matrix, q.values)
    hits = _top_k(ids, sims, k)
    elapsed = time.perf_counter() - t0
    return RankedResults(q.doc_id, hits, candidates=len(ids), engine_s=elapsed, total_s=elapsed)


def two_phase_search(
    index: InvertedIndex,
    q: DenseVector,
    params: SearchParams = SearchParams(),
    query_filter: FilterConfig = NO_FILTER,
) -> RankedResults:
    """Encode the filtered query, fetch ``params.page`` candidates by token
    match, then re-rank them by exact cosine with the unfiltered query."""
    t0 = time.perf_counter()
    if q.dim != index.dim:
        raise ValueError(f"dimension mismatch: index has {index.dim}, query has {q.dim}")
    view = index.view()
    tokens = filter_encode(q, query_filter, index.encoding).tokens
    if not tokens:
        return RankedResults(q.doc_id, (), empty_query=True,
                             total_s=time.perf_counter() - t0)
    t1 = time.perf_counter()
    cands = view.phase1(tokens, params.page, pool=index.fanout_pool)
    engine = time.perf_counter() - t1
    ids = [h.doc_id for h in cands]
    if params.exclude_self and q.doc_id is not None:
        ids = [d for d in ids if d != q.doc_id]
    hits = rerank(view, q, ids, params.k)
    return RankedResults(
        q.doc_id, hits, candidates=len(cands), engine_s=engine,
        total_s=time.perf_counter() - t0, query_tokens=len(tokens),
    )


def batch_search(
    index: InvertedIndex,
    queries: Sequence[DenseVector],
    params: SearchParams = SearchParams(),
    query_filter: FilterConfig = NO_FILTER,
    parallelism: int = 1,
) -> List[RankedResults]:
    """Run :func:`two_phase_search` for every query on ``parallelism`` workers.

    Results come back in query order. A failing query yields a record with
    ``error`` set instead of aborting the batch.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    index.view()  # publish pending writes before fanning out

    def one(q: DenseVector) -> RankedResults:
        try:
            return two_phase_search(index, q, params, query_filter)
        except Exception as exc:  # noqa: BLE001 - reported per slot
            return RankedResults(getattr(q, "doc_id", None), (), error=f"{type(exc).__name__}: {exc}")

    if parallelism == 1 or len(queries) <= 1:
        return [one(q) for q in queries]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, queries))
