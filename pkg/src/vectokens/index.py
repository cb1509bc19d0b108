"""Sharded inverted index over feature tokens.

Each shard numbers its documents with dense *slots* in insertion order;
postings lists hold slots so phase-1 scoring is a ``bincount`` over the
concatenated postings of the query tokens. Writers mutate shard state
under a lock; :meth:`InvertedIndex.commit` publishes an immutable
:class:`IndexView` that readers use without locking.
"""

from __future__ import annotations

import json
import math
import struct
import threading
import zlib
from array import array
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    NO_FILTER,
    Dataset,
    DenseVector,
    EncodingConfig,
    FilterConfig,
    cosine_rows,
)
from .encoder import EncodedDocument, filter_encode, make_token, quantize, surviving_features

SCORERS = ("bm25", "matchcount")
BM25_K1 = 1.2
BM25_B = 0.75

SNAPSHOT_MAGIC = b"TVIX"
SNAPSHOT_VERSION = 1


class DuplicateDocumentError(ValueError):
    pass


class SnapshotError(ValueError):
    pass


@dataclass(frozen=True)
class SearchHit:
    doc_id: int
    score: float


@dataclass(frozen=True)
class PostingsList:
    token: str
    doc_ids: Tuple[int, ...]

    @property
    def df(self) -> int:
        return len(self.doc_ids)


def bm25_idf(n_docs: int, df: int) -> float:
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


def bm25_norm(length, avglen: float):
    """BM25 term weight for tf=1, without the idf factor."""
    return (BM25_K1 + 1.0) / (1.0 + BM25_K1 * (1.0 - BM25_B + BM25_B * length / avglen))


def rank_order(scores: np.ndarray, doc_ids: np.ndarray) -> np.ndarray:
    """Indices sorting by score descending, doc id ascending."""
    return np.lexsort((doc_ids, -scores))


# ---------------------------------------------------------------- shards

@dataclass(frozen=True)
class ShardView:
    shard_id: int
    postings: Dict[str, np.ndarray]
    doc_ids: np.ndarray
    live: np.ndarray
    lengths: np.ndarray
    vectors: np.ndarray
    slot_of: Dict[int, int]

    @property
    def n_slots(self) -> int:
        return self.doc_ids.shape[0]

    def slot(self, doc_id: int) -> Optional[int]:
        s = self.slot_of.get(doc_id)
        if s is None or s >= self.n_slots or not self.live[s]:
            return None
        return s


class IndexShard:
    """Writer-side state of one shard. Not thread-safe on its own."""

    def __init__(self, shard_id: int, dim: int):
        self.shard_id = shard_id
        self.dim = dim
        self._postings: Dict[str, array] = {}
        self._frozen: Dict[str, np.ndarray] = {}
        self._dirty: set = set()
        self._doc_ids = array("q")
        self._live = bytearray()
        self._lengths = array("l")
        self._vecs = np.empty((16, dim), dtype=np.float64)
        self._slot_of: Dict[int, int] = {}

    @property
    def n_slots(self) -> int:
        return len(self._doc_ids)

    def _reserve(self, extra: int) -> None:
        need = self.n_slots + extra
        if need > self._vecs.shape[0]:
            cap = max(need, 2 * self._vecs.shape[0])
            grown = np.empty((cap, self.dim), dtype=np.float64)
            grown[: self.n_slots] = self._vecs[: self.n_slots]
            self._vecs = grown

    def new_slots(self, doc_ids: Sequence[int], rows: np.ndarray, lengths: Sequence[int]) -> int:
        first = self.n_slots
        self._reserve(len(doc_ids))
        self._vecs[first : first + len(doc_ids)] = rows
        for i, d in enumerate(doc_ids):
            self._slot_of[int(d)] = first + i
        self._doc_ids.extend(int(d) for d in doc_ids)
        self._live.extend(b"\x01" * len(doc_ids))
        self._lengths.extend(int(x) for x in lengths)
        return first

    def post(self, token: str, slots) -> None:
        lst = self._postings.get(token)
        if lst is None:
            lst = self._postings[token] = array("i")
        if isinstance(slots, np.ndarray):
            lst.frombytes(slots.astype(np.int32).tobytes())
        else:
            lst.append(slots)
        self._dirty.add(token)

    def live_slot(self, doc_id: int) -> Optional[int]:
        s = self._slot_of.get(doc_id)
        if s is None or not self._live[s]:
            return None
        return s

    def kill(self, slot: int) -> None:
        self._live[slot] = 0

    def vector(self, slot: int) -> np.ndarray:
        return self._vecs[slot]

    def view(self) -> ShardView:
        for tok in self._dirty:
            self._frozen[tok] = np.frombuffer(self._postings[tok], dtype=np.int32).copy()
        self._dirty.clear()
        n = self.n_slots
        return ShardView(
            shard_id=self.shard_id,
            postings=dict(self._frozen),
            doc_ids=np.frombuffer(self._doc_ids, dtype=np.int64).copy(),
            live=np.frombuffer(bytes(self._live), dtype=np.uint8).astype(bool),
            lengths=np.frombuffer(self._lengths, dtype=np.dtype("l")).astype(np.int64),
            vectors=self._vecs[:n],
            slot_of=dict(self._slot_of),
        )


# ---------------------------------------------------------------- views

@dataclass(frozen=True)
class IndexView:
    """Immutable, query-ready state of the whole index."""

    dim: int
    shards: Tuple[ShardView, ...]
    df: Dict[str, int]
    n_docs: int
    avglen: float
    scorer: str

    def _shard_for(self, doc_id: int) -> ShardView:
        return self.shards[doc_id % len(self.shards)]

    def _idf(self, token: str) -> float:
        return bm25_idf(self.n_docs, self.df[token])

    def shard_topk(self, sv: ShardView, tokens: Sequence[str], page: Optional[int]):
        """Score one shard; return (doc_ids, scores) of its best ``page`` hits."""
        present = [t for t in tokens if t in sv.postings]
        if not present or sv.n_slots == 0:
            return np.empty(0, np.int64), np.empty(0, np.float64)
        arrays = [sv.postings[t] for t in present]
        slots = np.concatenate(arrays)
        counts = np.bincount(slots, minlength=sv.n_slots)
        if self.scorer == "bm25":
            idf = np.array([self._idf(t) for t in present])
            weights = np.repeat(idf, [a.shape[0] for a in arrays])
            sums = np.bincount(slots, weights=weights, minlength=sv.n_slots)
            scores = sums * bm25_norm(sv.lengths, self.avglen)
        else:
            scores = counts.astype(np.float64)
        cand = np.flatnonzero((counts > 0) & sv.live)
        ids = sv.doc_ids[cand]
        sc = scores[cand]
        order = rank_order(sc, ids)
        if page is not None:
            order = order[:page]
        return ids[order], sc[order]

    def phase1(self, tokens: Iterable[str], page: Optional[int], pool=None) -> List[SearchHit]:
        toks = sorted({t for t in tokens if self.df.get(t, 0) > 0})
        if not toks:
            return []
        if pool is not None and len(self.shards) > 1:
            parts = list(pool.map(lambda sv: self.shard_topk(sv, toks, page), self.shards))
        else:
            parts = [self.shard_topk(sv, toks, page) for sv in self.shards]
        ids = np.concatenate([p[0] for p in parts])
        scores = np.concatenate([p[1] for p in parts])
        order = rank_order(scores, ids)
        if page is not None:
            order = order[:page]
        return [SearchHit(int(ids[i]), float(scores[i])) for i in order]

    def vectors_of(self, doc_ids: Sequence[int]) -> np.ndarray:
        out = np.empty((len(doc_ids), self.dim), dtype=np.float64)
        for i, d in enumerate(doc_ids):
            sv = self._shard_for(d)
            s = sv.slot(d)
            if s is None:
                raise KeyError(f"unknown document {d}")
            out[i] = sv.vectors[s]
        return out

    def dataset(self) -> Dataset:
        """All live vectors, ordered by doc id."""
        ids, rows = [], []
        for sv in self.shards:
            idx = np.flatnonzero(sv.live)
            ids.append(sv.doc_ids[idx])
            rows.append(sv.vectors[idx])
        ids = np.concatenate(ids) if ids else np.empty(0, np.int64)
        rows = np.concatenate(rows) if rows else np.empty((0, self.dim))
        order = np.argsort(ids, kind="stable")
        return Dataset(ids[order], rows[order])


# ---------------------------------------------------------------- index

class InvertedIndex:
    """Sharded token index plus a dense vector store for re-ranking.

    Documents go to shard ``doc_id % shards``. ``index_filter`` is applied
    when documents are added (query-side filtering is separate, see
    :mod:`vectokens.search`). Writes are visible to queries after
    :meth:`commit`, which query methods call implicitly when needed.
    """

    def __init__(
        self,
        dim: int,
        encoding: EncodingConfig = EncodingConfig.combined(2, 10),
        shards: int = 1,
        scorer: str = "bm25",
        index_filter: FilterConfig = NO_FILTER,
        fanout_workers: int = 1,
    ):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if shards < 1:
            raise ValueError("shards must be >= 1")
        if scorer not in SCORERS:
            raise ValueError(f"unknown scorer {scorer!r}; choose from {SCORERS}")
        self.dim = dim
        self.encoding = encoding
        self.scorer = scorer
        self.index_filter = index_filter
        self._shards = [IndexShard(i, dim) for i in range(shards)]
        self._df: Dict[str, int] = {}
        self._n_docs = 0
        self._total_len = 0
        self._lock = threading.RLock()
        self._view: Optional[IndexView] = None
        self._dirty = True
        self._pool = ThreadPoolExecutor(fanout_workers) if fanout_workers > 1 and shards > 1 else None

    # -- properties

    @property
    def n_shards(self) -> int:
        return len(self._shards)

    @property
    def doc_count(self) -> int:
        return self._n_docs

    @property
    def token_count(self) -> int:
        return self._total_len

    @property
    def fanout_pool(self) -> Optional[ThreadPoolExecutor]:
        return self._pool

    @property
    def vocabulary_size(self) -> int:
        return sum(1 for c in self._df.values() if c > 0)

    # -- writes

    def _shard(self, doc_id: int) -> IndexShard:
        return self._shards[doc_id % len(self._shards)]

    def _check_new(self, doc_id, dim: int) -> None:
        if doc_id is None or doc_id < 0:
            raise ValueError("indexed documents need a non-negative doc id")
        if dim != self.dim:
            raise ValueError(f"dimension mismatch: index has {self.dim}, vector has {dim}")
        if self._shard(doc_id).live_slot(doc_id) is not None:
            raise DuplicateDocumentError(f"duplicate document {doc_id}")

    def add_document(self, v: DenseVector) -> int:
        """Index ``v``; returns the number of tokens stored for it."""
        with self._lock:
            self._check_new(v.doc_id, v.dim)
            doc = filter_encode(v, self.index_filter, self.encoding)
            shard = self._shard(v.doc_id)
            slot = shard.new_slots([v.doc_id], v.values[None, :], [len(doc)])
            for tok in doc.tokens:
                shard.post(tok, slot)
                self._df[tok] = self._df.get(tok, 0) + 1
            self._n_docs += 1
            self._total_len += len(doc)
            self._dirty = True
            return len(doc)

    def add_dataset(self, data: Dataset) -> None:
        """Bulk add; produces exactly the postings of repeated :meth:`add_document`."""
        with self._lock:
            seen = set()
            for d in data.ids.tolist():
                if d in seen:
                    raise DuplicateDocumentError(f"duplicate document {d}")
                seen.add(d)
                self._check_new(d, data.dim)
            m = data.matrix
            n = data.dim
            keep = np.zeros(m.shape, dtype=bool)
            if self.index_filter.is_noop:
                keep[:] = True
            else:
                for r in range(m.shape[0]):
                    keep[r, surviving_features(m[r], self.index_filter)] = True
            schemes = quantize(m, self.encoding)
            lengths = keep.sum(axis=1) * len(schemes)
            for shard in self._shards:
                rows = np.flatnonzero(data.ids % len(self._shards) == shard.shard_id)
                if rows.size == 0:
                    continue
                first = shard.new_slots(data.ids[rows], m[rows], lengths[rows])
                slots = np.arange(first, first + rows.size)
                # features in ascending order, rounding scheme first, to match add_document
                for label, digits, q in schemes:
                    qs = q[rows]
                    ks = keep[rows]
                    for j in range(n):
                        col_keep = ks[:, j]
                        col = qs[col_keep, j]
                        col_slots = slots[col_keep]
                        if col.size == 0:
                            continue
                        order = np.argsort(col, kind="stable")
                        vals, starts = np.unique(col[order], return_index=True)
                        bounds = list(starts[1:]) + [col.size]
                        for val, a, b in zip(vals.tolist(), starts.tolist(), bounds):
                            tok = make_token(j, label, val, digits)
                            shard.post(tok, col_slots[order[a:b]])
                            self._df[tok] = self._df.get(tok, 0) + (b - a)
            self._n_docs += m.shape[0]
            self._total_len += int(lengths.sum())
            self._dirty = True

    def delete_document(self, doc_id: int) -> bool:
        """Tombstone ``doc_id``; False if it is unknown or already deleted."""
        with self._lock:
            shard = self._shard(doc_id)
            slot = shard.live_slot(doc_id)
            if slot is None:
                return False
            doc = filter_encode(shard.vector(slot), self.index_filter, self.encoding)
            for tok in doc.tokens:
                self._df[tok] -= 1
            shard.kill(slot)
            self._n_docs -= 1
            self._total_len -= len(doc)
            self._dirty = True
            return True

    def commit(self) -> IndexView:
        with self._lock:
            if self._dirty or self._view is None:
                self._view = IndexView(
                    dim=self.dim,
                    shards=tuple(s.view() for s in self._shards),
                    df={t: c for t, c in self._df.items() if c > 0},
                    n_docs=self._n_docs,
                    avglen=(self._total_len / self._n_docs) if self._n_docs else 1.0,
                    scorer=self.scorer,
                )
                self._dirty = False
            return self._view

    def view(self) -> IndexView:
        v = self._view
        if v is None or self._dirty:
            v = self.commit()
        return v

    # -- reads

    def phase1_query(self, tokens: Iterable[str], page: Optional[int] = None) -> List[SearchHit]:
        """Score live docs sharing a token with the query; best ``page`` hits (None = all)."""
        if page is not None and page < 1:
            raise ValueError("page must be >= 1 or None")
        return self.view().phase1(tokens, page, pool=self._pool)

    def doc_tokens(self, doc_id: int) -> EncodedDocument:
        shard = self._shard(doc_id)
        slot = shard.live_slot(doc_id)
        if slot is None:
            raise KeyError(f"unknown document {doc_id}")
        return filter_encode(DenseVector(doc_id, shard.vector(slot)), self.index_filter, self.encoding)

    def score_matchcount(self, tokens: Iterable[str], doc_id: int) -> int:
        return len(set(tokens) & self.doc_tokens(doc_id).token_set)

    def score_bm25(self, tokens: Iterable[str], doc_id: int) -> float:
        doc = self.doc_tokens(doc_id)
        shared = sorted(set(tokens) & doc.token_set)
        avglen = (self._total_len / self._n_docs) if self._n_docs else 1.0
        total = 0.0
        for t in shared:
            idf = bm25_idf(self._n_docs, self._df[t])
            total += idf * (1 * (BM25_K1 + 1)) / (1 + BM25_K1 * (1 - BM25_B + BM25_B * len(doc) / avglen))
        return total

    def score(self, tokens: Iterable[str], doc_id: int) -> float:
        tokens = list(tokens)
        if self.scorer == "bm25":
            return self.score_bm25(tokens, doc_id)
        return float(self.score_matchcount(tokens, doc_id))

    def postings(self, token: str) -> PostingsList:
        """Live documents holding ``token``, ascending by doc id."""
        ids = []
        for sv in self.view().shards:
            arr = sv.postings.get(token)
            if arr is not None:
                live = arr[sv.live[arr]]
                ids.extend(sv.doc_ids[live].tolist())
        return PostingsList(token, tuple(sorted(ids)))

    def tokens(self) -> List[str]:
        return sorted(t for t, c in self._df.items() if c > 0)

    def vectors_of(self, doc_ids: Sequence[int]) -> np.ndarray:
        return self.view().vectors_of(doc_ids)

    def similarities(self, q: np.ndarray, doc_ids: Sequence[int]) -> np.ndarray:
        return cosine_rows(self.vectors_of(doc_ids), q)

    def dataset(self) -> Dataset:
        return self.view().dataset()

    def __contains__(self, doc_id: int) -> bool:
        return self._shard(doc_id).live_slot(doc_id) is not None

    def __len__(self) -> int:
        return self._n_docs

    @classmethod
    def build(cls, data: Dataset, **kwargs) -> "InvertedIndex":
        index = cls(data.dim, **kwargs)
        index.add_dataset(data)
        index.commit()
        return index

    # -- snapshots

    def metadata(self) -> dict:
        return {
            "dim": self.dim,
            "shards": self.n_shards,
            "encoding": self.encoding.spec,
            "scorer": self.scorer,
            "filter": {"trim": self.index_filter.trim, "best": self.index_filter.best},
            "docs": self._n_docs,
        }

    def to_bytes(self) -> bytes:
        view = self.commit()
        meta = json.dumps(self.metadata(), sort_keys=True).encode()
        out = bytearray()
        out += SNAPSHOT_MAGIC
        out += struct.pack("<II", SNAPSHOT_VERSION, len(meta))
        out += meta
        for sv in view.shards:
            n = sv.n_slots
            out += struct.pack("<Q", n)
            out += sv.doc_ids.astype("<i8").tobytes()
            out += sv.live.astype(np.uint8).tobytes()
            out += sv.lengths.astype("<u4").tobytes()
            out += np.ascontiguousarray(sv.vectors, dtype="<f8").tobytes()
            toks = sorted(sv.postings)
            out += struct.pack("<Q", len(toks))
            for tok in toks:
                raw = tok.encode()
                arr = sv.postings[tok]
                out += struct.pack("<HQ", len(raw), arr.shape[0])
                out += raw
                out += arr.astype("<i4").tobytes()
        out += struct.pack("<I", zlib.crc32(out))
        return bytes(out)

    def save_snapshot(self, path) -> None:
        tmp = Path(str(path) + ".tmp")
        tmp.write_bytes(self.to_bytes())
        tmp.replace(path)

    @classmethod
    def from_bytes(cls, data: bytes, fanout_workers: int = 1) -> "InvertedIndex":
        if len(data) < 16:
            raise SnapshotError("corrupt snapshot: truncated")
        if data[:4] != SNAPSHOT_MAGIC:
            raise SnapshotError("corrupt snapshot: bad magic")
        version, meta_len = struct.unpack_from("<II", data, 4)
        if version != SNAPSHOT_VERSION:
            raise SnapshotError(f"corrupt snapshot: unsupported version {version}")
        (crc,) = struct.unpack_from("<I", data, len(data) - 4)
        if zlib.crc32(data[:-4]) != crc:
            raise SnapshotError("corrupt snapshot: checksum mismatch")
        try:
            return cls._decode(data, 12, meta_len, fanout_workers)
        except (struct.error, ValueError, KeyError, UnicodeDecodeError) as exc:
            raise SnapshotError(f"corrupt snapshot: {exc}") from None

    @classmethod
    def _decode(cls, data: bytes, pos: int, meta_len: int, fanout_workers: int) -> "InvertedIndex":
        end = len(data) - 4
        meta = json.loads(data[pos : pos + meta_len])
        pos += meta_len
        flt = meta["filter"]
        index = cls(
            meta["dim"],
            encoding=EncodingConfig.parse(meta["encoding"]),
            shards=meta["shards"],
            scorer=meta["scorer"],
            index_filter=FilterConfig(flt["trim"], flt["best"]),
            fanout_workers=fanout_workers,
        )
        dim = index.dim

        def take(nbytes):
            nonlocal pos
            if pos + nbytes > end:
                raise ValueError("truncated")
            chunk = data[pos : pos + nbytes]
            pos += nbytes
            return chunk

        for shard in index._shards:
            (n,) = struct.unpack("<Q", take(8))
            ids = np.frombuffer(take(8 * n), dtype="<i8").astype(np.int64)
            live = np.frombuffer(take(n), dtype=np.uint8).astype(bool)
            lengths = np.frombuffer(take(4 * n), dtype="<u4").astype(np.int64)
            vecs = np.frombuffer(take(8 * n * dim), dtype="<f8").reshape(n, dim)
            shard.new_slots(ids, vecs, lengths)
            for s in np.flatnonzero(~live):
                shard.kill(int(s))
            (ntok,) = struct.unpack("<Q", take(8))
            for _ in range(ntok):
                tlen, count = struct.unpack("<HQ", take(10))
                tok = take(tlen).decode()
                slots = np.frombuffer(take(4 * count), dtype="<i4")
                if count and (slots.min() < 0 or slots.max() >= n):
                    raise ValueError(f"slot out of range in postings of {tok}")
                shard.post(tok, slots)
                df = int(live[slots].sum())
                if df:
                    index._df[tok] = index._df.get(tok, 0) + df
            index._n_docs += int(live.sum())
            index._total_len += int(lengths[live].sum())
        if pos != end:
            raise ValueError("trailing bytes")
        if index._n_docs != meta["docs"]:
            raise ValueError("document count mismatch")
        index.commit()
        return index

    @classmethod
    def load_snapshot(cls, path, fanout_workers: int = 1) -> "InvertedIndex":
        try:
            data = Path(path).read_bytes()
        except OSError as exc:
            raise SnapshotError(f"cannot read snapshot {path}: {exc}") from None
        return cls.from_bytes(data, fanout_workers=fanout_workers)
