"""Shared domain types, vector math and configuration records."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

ArrayLike = Union[Sequence[float], np.ndarray]


class IngestionError(ValueError):
    """Raised when input vectors cannot be accepted into a dataset."""


class ConfigError(ValueError):
    """Raised for invalid encoding / filter / search configuration."""


def dot_rows(matrix: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise dot products of ``matrix`` with ``q`` in float64.

    Elementwise product followed by numpy's pairwise row reduction, so the
    value for a given row does not depend on which other rows are present.
    Naive and two-phase search both go through here, which keeps their
    similarities bit-identical.
    """
    return (np.asarray(matrix, dtype=np.float64) * np.asarray(q, dtype=np.float64)).sum(axis=1)


def cosine_rows(matrix: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Cosine of every row of ``matrix`` with ``q``; zero-norm rows score 0."""
    matrix = np.asarray(matrix, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != q.shape[0]:
        raise ValueError(f"dimension mismatch: {matrix.shape[-1]} vs {q.shape[0]}")
    norms = np.sqrt((matrix * matrix).sum(axis=1)) * np.sqrt(float((q * q).sum()))
    dots = dot_rows(matrix, q)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(norms > 0, dots / np.where(norms > 0, norms, 1.0), 0.0)
    return out


def cosine(a: ArrayLike, b: ArrayLike) -> float:
    a = np.asarray(getattr(a, "values", a), dtype=np.float64)
    b = np.asarray(getattr(b, "values", b), dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(cosine_rows(a[None, :], b)[0])


def normalize(values: ArrayLike, row: Optional[int] = None) -> np.ndarray:
    """Scale ``values`` to unit L2 norm.

    ``row`` is only used to name the offending input in error messages.
    """
    where = f" (row {row})" if row is not None else ""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise IngestionError(f"empty or non 1-d vector{where}")
    if not np.all(np.isfinite(x)):
        raise IngestionError(f"non-finite value{where}")
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        raise IngestionError(f"zero vector{where}")
    out = x / norm
    # a second pass pulls the norm to within an ulp or two of 1
    return out / float(np.linalg.norm(out))


@dataclass(frozen=True)
class DenseVector:
    """A document or query vector. ``doc_id`` is None for ad-hoc queries."""

    doc_id: Optional[int]
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise IngestionError("vector must be 1-d and non-empty")
        if not np.all(np.isfinite(v)):
            raise IngestionError(f"non-finite value in vector {self.doc_id}")
        if self.doc_id is not None and self.doc_id < 0:
            raise IngestionError(f"negative doc id {self.doc_id}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def unit(cls, doc_id: Optional[int], values: ArrayLike) -> "DenseVector":
        return cls(doc_id, normalize(values, row=doc_id))

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Dataset:
    """A set of unit vectors: ``ids[i]`` owns row ``i`` of ``matrix``."""

    ids: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or ids.shape != (m.shape[0],):
            raise IngestionError("ids and matrix rows disagree")
        ids.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_rows(cls, rows: np.ndarray, ids: Optional[Sequence[int]] = None) -> "Dataset":
        """Normalize every row; ids default to the row order."""
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise IngestionError("no vectors")
        if rows.shape[1] == 0:
            raise IngestionError("vectors have zero dimensions")
        if ids is None:
            ids = np.arange(rows.shape[0], dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64)
        if np.any(ids < 0):
            raise IngestionError(f"negative doc id at row {int(np.argmax(ids < 0))}")
        if len(np.unique(ids)) != len(ids):
            raise IngestionError("duplicate doc ids")
        bad = ~np.all(np.isfinite(rows), axis=1)
        if bad.any():
            raise IngestionError(f"non-finite value (row {int(np.argmax(bad))})")
        norms = np.linalg.norm(rows, axis=1)
        if np.any(norms == 0.0):
            raise IngestionError(f"zero vector (row {int(np.argmax(norms == 0.0))})")
        out = rows / norms[:, None]
        out /= np.linalg.norm(out, axis=1)[:, None]
        return cls(ids, out)

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def vector(self, row: int) -> DenseVector:
        return DenseVector(int(self.ids[row]), self.matrix[row])

    def __iter__(self):
        for i in range(len(self)):
            yield self.vector(i)


# ---------------------------------------------------------------- configs

def decimal_digits(w: int) -> Optional[int]:
    """Fractional digits of 1/w, or None if the expansion is infinite."""
    if w < 1:
        return None
    r = w
    for p in (2, 5):
        while r % p == 0:
            r //= p
    if r != 1:
        return None
    k = 0
    while (10 ** k) % w:
        k += 1
    return k


_SPEC_PART = re.compile(r"^(P|I)(\d+)$")


@dataclass(frozen=True)
class EncodingConfig:
    """Rounding(p), Interval(W) or both (Combined).

    ``precision`` is the number of decimal places for rounding tokens and
    ``intervals`` is W, the reciprocal of the interval width.
    """

    precision: Optional[int] = None
    intervals: Optional[int] = None

    def __post_init__(self):
        if self.precision is None and self.intervals is None:
            raise ConfigError("encoding needs a rounding or an interval part")
        if self.precision is not None and not 1 <= self.precision <= 9:
            raise ConfigError(f"P{self.precision}: precision must be in 1..9")
        if self.intervals is not None:
            digits = decimal_digits(self.intervals)
            if digits is None:
                raise ConfigError(
                    f"I{self.intervals}: 1/{self.intervals} has no finite decimal expansion")
            if digits > 9:
                raise ConfigError(f"I{self.intervals}: interval start needs more than 9 digits")

    @classmethod
    def rounding(cls, p: int) -> "EncodingConfig":
        return cls(precision=p)

    @classmethod
    def interval(cls, w: int) -> "EncodingConfig":
        return cls(intervals=w)

    @classmethod
    def combined(cls, p: int, w: int) -> "EncodingConfig":
        return cls(precision=p, intervals=w)

    @classmethod
    def parse(cls, spec: str) -> "EncodingConfig":
        """Parse ``P2``, ``I10`` or ``P3+I5``."""
        parts = [s.strip() for s in spec.split("+")]
        if not 1 <= len(parts) <= 2:
            raise ConfigError(f"bad encoding spec {spec!r}")
        kw = {}
        for part in parts:
            m = _SPEC_PART.match(part)
            if m is None:
                raise ConfigError(f"bad encoding component {part!r} in {spec!r}")
            key = "precision" if m.group(1) == "P" else "intervals"
            if key in kw:
                raise ConfigError(f"repeated encoding component {part!r} in {spec!r}")
            kw[key] = int(m.group(2))
        return cls(**kw)

    @property
    def scheme(self) -> str:
        if self.precision is not None and self.intervals is not None:
            return "combined"
        return "rounding" if self.precision is not None else "interval"

    @property
    def spec(self) -> str:
        parts = []
        if self.precision is not None:
            parts.append(f"P{self.precision}")
        if self.intervals is not None:
            parts.append(f"I{self.intervals}")
        return "+".join(parts)

    def __str__(self) -> str:
        return self.spec


@dataclass(frozen=True)
class FilterConfig:
    """High-pass filter: drop |x| < trim, keep the ``best`` largest (None = all)."""

    trim: float = 0.0
    best: Optional[int] = None

    def __post_init__(self):
        if not (0.0 <= self.trim <= 1.0) or math.isnan(self.trim):
            raise ConfigError(f"trim must be in [0, 1], got {self.trim}")
        if self.best is not None and self.best < 1:
            raise ConfigError(f"best must be >= 1 or all, got {self.best}")

    @property
    def is_noop(self) -> bool:
        return self.trim == 0.0 and self.best is None


NO_FILTER = FilterConfig()


@dataclass(frozen=True)
class SearchParams:
    k: int = 10
    page: Optional[int] = None  # None = all matching candidates
    exclude_self: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.page is not None and self.page < self.k:
            raise ConfigError(f"page ({self.page}) must be >= k ({self.k})")


def parse_count(text: str, what: str) -> Optional[int]:
    """``'all'`` -> None, otherwise a positive integer."""
    if text.strip().lower() == "all":
        return None
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"{what}: expected an integer or 'all', got {text!r}") from None
    if value < 1:
        raise ConfigError(f"{what}: must be >= 1, got {value}")
    return value


def format_count(value: Optional[int]) -> str:
    return "all" if value is None else str(value)


__all__ = [
    "ConfigError", "Dataset", "DenseVector", "EncodingConfig", "FilterConfig",
    "IngestionError", "NO_FILTER", "SearchParams", "cosine", "cosine_rows", "decimal_digits",
    "dot_rows", "format_count", "normalize", "parse_count",
]
