"""Dense vector -> feature token encoding, plus high-pass feature filters.

A token reads ``<feature><scheme>i[neg]<int>d<frac>``, e.g. ``1P2ineg0d13``
(feature 1, rounding to 2 places, value -0.13) or ``0I10i0d1`` (feature 0,
interval width 1/10, interval starting at 0.1). Only ``[0-9a-zA-Z]`` are
used so no fulltext analyzer will split a token.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from functools import lru_cache
from typing import Iterator, List, Optional, Tuple

import numpy as np

from .core import ConfigError, EncodingConfig, FilterConfig, decimal_digits

# |frac - 0.5| below this is re-decided with exact decimal arithmetic
_HALF_GUARD = 1e-6

TOKEN_RE = re.compile(r"^(\d+)([PI])(\d+)i(neg)?(\d+)d(\d+)$")


def _values(v) -> np.ndarray:
    return np.asarray(getattr(v, "values", v), dtype=np.float64)


def round_half_away(x: np.ndarray, digits: int) -> np.ndarray:
    """Round to ``digits`` decimal places, ties away from zero.

    Returns the rounded values scaled by ``10**digits`` as int64. Ties are
    judged on the shortest decimal representation of each float, so 0.065
    rounds to 0.07 even though its binary value is slightly above 0.065.
    """
    x = np.asarray(x, dtype=np.float64)
    scaled = np.round(x * 10.0 ** digits, 9)
    mag = np.abs(scaled)
    q = np.sign(scaled) * np.floor(mag + 0.5)
    near = np.abs(mag - np.floor(mag) - 0.5) < _HALF_GUARD
    if near.any():
        step = Decimal(1).scaleb(-digits)
        flat_q = q.reshape(-1)
        flat_x = x.reshape(-1)
        for i in np.flatnonzero(near.reshape(-1)):
            d = Decimal(repr(float(flat_x[i]))).quantize(step, rounding=ROUND_HALF_UP)
            flat_q[i] = float(d.scaleb(digits))
    return q.astype(np.int64)


def interval_index(x: np.ndarray, w: int) -> np.ndarray:
    """Index of the width-1/w interval holding each value (floor, noise-guarded)."""
    return np.floor(np.round(np.asarray(x, dtype=np.float64) * w, 9)).astype(np.int64)


def interval_digits(w: int) -> int:
    digits = decimal_digits(w)
    if digits is None:
        raise ConfigError(f"I{w}: 1/{w} has no finite decimal expansion")
    return max(digits, 1)


@lru_cache(maxsize=65536)
def render_scaled(q: int, digits: int) -> str:
    """Render the decimal ``q / 10**digits`` in token form."""
    sign = "neg" if q < 0 else ""
    whole, frac = divmod(abs(q), 10 ** digits)
    return f"{sign}{whole}d{frac:0{digits}d}"


def render_value(x: float, digits: int) -> str:
    """``render_value(-0.13, 2) == 'neg0d13'``; values rounding to zero are unsigned."""
    q = int(round_half_away(np.array([x]), digits)[0])
    return render_scaled(q, digits)


def quantize(values: np.ndarray, cfg: EncodingConfig) -> List[Tuple[str, int, np.ndarray]]:
    """Quantize a vector or a row matrix.

    Returns one ``(scheme_label, digits, scaled_ints)`` triple per active
    scheme, rounding first. ``scaled_ints / 10**digits`` is the exact decimal
    value that ends up in the token.
    """
    values = np.asarray(values, dtype=np.float64)
    out = []
    if cfg.precision is not None:
        p = cfg.precision
        out.append((f"P{p}", p, round_half_away(values, p)))
    if cfg.intervals is not None:
        w = cfg.intervals
        digits = interval_digits(w)
        out.append((f"I{w}", digits, interval_index(values, w) * (10 ** digits // w)))
    return out


def make_token(feature: int, label: str, q: int, digits: int) -> str:
    return f"{feature}{label}i{render_scaled(int(q), digits)}"


def parse_token(text: str) -> Tuple[int, str, Decimal]:
    """Inverse of token rendering: ``(feature, scheme_label, value)``."""
    m = TOKEN_RE.match(text)
    if m is None:
        raise ValueError(f"malformed feature token {text!r}")
    feat, kind, param, neg, whole, frac = m.groups()
    value = Decimal(f"{'-' if neg else ''}{whole}.{frac}")
    return int(feat), f"{kind}{param}", value


@dataclass(frozen=True)
class EncodedDocument:
    doc_id: Optional[int]
    tokens: Tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    @property
    def token_set(self) -> frozenset:
        return frozenset(self.tokens)


def _encode_features(v, cfg: EncodingConfig, features: np.ndarray) -> EncodedDocument:
    x = _values(v)
    sub = x[features]
    tokens = []
    for label, digits, q in quantize(sub, cfg):
        tokens.extend(make_token(int(j), label, int(qj), digits) for j, qj in zip(features, q))
    return EncodedDocument(getattr(v, "doc_id", None), tuple(tokens))


def _all_features(v) -> np.ndarray:
    return np.arange(_values(v).shape[0])


def encode_rounding(v, p: int) -> EncodedDocument:
    return encode(v, EncodingConfig.rounding(p))


def encode_interval(v, w: int) -> EncodedDocument:
    return encode(v, EncodingConfig.interval(w))


def encode(v, cfg: EncodingConfig) -> EncodedDocument:
    return _encode_features(v, cfg, _all_features(v))


def apply_trim(v, threshold: float) -> np.ndarray:
    """Ascending indices of features with ``|v_j| >= threshold``."""
    if threshold < 0:
        raise ConfigError(f"trim threshold must be >= 0, got {threshold}")
    return np.flatnonzero(np.abs(_values(v)) >= threshold)


def apply_best(v, m: Optional[int]) -> np.ndarray:
    """Ascending indices of the ``m`` largest ``|v_j|``; lower index wins ties."""
    x = _values(v)
    n = x.shape[0]
    if m is None or m >= n:
        return np.arange(n)
    if m < 1:
        raise ConfigError(f"best must be >= 1, got {m}")
    order = np.lexsort((np.arange(n), -np.abs(x)))
    return np.sort(order[:m])


def surviving_features(v, f: FilterConfig) -> np.ndarray:
    if f.is_noop:
        return _all_features(v)
    kept = apply_trim(v, f.trim)
    if f.best is not None:
        kept = np.intersect1d(kept, apply_best(v, f.best), assume_unique=True)
    return kept


def filter_encode(v, f: FilterConfig, cfg: EncodingConfig) -> EncodedDocument:
    """Encode only the features that survive ``f``; may return zero tokens."""
    return _encode_features(v, cfg, surviving_features(v, f))
