"""Vector file formats.

Text: UTF-8, one vector per line, an optional leading integer id followed by
whitespace-separated decimal reals.

Binary (TVEC): ``b"TVEC"``, u32 version (=1), u32 n, u64 d, then d*n
little-endian float32 values. Ids are implicit (row order).
"""

from __future__ import annotations

import re
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .core import Dataset, IngestionError

TVEC_MAGIC = b"TVEC"
TVEC_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")

PathLike = Union[str, Path]

_INT = re.compile(r"^[0-9]+$")


def write_tvec(path: PathLike, rows: np.ndarray) -> None:
    rows = np.ascontiguousarray(rows, dtype="<f4")
    if rows.ndim != 2:
        raise ValueError("rows must be a 2-d array")
    d, n = rows.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TVEC_MAGIC, TVEC_VERSION, n, d))
        fh.write(rows.tobytes())


def read_tvec_rows(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise IngestionError(f"{path}: truncated TVEC header")
    magic, version, n, d = _HEADER.unpack_from(data)
    if magic != TVEC_MAGIC:
        raise IngestionError(f"{path}: bad magic {magic!r}")
    if version != TVEC_VERSION:
        raise IngestionError(f"{path}: unsupported TVEC version {version}")
    expected = _HEADER.size + 4 * n * d
    if len(data) != expected:
        raise IngestionError(f"{path}: expected {expected} bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(d, n)


def write_text(path: PathLike, rows: np.ndarray, ids=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, row in enumerate(np.asarray(rows, dtype=np.float64)):
            vals = " ".join(repr(float(x)) for x in row)
            fh.write(f"{ids[i]} {vals}\n" if ids is not None else vals + "\n")


def read_text(path: PathLike, has_ids: Optional[bool] = None):
    """Return ``(rows, ids)``; ``ids`` is None when the file carries none.

    With ``has_ids=None`` the leading token is taken as an id when it is an
    integer literal on every line and the file is not entirely integers.
    """
    lines = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            toks = line.split()
            if toks:
                lines.append((lineno, toks))
    if not lines:
        raise IngestionError(f"{path}: no vectors")

    if has_ids is None:
        lead_ints = all(_INT.match(t[0]) for _, t in lines)
        all_ints = lead_ints and all(_INT.match(x.lstrip("-+")) for _, t in lines for x in t)
        has_ids = lead_ints and not all_ints

    rows, ids = [], []
    width = None
    for lineno, toks in lines:
        if has_ids:
            if not _INT.match(toks[0]):
                raise IngestionError(f"{path}: line {lineno}: bad id {toks[0]!r}")
            ids.append(int(toks[0]))
            toks = toks[1:]
        if width is None:
            width = len(toks)
            if width == 0:
                raise IngestionError(f"{path}: line {lineno}: no values")
        elif len(toks) != width:
            raise IngestionError(
                f"{path}: line {lineno}: expected {width} values, found {len(toks)}")
        try:
            rows.append([float(x) for x in toks])
        except ValueError as exc:
            raise IngestionError(f"{path}: line {lineno}: {exc}") from None
    return np.array(rows, dtype=np.float64), (ids if has_ids else None)


def is_tvec(path: PathLike) -> bool:
    with open(path, "rb") as fh:
        return fh.read(4) == TVEC_MAGIC


def load_dataset(path: PathLike, has_ids: Optional[bool] = None) -> Dataset:
    """Load a text or TVEC file into a normalized :class:`Dataset`."""
    path = Path(path)
    if path.stat().st_size == 0:
        raise IngestionError(f"{path}: no vectors")
    if is_tvec(path):
        rows, ids = read_tvec_rows(path), None
        if rows.shape[0] == 0:
            raise IngestionError(f"{path}: no vectors")
    else:
        rows, ids = read_text(path, has_ids=has_ids)
    return Dataset.from_rows(rows, ids)
