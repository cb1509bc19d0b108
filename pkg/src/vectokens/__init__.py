"""Dense-vector similarity search on top of a token inverted index."""

from .core import (
    NO_FILTER,
    ConfigError,
    Dataset,
    DenseVector,
    EncodingConfig,
    FilterConfig,
    IngestionError,
    SearchParams,
    cosine,
    normalize,
)
from .encoder import (
    EncodedDocument,
    apply_best,
    apply_trim,
    encode,
    encode_interval,
    encode_rounding,
    filter_encode,
    parse_token,
    render_value,
)
from .index import InvertedIndex, PostingsList, SearchHit, SnapshotError
from .search import RankedResults, batch_search, naive_search, two_phase_search

__version__ = "0.1.0"

__all__ = [
    "NO_FILTER", "ConfigError", "Dataset", "DenseVector", "EncodingConfig", "FilterConfig",
    "IngestionError", "SearchParams", "cosine", "normalize",
    "EncodedDocument", "apply_best", "apply_trim", "encode", "encode_interval",
    "encode_rounding", "filter_encode", "parse_token", "render_value",
    "InvertedIndex", "PostingsList", "SearchHit", "SnapshotError",
    "RankedResults", "batch_search", "naive_search", "two_phase_search",
]
