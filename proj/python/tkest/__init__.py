"""Safe top-k threshold estimation over impact-ordered inverted indexes."""

from ._tkest import (
    CompatibilityError,
    FormatError,
    Index,
    Store,
    __version__,
    build_index,
    build_store,
    choose_k_prime,
    estimate,
    evaluate,
    exact_threshold,
    index_from_bytes,
    load_impacts,
    load_index,
    load_store,
    maxscore,
    overestimate_probability,
    sample_index,
    store_from_bytes,
    synthetic_corpus,
    synthetic_queries,
)

__all__ = [
    "CompatibilityError",
    "FormatError",
    "Index",
    "Store",
    "__version__",
    "build_index",
    "build_store",
    "choose_k_prime",
    "estimate",
    "evaluate",
    "exact_threshold",
    "index_from_bytes",
    "load_impacts",
    "load_index",
    "load_store",
    "maxscore",
    "overestimate_probability",
    "sample_index",
    "store_from_bytes",
    "synthetic_corpus",
    "synthetic_queries",
]
