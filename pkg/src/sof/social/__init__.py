"""Mock social-graph server and the consent-filtered ingest client."""

from .corpus import (
    PhotoTag,
    SocialPhoto,
    corpus_to_chip_set,
    load_corpus_index,
    make_verification_pairs,
    split_chip_set,
)
from .ingest import IngestReport, fetch_pages, ingest
from .server import GraphServer, serve_graph

__all__ = [
    "GraphServer",
    "IngestReport",
    "PhotoTag",
    "SocialPhoto",
    "corpus_to_chip_set",
    "fetch_pages",
    "ingest",
    "load_corpus_index",
    "make_verification_pairs",
    "serve_graph",
    "split_chip_set",
]
