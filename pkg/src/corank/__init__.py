"""Multi-label text classification with two-stage label co-occurrence reranking."""
__version__ = "0.1.0"
