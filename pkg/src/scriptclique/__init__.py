"""Detect third-party scripts shared across websites by clustering similar
script files into maximal cliques of a TF-IDF similarity graph."""

__version__ = "0.1.0"
