"""Annotation exporters: contextual token embeddings and dependency pairs."""

__version__ = "0.1.0"
