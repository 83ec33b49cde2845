"""Contextual token-vector extraction into CEB1 embedding stores."""

__version__ = "0.1.0"
