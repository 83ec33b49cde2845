"""Sense-disambiguated contextual document embeddings.

Pipeline: per-word occurrence clustering over precomputed contextual
token vectors -> soft clustering of the sense vocabulary with a tied
covariance mixture -> idf-weighted composite document vectors ->
optional anisotropy correction -> evaluation protocols (classification,
limited data, few-shot, concept matching, sentence similarity).
"""

__version__ = "0.1.0"

from .errors import ConfigError, CtxdScdvError, DataError, NumericError

__all__ = [
    "ConfigError",
    "CtxdScdvError",
    "DataError",
    "NumericError",
    "__version__",
]
