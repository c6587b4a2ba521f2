"""Causal additive structure learning with tiered prior knowledge."""
from .dataprep import Dataset, preprocess, read_csv
from .errors import InputError, NumericalError, TcamError
from .graph_core import Dag, Ordering, PriorKnowledge
from .pipeline import DiscoveryResult, DiscoverySettings, discover

__version__ = "0.1.0"

__all__ = [
    "Dag",
    "Dataset",
    "DiscoveryResult",
    "DiscoverySettings",
    "InputError",
    "NumericalError",
    "Ordering",
    "PriorKnowledge",
    "TcamError",
    "discover",
    "preprocess",
    "read_csv",
]
