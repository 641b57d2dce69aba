"""rebuskit: rebus puzzle generation, benchmark assembly, and evaluation."""

from .graph import NodeAttributes, RebusEdge, RebusGraph, RebusNode
from .parser import parse_compound, parse_phrase
from .taxonomy import Taxonomy, default_taxonomy, load_taxonomy

__version__ = "0.1.0"

__all__ = [
    "NodeAttributes",
    "RebusEdge",
    "RebusGraph",
    "RebusNode",
    "Taxonomy",
    "default_taxonomy",
    "load_taxonomy",
    "parse_compound",
    "parse_phrase",
    "__version__",
]
