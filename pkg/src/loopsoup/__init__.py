"""Interacting random walk loop soups and the random path model."""

from .graphs import Graph, CycleList, build_named, build_torus, enumerate_cycles
from .weights import WeightFunction, make_weight, check_m_good, check_nice
from .loops import LoopClass, canonicalize, class_stats, enumerate_classes

__version__ = "0.1.0"

__all__ = [
    "Graph",
    "CycleList",
    "build_named",
    "build_torus",
    "enumerate_cycles",
    "WeightFunction",
    "make_weight",
    "check_m_good",
    "check_nice",
    "LoopClass",
    "canonicalize",
    "class_stats",
    "enumerate_classes",
]
