"""Multi-objective route search over AND-OR synthesis graphs.

Returns a Pareto front of routes under user-defined additive objectives,
using weight scalarization with grid/Sobol/surrogate-guided sampling,
provably safe bound-based pruning, and a brute-force oracle for verifying
front optimality on bounded worlds.
"""

from .expansion import ExpansionProvider, ReactionRecord, SyntheticWorld, TemplateTableProvider, WorldSpec
from .graph import Route, RouteStep, SearchGraph, validate_route
from .objectives import (
    AgentTable,
    CostVector,
    MoleculeProperties,
    ObjectiveSet,
    standard_objectives,
)
from .search import ParetoArchive, SearchResult, run_search

__version__ = "0.1.0"

__all__ = [
    "AgentTable",
    "CostVector",
    "ExpansionProvider",
    "MoleculeProperties",
    "ObjectiveSet",
    "ParetoArchive",
    "ReactionRecord",
    "Route",
    "RouteStep",
    "SearchGraph",
    "SearchResult",
    "SyntheticWorld",
    "TemplateTableProvider",
    "WorldSpec",
    "run_search",
    "standard_objectives",
    "validate_route",
]
