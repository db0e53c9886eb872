"""Contact process on finite d-ary trees: graphical construction, duality,
extinction-time estimators and the integer comparison chain."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConstructionError,
    DataError,
    DomainError,
    PreconditionError,
    SizeError,
    TreeCPError,
)
from .graph import GraphTopology, build_dary_tree, from_edges, path_graph
from .harris import HarrisSystem, evolve, sample_harris
from .forward import Trajectory, simulate_forward
from .params import Decomposition, ParameterSet, decompose
from .stats import EstimateReport

__all__ = [
    "ConfigError", "ConstructionError", "DataError", "DomainError", "PreconditionError",
    "SizeError", "TreeCPError", "GraphTopology", "build_dary_tree", "from_edges", "path_graph",
    "HarrisSystem", "evolve", "sample_harris", "Trajectory", "simulate_forward",
    "Decomposition", "ParameterSet", "decompose", "EstimateReport",
]
