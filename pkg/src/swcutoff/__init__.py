"""Swendsen-Wang dynamics, grand coupling and information percolation on tori."""

__version__ = "0.1.0"

from swcutoff.lattice import Graph, TorusLattice, build_torus, box, linf_distance, neighbors
from swcutoff.measures import FiniteDist, ModelParams

__all__ = [
    "FiniteDist",
    "Graph",
    "ModelParams",
    "TorusLattice",
    "__version__",
    "box",
    "build_torus",
    "linf_distance",
    "neighbors",
]
