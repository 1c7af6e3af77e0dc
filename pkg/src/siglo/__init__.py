"""Signed-measure facility location: k-point solvers, ball-complement regions and limit densities."""

__version__ = "0.1.0"

from .geometry import BallComplementRegion, PointConfig
from .measure import Atom, GriddedDensity, MeasureComponent, SignedMeasure
from .objective import eval_F, eval_F_region
from .solve_k import SolverConfig, brute_force, local_search

__all__ = [
    "Atom",
    "BallComplementRegion",
    "GriddedDensity",
    "MeasureComponent",
    "PointConfig",
    "SignedMeasure",
    "SolverConfig",
    "brute_force",
    "eval_F",
    "eval_F_region",
    "local_search",
]
