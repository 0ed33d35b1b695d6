"""rangelab: simulation and exact-computation lab for the range of lattice
random walks and its inner boundary."""

from .engine import BracketEstimate, SummaryStats, run_replicates
from .errors import BudgetExceededError, InvalidDistributionError
from .lattice import (Point, SeedSpec, StepDistribution, WalkPath, generate_walk,
                      iter_increments, neighbors, origin, validate_support,
                      walk_positions)
from .oracle import (ExactPMF, exact_distribution, exact_event_probability,
                     shifted_tail_check)
from .tracker import (PatternSpec, RangeStats, RangeTracker, pattern_count,
                      recompute_from_scratch)

__version__ = "0.1.0"

__all__ = [
    "BracketEstimate", "BudgetExceededError", "ExactPMF",
    "InvalidDistributionError", "PatternSpec", "Point", "RangeStats",
    "RangeTracker", "SeedSpec", "StepDistribution", "WalkPath",
    "exact_distribution", "exact_event_probability", "generate_walk",
    "iter_increments", "neighbors", "origin", "pattern_count",
    "recompute_from_scratch", "run_replicates", "shifted_tail_check",
    "validate_support",
    "walk_positions", "__version__",
]
