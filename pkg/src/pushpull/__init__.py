"""Partition-constrained allocation with agency metrics.

A platform ranks a fixed catalog subject to a partition constraint: blocks
of objects may be reordered, but each block's internal order is fixed. The
platform optimizes a weighted blend of the agent's and the advocate's
expected value under a positional discount curve. This package provides
exact and heuristic solvers for that problem, pull/push agency metrics and
their frontier across the blend weight, seeded scenario generators, and
stable file formats for instances, logs, and reports.
"""

from .core import (
    PROB_TOL,
    Allocation,
    Catalog,
    DiscountCurve,
    Instance,
    Partition,
    TypeSpace,
    UtilityTable,
    ValidationError,
    allocation_value,
    build_allocation,
    enumerate_allocations,
    identity_allocation,
    is_refinement,
    is_strict_refinement,
    make_discount,
    refine_partition,
    singletonize,
    validate_instance,
)
from .inference import (
    PosteriorModel,
    SignalChannel,
    expected_scores,
    garble,
    posterior,
    prior_posterior,
    signal_marginal,
)
from .metrics import (
    AgencyMetrics,
    Frontier,
    GroupGap,
    GroupSummary,
    MetricStats,
    NoisePoint,
    PopulationSummary,
    RefineComparison,
    RefinePoint,
    agency_metrics,
    aggregate,
    critical_lambda,
    frontier,
    lambda_grid,
    noise_sweep,
    refine_compare,
)
from .scenarios import (
    KINDS,
    PRESETS,
    ScenarioSpec,
    gen_aligned,
    gen_antialigned,
    gen_orthogonal,
    gen_random,
    generate,
)
from .solver import (
    BRUTE_FORCE_LIMIT,
    DP_SUBSET_LIMIT,
    STRATEGIES,
    TIE_TOL,
    SolveRequest,
    SolveResult,
    SolverContractError,
    brute_force_oracle,
    combined_scores,
    solve,
    solve_geometric_index,
    solve_grid,
    solve_local_search,
    solve_singletons,
    solve_subset_dp,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "PROB_TOL",
    "TIE_TOL",
    "BRUTE_FORCE_LIMIT",
    "DP_SUBSET_LIMIT",
    "STRATEGIES",
    "KINDS",
    "PRESETS",
    "ValidationError",
    "SolverContractError",
    "Catalog",
    "Partition",
    "DiscountCurve",
    "TypeSpace",
    "UtilityTable",
    "Instance",
    "Allocation",
    "SignalChannel",
    "PosteriorModel",
    "ScenarioSpec",
    "SolveRequest",
    "SolveResult",
    "AgencyMetrics",
    "Frontier",
    "MetricStats",
    "GroupSummary",
    "GroupGap",
    "PopulationSummary",
    "NoisePoint",
    "RefinePoint",
    "RefineComparison",
    "make_discount",
    "allocation_value",
    "build_allocation",
    "identity_allocation",
    "enumerate_allocations",
    "refine_partition",
    "singletonize",
    "is_refinement",
    "is_strict_refinement",
    "validate_instance",
    "posterior",
    "prior_posterior",
    "expected_scores",
    "garble",
    "signal_marginal",
    "combined_scores",
    "solve",
    "solve_grid",
    "solve_singletons",
    "solve_subset_dp",
    "solve_geometric_index",
    "solve_local_search",
    "brute_force_oracle",
    "agency_metrics",
    "frontier",
    "lambda_grid",
    "critical_lambda",
    "aggregate",
    "noise_sweep",
    "refine_compare",
    "generate",
    "gen_aligned",
    "gen_antialigned",
    "gen_orthogonal",
    "gen_random",
]
