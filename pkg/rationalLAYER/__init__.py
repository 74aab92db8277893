"""
可理性化层，包含下界过程、边际行动结构分析与报告。
"""

from .procedure import (
    BoundsVector,
    MonotonicityError,
    ProcedureTrace,
    check_distribution,
    qre_pushforward_witness,
    rationalizable_interval,
    run_procedure,
    step_bounds,
    worst_case_threshold,
)
from .structure import (
    MarginalGraph,
    c2_impossibility_check,
    classify,
    condition_c2,
    condition_c2_prime,
    limit_threshold,
    marginal_graph,
    mutual_fulfillment_profile,
    phi,
    reachable_set,
    tightness_report,
)

__all__ = [
    "BoundsVector",
    "MarginalGraph",
    "MonotonicityError",
    "ProcedureTrace",
    "c2_impossibility_check",
    "check_distribution",
    "classify",
    "condition_c2",
    "condition_c2_prime",
    "limit_threshold",
    "marginal_graph",
    "mutual_fulfillment_profile",
    "phi",
    "qre_pushforward_witness",
    "rationalizable_interval",
    "reachable_set",
    "run_procedure",
    "step_bounds",
    "tightness_report",
    "worst_case_threshold",
]
