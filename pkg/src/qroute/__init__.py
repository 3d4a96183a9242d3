"""Two-queue decentralized routing laboratory.

Simulates a pair of service stations whose controllers each see only their
own queue and signal through routing actions, tracks the resulting common
information (beliefs, support bounds, thresholds), evaluates finite-horizon
costs exactly, solves the long-run average cost, and property-checks the
balancing and dominance behavior of the threshold policy.
"""

from .belief import (
    CommonInfo,
    SupportBounds,
    condition_on_action,
    propagate_arrivals_departures,
    shift_by_routing,
    support_bounds,
    threshold,
    update_bounds_lemma1,
)
from .costs import CostModel, parse_cost
from .coupling import CoupledState, couple_step, verify_cost_dominance, verify_distribution_match
from .exact import (
    ExactEvalConfig,
    centralized_dp,
    exact_finite_cost,
    verify_dominance_smallcase,
)
from .harness import (
    ExperimentConfig,
    RunSummary,
    TraceRecord,
    assert_s_identity,
    measure_t0,
    run_experiment,
    run_replication,
)
from .model import (
    Convention,
    ModelParams,
    Primitives,
    SystemState,
    apply_routing,
    sample_primitives,
    stage_cost,
    step_queue,
)
from .pmf import Pmf
from .policies import advance_common_info, g0_decide, get_policy, ghat_decide, gtilde_decide
from .steady import (
    ChainSpec,
    build_g0_chain,
    build_s_chain,
    infinite_cost_g0,
    infinite_cost_ghat,
    stationary_distribution,
)

__version__ = "0.1.0"
