"""Peer-prediction mechanisms over explicit common priors.

Implements signal elicitation without verification: a truthful base mechanism
(proper prediction score plus an agreement penalty) and its disagreement
variant (zero-sum group payments plus a Hellinger classification reward),
with exact expected payments, closed-form best responses, equilibrium
prediction solving, welfare decomposition into diversity and inconsistency,
and numeric audits of the welfare-ordering guarantees.
"""

from .divergence import (
    HELLINGER,
    KL,
    ConvexGenerator,
    DivergenceDomainError,
    convex_gap_lower_bound,
    f_divergence,
    hellinger,
    monotonicity_strict_predicate,
)
from .equilibrium import (
    BestResponse,
    EquilibriumReport,
    best_response,
    check_equilibrium,
    expected_conditional_payoff,
    solve_equilibrium_predictions,
    solve_equilibrium_predictions_direct,
    solved_profile,
)
from .mechanism import (
    Matching,
    MechanismConfig,
    MechanismError,
    MonteCarloPayments,
    Report,
    WelfareBreakdown,
    classification_pair_score,
    monte_carlo_payments,
    pair_scores,
    pairwise_payment,
    realized_payments,
    welfare_metrics,
    zero_sum_group_scores,
)
from .priors import (
    AssumptionReport,
    LatentStatePrior,
    PairwisePrior,
    PermutationMap,
    PriorConstants,
    PriorError,
    SignalSpace,
    TheoremBounds,
    all_permutations,
    build_pairwise_prior,
    from_latent,
    permute_prior,
    prior_constants,
    random_snife_prior,
    theorem_bounds,
    validate_snife,
)
from .scoring import ProperScoringRule, ScoreDomainError, get_rule
from .strategy import (
    AggregateStrategies,
    ProfileError,
    StrategyProfile,
    aggregate_strategies,
    best_prediction_profile,
    candidate_profiles,
    constant_report_profile,
    counterexample_profile,
    matrix_classify,
    permutation_profile,
    permute_profile,
    random_signal_strategy,
    symmetric_profile,
    symmetrized_best_prediction,
    tau_closeness,
    truth_telling_profile,
    uniform_report_profile,
)

__version__ = "0.1.0"
