"""Numeric audits of the welfare-ordering guarantees.

Each audit evaluates both sides of one provable inequality or identity at
concrete inputs and reports the slack.  Together they cover: the bound of any
solved profile's classification score by the total divergence of its
best-prediction counterpart; the vanishing gap between leave-one-out and
population-average report distributions as the number of agents grows; the
quantitative welfare loss of signal strategies far from a permutation; and
the welfare-cycle identity behind the impossibility of rewarding truth-telling
strictly above all relabelings.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .divergence import hellinger
from .equilibrium import best_response, check_equilibrium, solved_profile
from .mechanism import MechanismConfig, welfare_metrics
from .priors import (
    PairwisePrior,
    PermutationMap,
    PriorError,
    permute_prior,
    prior_constants,
)
from .strategy import (
    StrategyProfile,
    aggregate_strategies,
    best_prediction_profile,
    candidate_profiles,
    permute_profile,
    symmetric_profile,
    tau_closeness,
    truth_telling_profile,
    validate_signal_strategy,
)

__all__ = [
    "AuditResult",
    "AuditError",
    "classification_bound_audit",
    "aggregation_error_audit",
    "far_from_permutation_gap",
    "relabeling_cycle_audit",
    "welfare_comparison",
    "WelfareRow",
    "SymmetricDynamics",
    "symmetric_fixed_points",
    "total_divergence_symmetric",
]


class AuditError(ValueError):
    """Raised when an audit's precondition fails."""


@dataclass(frozen=True)
class AuditResult:
    """One checked relation.  ``slack = rhs - lhs``; for inequality audits
    (lhs <= rhs) passing means slack >= -tolerance, for equality audits
    |slack| <= tolerance."""

    name: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    context: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "passed": self.passed,
            "context": dict(self.context),
        }


def classification_bound_audit(
    config: MechanismConfig,
    prior: PairwisePrior,
    profile: StrategyProfile,
    tol: float = 1e-10,
) -> AuditResult:
    """classification_score(s) <= total_divergence(s with best predictions).

    The bound is meaningful when the profile's predictions are best responses
    (solved); the audit runs regardless and records the equilibrium gap.  At
    equality the profile must be consistent (inconsistency 0) and already play
    best predictions on every realized report cell; both are reported.
    """
    breakdown = welfare_metrics(prior, profile)
    lhs = breakdown.classification_score
    bp = best_prediction_profile(profile, prior)
    rhs = welfare_metrics(prior, bp).total_divergence
    slack = rhs - lhs

    realized = profile.thetas.transpose(0, 2, 1)[..., None] > 0.0  # [i, s, r, 1]
    bp_distance = float(np.max(np.abs(profile.predictions - bp.predictions) * realized))
    eq_gap = check_equilibrium(config, prior, profile).max_gap
    equality = abs(slack) <= tol
    context = {
        "inconsistency": breakdown.inconsistency,
        "equilibrium_max_gap": eq_gap,
        "best_prediction_distance": bp_distance,
        "equality": equality,
        "equality_conditions_hold": bool(
            not equality or (breakdown.inconsistency <= tol and bp_distance <= 1e-6)
        ),
    }
    return AuditResult("classification-bound", lhs, rhs, slack, slack >= -tol, context)


def aggregation_error_audit(
    prior: PairwisePrior, theta_list: np.ndarray, eps: float
) -> AuditResult:
    """Max over agent pairs and signal pairs of the Hellinger-divergence error
    from replacing leave-one-out averages by the population average.

    Requires n > 32 m^2 / eps^2 agents, the threshold above which the error is
    provably below eps for every strategy list.
    """
    thetas = np.asarray(theta_list, dtype=float)
    n, m = thetas.shape[0], thetas.shape[1]
    needed = 32.0 * m * m / (eps * eps)
    if n <= needed:
        raise AuditError(
            f"need more than {needed:.0f} agents for eps={eps} (m={m}), got {n}"
        )
    theta_bar = thetas.mean(axis=0)
    theta_minus = (n * theta_bar[None] - thetas) / (n - 1)

    # rows of points: (agent j, signal s) -> theta_minus_j q_s
    points = np.einsum("juv,vs->jsu", theta_minus, prior.conditional).reshape(n * m, m)
    sq = np.sqrt(points)
    gram = sq @ sq.T
    norms = points.sum(axis=1)
    dists = norms[:, None] + norms[None, :] - 2.0 * gram  # D*(x_js, x_kt)

    ref_points = (theta_bar @ prior.conditional).T  # row s = theta_bar q_s
    ref = hellinger(ref_points[:, None, :], ref_points[None, :, :])  # (m, m)

    dev = np.abs(dists.reshape(n, m, n, m) - ref[None, :, None, :])
    dev[np.arange(n), :, np.arange(n), :] = 0.0  # the bound quantifies distinct agents
    lhs = float(np.max(dev))
    return AuditResult(
        "aggregation-error",
        lhs,
        eps,
        eps - lhs,
        lhs < eps,
        {"n": n, "m": m, "threshold": needed},
    )


def total_divergence_symmetric(prior: PairwisePrior, theta: np.ndarray) -> float:
    """Total divergence of the symmetric profile where everyone predicts
    theta q_s: sum over signal pairs of Pr(a, b) D*(theta q_a, theta q_b).
    Independent of the number of agents."""
    points = (np.asarray(theta, dtype=float) @ prior.conditional).T
    dmat = hellinger(points[:, None, :], points[None, :, :])
    return float(np.sum(prior.joint() * dmat))


def far_from_permutation_gap(
    prior: PairwisePrior, theta: np.ndarray, tau: float, tol: float = 1e-12
) -> AuditResult:
    """Welfare loss of signal strategies that are not tau-close to a
    permutation: total_divergence(truth) - total_divergence(s_theta) is at
    least c2 (tau c1)^3 c4 c3.

    ``s_theta`` is the symmetric profile whose agents play theta and predict
    theta q_s.  Errors if theta is tau-close (the bound is vacuous there).
    """
    theta = validate_signal_strategy(theta, tol=1e-9)
    if tau_closeness(theta) <= tau:
        raise AuditError(
            f"theta is tau-close at tau={tau} (second-largest row entries <= tau); "
            "the far-from-permutation bound does not apply"
        )
    consts = prior_constants(prior)
    lhs = consts.c2 * (tau * consts.c1) ** 3 * consts.c4 * consts.c3
    m = prior.m
    rhs = total_divergence_symmetric(prior, np.eye(m)) - total_divergence_symmetric(
        prior, theta
    )
    return AuditResult(
        "far-from-permutation",
        lhs,
        rhs,
        rhs - lhs,
        rhs >= lhs - tol,
        {"tau": tau, **consts.to_dict()},
    )


def relabeling_cycle_audit(
    prior: PairwisePrior,
    profile: StrategyProfile,
    perm: PermutationMap,
    tol: float = 1e-12,
) -> list[AuditResult]:
    """Welfare equalities along the relabeling cycle.

    With priors Q_k = perm^k(Q), the scenario (Q_{k+1}, s) is payoff-identical
    to (Q_k, perm(s)); average welfare therefore cannot strictly drop at every
    relabeling step, because after ord(perm) steps the starting scenario
    returns.  Each step's equality is checked exactly, plus the closure of the
    cycle.
    """
    if perm.is_identity:
        raise AuditError("the relabeling cycle needs a non-identity permutation")
    if perm.m != prior.m:
        raise PriorError(f"permutation on {perm.m} signals, prior has {prior.m}")

    permuted_profile = permute_profile(profile, perm)
    priors_k = [prior]
    for _ in range(perm.order):
        priors_k.append(permute_prior(priors_k[-1], perm))

    results = []
    aw_first = welfare_metrics(priors_k[0], profile).average_welfare
    for k in range(perm.order):
        lhs = welfare_metrics(priors_k[k + 1], profile).average_welfare
        rhs = welfare_metrics(priors_k[k], permuted_profile).average_welfare
        results.append(
            AuditResult(
                f"relabeling-step-{k}",
                lhs,
                rhs,
                rhs - lhs,
                abs(rhs - lhs) <= tol,
                {"k": k, "order": perm.order},
            )
        )
    aw_last = welfare_metrics(priors_k[perm.order], profile).average_welfare
    results.append(
        AuditResult(
            "relabeling-closure",
            aw_last,
            aw_first,
            aw_first - aw_last,
            abs(aw_first - aw_last) <= tol,
            {"order": perm.order},
        )
    )
    return results


@dataclass(frozen=True)
class SymmetricDynamics:
    """Outcome of best-response dynamics over deterministic symmetric signal
    maps: maps fixed under the best-response operator, and any cycles hit
    within the iteration cap (reported, not resolved)."""

    fixed_points: list[tuple[int, ...]]
    cycles: list[tuple[tuple[int, ...], ...]]


def _map_matrix(g: tuple[int, ...], m: int) -> np.ndarray:
    theta = np.zeros((m, m))
    theta[list(g), range(m)] = 1.0
    return theta


def symmetric_fixed_points(
    config: MechanismConfig,
    prior: PairwisePrior,
    n: int,
    max_iter: int = 200,
) -> SymmetricDynamics:
    """Best-response dynamics on the m^m deterministic symmetric signal maps.

    For each map, all agents play it with solved predictions; the
    best-response map sends each private signal to the optimal report.  The
    operator is deterministic, so trajectories either reach a fixed point or
    enter a cycle.
    """
    m = prior.m
    br_of: dict[tuple[int, ...], tuple[int, ...]] = {}
    for g in itertools.product(range(m), repeat=m):
        profile = solved_profile(config, prior, [_map_matrix(g, m)] * n)
        br_of[g] = tuple(
            best_response(config, prior, profile, 0, s).signal for s in range(m)
        )

    fixed = sorted(g for g, image in br_of.items() if image == g)
    cycles: set[tuple[tuple[int, ...], ...]] = set()
    for start in br_of:
        seen: dict[tuple[int, ...], int] = {}
        g = start
        for step in range(max_iter):
            if g in seen:
                cycle = tuple(list(seen)[seen[g] :])
                if len(cycle) > 1:
                    # canonical rotation so each cycle is reported once
                    k = cycle.index(min(cycle))
                    cycles.add(cycle[k:] + cycle[:k])
                break
            seen[g] = step
            g = br_of[g]
    return SymmetricDynamics(fixed, sorted(cycles))


@dataclass(frozen=True)
class WelfareRow:
    name: str
    classification_score: float
    equilibrium_max_gap: float
    theta_bar_tau_closeness: float
    margin_to_truth: float

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "classification_score": self.classification_score,
            "equilibrium_max_gap": self.equilibrium_max_gap,
            "theta_bar_tau_closeness": self.theta_bar_tau_closeness,
            "margin_to_truth": self.margin_to_truth,
        }


def welfare_comparison(
    config: MechanismConfig,
    prior: PairwisePrior,
    n: int,
    include_dynamics: bool = True,
) -> list[WelfareRow]:
    """Classification scores of the benchmark profiles, sorted best first.

    Covers truth-telling, every permutation profile, constant-report
    collusion, uniform reporting with solved predictions, the one-agent-per-
    signal counterexample when n = m, and (optionally) the fixed points of
    symmetric best-response dynamics with solved predictions.
    """
    config.warn_if_outside_regime(prior.m)
    profiles = dict(candidate_profiles(prior, n))
    uniform = profiles.pop("uniform")
    profiles["uniform"] = solved_profile(config, prior, uniform.thetas)
    if include_dynamics:
        dynamics = symmetric_fixed_points(config, prior, n)
        for g in dynamics.fixed_points:
            name = f"solved:{','.join(map(str, g))}"
            profiles.setdefault(
                name, solved_profile(config, prior, [_map_matrix(g, prior.m)] * n)
            )

    truth_score = welfare_metrics(prior, truth_telling_profile(prior, n)).classification_score
    rows = []
    for name, profile in profiles.items():
        score = welfare_metrics(prior, profile).classification_score
        gap = check_equilibrium(config, prior, profile).max_gap
        closeness = tau_closeness(aggregate_strategies(profile).theta_bar)
        rows.append(WelfareRow(name, score, gap, closeness, truth_score - score))
    rows.sort(key=lambda row: (-row.classification_score, row.name))
    return rows
