"""Exact expected payoffs, best responses, and equilibrium checking.

All computations here cover the action-relevant payment terms: the proper
score of one's prediction against a random peer's reported signal plus the
agreement penalty against that peer's prediction.  The classification reward
and the zero-sum cross-group subtraction never depend on the acting agent's
own report, so equilibrium gaps are identical across the two mechanism
variants; full payments including those terms live in
:func:`peerpred.mechanism.monte_carlo_payments` and
:func:`peerpred.mechanism.realized_payments`.

Conditional on private signal s and a report (r, p), the expected payment is

    alpha * PS(theta_minus_i q_s, p)
    + beta * sum_{j != i} 1/(n-1) sum_{s'} q(s'|s) theta_j[r, s']
        * (PS(P_j[s', r], p) - PS(P_j[s', r], P_j[s', r]))

and because proper scores are linear in their first argument, the optimal
prediction for a fixed report r is the weight-normalized mixture of the
prediction-score target theta_minus_i q_s and the matching neighbors'
predictions.  At equilibrium the predictions therefore solve a linear fixed
point, which :func:`solve_equilibrium_predictions` iterates to convergence
(the map is a strict contraction for alpha > 0) and
:func:`solve_equilibrium_predictions_direct` solves densely for cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mechanism import MechanismConfig, MechanismError, Report
from .priors import PairwisePrior
from .strategy import StrategyProfile, aggregate_strategies

__all__ = [
    "BestResponse",
    "EquilibriumReport",
    "expected_conditional_payoff",
    "best_response",
    "check_equilibrium",
    "solve_equilibrium_predictions",
    "solve_equilibrium_predictions_direct",
    "solved_profile",
]

TIE_TOL = 1e-12


@dataclass(frozen=True)
class _ActionTerms:
    """Per-report quantities entering agent i's conditional payoff at signal s."""

    anchor: np.ndarray        # theta_minus_i q_s, shape (m,)
    neighbor_weight: np.ndarray    # total matching-neighbor weight per report, (m,)
    neighbor_mix: np.ndarray       # weighted sum of neighbors' predictions, (m, m)
    neighbor_self_score: np.ndarray  # weighted sum of neighbors' self-scores, (m,)


def _action_terms(
    config: MechanismConfig, prior: PairwisePrior, profile: StrategyProfile, i: int, s: int
) -> _ActionTerms:
    n = profile.n
    agg = aggregate_strategies(profile)
    anchor = agg.theta_minus[i] @ prior.q_sigma(s)

    rule = config.scoring_rule()
    self_scores = rule.self_score(profile.predictions)  # (n, m, m)

    q_cond = prior.q_sigma(s)  # q(s'|s)
    others = [j for j in range(profile.n) if j != i]
    th = profile.thetas[others]            # (n-1, m, m) indexed [j, r, s']
    preds = profile.predictions[others]    # (n-1, s', r, m)
    ss = self_scores[others]               # (n-1, s', r)

    # w[j, r, s'] = q(s'|s) * theta_j[r, s'] / (n - 1)
    w = q_cond[None, None, :] * th / (n - 1)
    neighbor_weight = w.sum(axis=(0, 2))                        # (m,)
    neighbor_mix = np.einsum("jrv,jvru->ru", w, preds)          # (m, m)
    neighbor_self = np.einsum("jrv,jvr->r", w, ss)              # (m,)
    return _ActionTerms(anchor, neighbor_weight, neighbor_mix, neighbor_self)


def _report_value(config: MechanismConfig, terms: _ActionTerms, r: int, prediction) -> float:
    rule = config.scoring_rule()
    prediction = np.asarray(prediction, dtype=float)
    value = config.alpha * float(rule.weighted_score(terms.anchor, prediction))
    value += config.beta * (
        float(rule.weighted_score(terms.neighbor_mix[r], prediction))
        - float(terms.neighbor_self_score[r])
    )
    return value


def expected_conditional_payoff(
    config: MechanismConfig,
    prior: PairwisePrior,
    profile: StrategyProfile,
    i: int,
    s: int,
    deviation: Report | Sequence[tuple[float, Report]] | None = None,
) -> float:
    """Expected action-relevant payment of agent i conditional on signal s.

    Without a deviation the profile's own play is evaluated: the signal
    strategy's mixture over reports, each with its table prediction.  A
    deviation replaces agent i's play at s by a single report or a weighted
    mixture of reports.
    """
    terms = _action_terms(config, prior, profile, i, s)
    if deviation is None:
        weights = profile.thetas[i][:, s]
        plays = [(weights[r], r, profile.predictions[i, s, r]) for r in range(profile.m)]
    elif isinstance(deviation, Report):
        plays = [(1.0, deviation.signal, deviation.prediction)]
    else:
        plays = [(w, rep.signal, rep.prediction) for w, rep in deviation]
    return sum(w * _report_value(config, terms, r, p) for w, r, p in plays if w > 0.0)


@dataclass(frozen=True)
class BestResponse:
    """Optimal report at one (agent, signal): the report index, its closed-form
    optimal prediction, the achieved value, per-report optimal values, and
    whether the leading reports tie within tolerance (lowest index wins)."""

    signal: int
    prediction: np.ndarray
    value: float
    report_values: np.ndarray
    tied: bool


def best_response(
    config: MechanismConfig,
    prior: PairwisePrior,
    profile: StrategyProfile,
    i: int,
    s: int,
) -> BestResponse:
    """Closed-form best response of agent i at private signal s.

    For each candidate report the optimal prediction is the mixture
    (alpha * anchor + beta * neighbor_mix) / (alpha + beta * neighbor_weight);
    the best report maximizes the resulting value, lowest index on ties.
    """
    terms = _action_terms(config, prior, profile, i, s)
    m = profile.m
    values = np.empty(m)
    preds = np.empty((m, m))
    for r in range(m):
        pred = (config.alpha * terms.anchor + config.beta * terms.neighbor_mix[r]) / (
            config.alpha + config.beta * terms.neighbor_weight[r]
        )
        preds[r] = pred
        values[r] = _report_value(config, terms, r, pred)
    best = int(np.argmax(values))
    tied = bool(np.sum(values >= values[best] - TIE_TOL) > 1)
    return BestResponse(best, preds[best], float(values[best]), values, tied)


@dataclass(frozen=True)
class EquilibriumReport:
    """Per-(agent, signal) improvement gaps: best-response value minus the
    value of the profile's prescribed play.  Payoffs are linear in the agent's
    report distribution, so the maximum over mixed deviations is attained at a
    pure report with its closed-form prediction."""

    gaps: np.ndarray
    eps: float

    @property
    def max_gap(self) -> float:
        return float(np.max(self.gaps))

    @property
    def is_eps_equilibrium(self) -> bool:
        return self.max_gap <= self.eps

    def to_rows(self) -> list[dict]:
        n, m = self.gaps.shape
        return [
            {"agent": i, "signal": s, "gap": float(self.gaps[i, s])}
            for i in range(n)
            for s in range(m)
        ]


def check_equilibrium(
    config: MechanismConfig,
    prior: PairwisePrior,
    profile: StrategyProfile,
    eps: float = 1e-9,
) -> EquilibriumReport:
    gaps = np.empty((profile.n, profile.m))
    for i in range(profile.n):
        for s in range(profile.m):
            br = best_response(config, prior, profile, i, s)
            prescribed = expected_conditional_payoff(config, prior, profile, i, s)
            gaps[i, s] = br.value - prescribed
    return EquilibriumReport(gaps, eps)


def _prediction_anchors(prior: PairwisePrior, thetas: np.ndarray) -> np.ndarray:
    n = thetas.shape[0]
    theta_bar = thetas.mean(axis=0)
    theta_minus = (n * theta_bar[None] - thetas) / (n - 1)
    return np.einsum("iuv,vs->isu", theta_minus, prior.conditional)


def solve_equilibrium_predictions(
    config: MechanismConfig,
    prior: PairwisePrior,
    thetas: np.ndarray | Sequence[np.ndarray],
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> tuple[np.ndarray, float]:
    """Solve the equilibrium prediction tables for fixed signal strategies.

    Iterates the best-response mixture map until the sup-norm update falls
    below ``tol``.  The map contracts with modulus at most
    beta W / (alpha + beta W) < 1, so plain iteration converges for any
    alpha > 0.  With beta = 0 the anchors are returned unchanged (exact).
    Returns (predictions with shape (n, m, m, m), last sup-norm update).
    """
    thetas = np.asarray(thetas, dtype=float)
    n, m = thetas.shape[0], thetas.shape[1]
    alpha, beta = config.alpha, config.beta
    cond = prior.conditional
    anchors = _prediction_anchors(prior, thetas)  # (n, s, u)
    base = np.broadcast_to(anchors[:, :, None, :], (n, m, m, m)).copy()
    if beta == 0.0:
        return base, 0.0

    # weight[j, s, r] = sum_v q(v|s) theta_j[r, v]; leave-one-out via totals
    w_per_agent = np.einsum("vs,jrv->jsr", cond, thetas)
    w_total = w_per_agent.sum(axis=0)
    neighbor_w = (w_total[None] - w_per_agent) / (n - 1)  # (i, s, r)
    denom = (alpha + beta * neighbor_w)[..., None]

    x = base
    for _ in range(max_iter):
        y = np.einsum("vs,jrv,jvru->jsru", cond, thetas, x)
        y_total = y.sum(axis=0)
        neighbor_mix = (y_total[None] - y) / (n - 1)
        x_new = (alpha * base + beta * neighbor_mix) / denom
        delta = float(np.max(np.abs(x_new - x)))
        x = x_new
        if delta < tol:
            return x, delta
    raise MechanismError(
        f"prediction fixed point did not reach {tol:g} within {max_iter} iterations"
    )


def solved_profile(
    config: MechanismConfig,
    prior: PairwisePrior,
    thetas: np.ndarray | Sequence[np.ndarray],
    tol: float = 1e-12,
) -> StrategyProfile:
    """Profile with the given signal strategies and solved prediction tables."""
    thetas = np.asarray(thetas, dtype=float)
    predictions, _ = solve_equilibrium_predictions(config, prior, thetas, tol=tol)
    return StrategyProfile(thetas.copy(), predictions)


def solve_equilibrium_predictions_direct(
    config: MechanismConfig,
    prior: PairwisePrior,
    thetas: np.ndarray | Sequence[np.ndarray],
) -> np.ndarray:
    """Dense linear solve of the same prediction system, one (report,
    coordinate) block at a time; cross-check for the iterative path."""
    thetas = np.asarray(thetas, dtype=float)
    n, m = thetas.shape[0], thetas.shape[1]
    alpha, beta = config.alpha, config.beta
    cond = prior.conditional
    anchors = _prediction_anchors(prior, thetas)
    if beta == 0.0:
        return np.broadcast_to(anchors[:, :, None, :], (n, m, m, m)).copy()

    w_per_agent = np.einsum("vs,jrv->jsr", cond, thetas)
    w_total = w_per_agent.sum(axis=0)
    neighbor_w = (w_total[None] - w_per_agent) / (n - 1)

    out = np.empty((n, m, m, m))
    dim = n * m
    for r in range(m):
        # coupling[(i, s), (j, v)] = q(v|s) theta_j[r, v] for j != i
        coup = np.zeros((dim, dim))
        for i in range(n):
            for j in range(n):
                if j == i:
                    continue
                block = cond.T * thetas[j, r][None, :]  # [s, v]
                coup[i * m : (i + 1) * m, j * m : (j + 1) * m] = block
        lhs = np.diag((alpha + beta * neighbor_w[:, :, r]).reshape(dim)) - (
            beta / (n - 1)
        ) * coup
        for u in range(m):
            rhs = alpha * anchors[:, :, u].reshape(dim)
            out[:, :, r, u] = np.linalg.solve(lhs, rhs).reshape(n, m)
    return out
