"""Payment rules and welfare accounting.

Two variants share one report format (a signal plus a prediction):

* ``truthful`` -- each agent is matched with one random peer and paid
  ``alpha * score_P + beta * score_I``, where score_P is a proper score of the
  prediction against the peer's reported signal and score_I penalizes, only on
  matching reported signals, the score shortfall of one's prediction against
  the peer's own prediction (always <= 0, and 0 exactly at agreement).

* ``disagreement`` -- the agents are split into two groups; within each group
  the truthful payments are computed against an in-group peer and the other
  group's average payment is subtracted, so base payments sum to zero across
  agents in every realized round.  On top, every agent observes two random
  other agents j, k and collects a classification reward: the Hellinger
  divergence of their predictions when their reported signals differ, minus
  the Hellinger distance when they coincide.

The zero-sum-plus-classification construction is generic: it upgrades any
decomposable pairwise payment, not just the truthful one, which is what
:func:`zero_sum_group_scores` together with :func:`classification_pair_score`
expresses.

Average per-agent welfare of the disagreement variant equals the
classification score Diversity - Inconsistency; :func:`welfare_metrics`
computes the exact finite sums over agent pairs, private-signal pairs, and
report pairs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .divergence import hellinger
from .priors import LatentStatePrior, PairwisePrior
from .scoring import ProperScoringRule, get_rule
from .strategy import StrategyProfile

__all__ = [
    "MechanismConfig",
    "Report",
    "Matching",
    "WelfareBreakdown",
    "MonteCarloPayments",
    "MechanismError",
    "pair_scores",
    "pairwise_payment",
    "classification_pair_score",
    "zero_sum_group_scores",
    "realized_payments",
    "welfare_metrics",
    "monte_carlo_payments",
]


class MechanismError(ValueError):
    """Raised for invalid mechanism configuration or matchings."""


@dataclass(frozen=True)
class MechanismConfig:
    """Parameters of the payment rule.

    ``group_a`` fixes the first group for the disagreement variant; when
    omitted the first half of the agents (by index) is used.  The welfare
    ordering guarantees need beta/alpha < 1/(4m); :meth:`regime_ok` checks it
    and welfare audits warn when it fails.  Truthfulness itself holds for any
    positive alpha, beta.
    """

    alpha: float = 1.0
    beta: float = 0.05
    rule: str = "log"
    variant: str = "truthful"
    group_a: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.alpha <= 0 or self.beta < 0:
            raise MechanismError(f"need alpha > 0 and beta >= 0, got {self.alpha}, {self.beta}")
        if self.variant not in ("truthful", "disagreement"):
            raise MechanismError(f"unknown variant {self.variant!r}")
        get_rule(self.rule)
        if self.group_a is not None:
            object.__setattr__(self, "group_a", tuple(int(i) for i in self.group_a))

    def scoring_rule(self) -> ProperScoringRule:
        return get_rule(self.rule)

    def regime_ok(self, m: int) -> bool:
        return self.beta / self.alpha < 1.0 / (4.0 * m)

    def warn_if_outside_regime(self, m: int):
        if not self.regime_ok(m):
            warnings.warn(
                f"beta/alpha = {self.beta / self.alpha:.4g} >= 1/(4m) = {1.0 / (4 * m):.4g}; "
                "the welfare-ordering guarantees need the agreement penalty kept small "
                "relative to the prediction score and may fail in this regime",
                stacklevel=2,
            )

    def groups(self, n: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        if self.group_a is None:
            a = tuple(range(n // 2))
        else:
            a = self.group_a
            if any(i < 0 or i >= n for i in a):
                raise MechanismError(f"group indices out of range for n={n}: {a}")
        b = tuple(i for i in range(n) if i not in set(a))
        if len(a) < 2 or len(b) < 2:
            raise MechanismError(
                f"the zero-sum split needs two agents per group (every agent needs an "
                f"in-group peer), got sizes {len(a)} and {len(b)}"
            )
        return a, b

    def to_dict(self) -> dict:
        out = {"alpha": self.alpha, "beta": self.beta, "rule": self.rule, "variant": self.variant}
        if self.group_a is not None:
            out["groupA"] = list(self.group_a)
        return out


@dataclass(frozen=True)
class Report:
    """A reported signal index together with a reported prediction."""

    signal: int
    prediction: np.ndarray

    def __post_init__(self):
        prediction = np.asarray(self.prediction, dtype=float)
        object.__setattr__(self, "prediction", prediction)
        if prediction.ndim != 1 or abs(prediction.sum() - 1.0) > 1e-9 or np.any(prediction < 0):
            raise MechanismError("a report's prediction must be a probability vector")
        if not 0 <= self.signal < prediction.size:
            raise MechanismError(f"signal index {self.signal} out of range")


@dataclass(frozen=True)
class Matching:
    """Realized matchings: ``peers[i]`` is the agent whose report scores agent
    i's base payment; ``pairs[i]`` is the ordered pair (j, k) whose reports set
    agent i's classification reward (disagreement variant only)."""

    peers: np.ndarray
    pairs: np.ndarray | None = None

    def __post_init__(self):
        peers = np.asarray(self.peers, dtype=int)
        object.__setattr__(self, "peers", peers)
        if self.pairs is not None:
            object.__setattr__(self, "pairs", np.asarray(self.pairs, dtype=int))


def pair_scores(config: MechanismConfig, r_i: Report, r_j: Report) -> tuple[float, float]:
    """(score_P, score_I) for agent i matched with agent j.

    score_P = PS(sigma_hat_j, p_hat_i).  score_I is 0 on differing reported
    signals; otherwise -(PS(p_j, p_j) - PS(p_j, p_i)), which is <= 0 with
    equality iff the predictions coincide.
    """
    rule = config.scoring_rule()
    score_p = rule.point_score(r_j.signal, r_i.prediction)
    if r_i.signal != r_j.signal:
        score_i = 0.0
    else:
        score_i = rule.expected_score(r_j.prediction, r_i.prediction) - rule.expected_score(
            r_j.prediction, r_j.prediction
        )
    return score_p, score_i


def pairwise_payment(config: MechanismConfig, r_i: Report, r_j: Report) -> float:
    score_p, score_i = pair_scores(config, r_i, r_j)
    return config.alpha * score_p + config.beta * score_i


def classification_pair_score(r_j: Report, r_k: Report) -> float:
    """Hellinger divergence of the two predictions on differing reported
    signals; minus the Hellinger distance on matching ones."""
    d = float(hellinger(r_j.prediction, r_k.prediction))
    if r_j.signal != r_k.signal:
        return d
    return -math.sqrt(d)


def zero_sum_group_scores(
    base_payments: Sequence[float] | np.ndarray,
    group_a: Sequence[int],
    group_b: Sequence[int],
) -> np.ndarray:
    """Subtract the other group's payments, split evenly over one's own group.

    Generic over how the base payments were produced; the result sums to zero
    across all agents up to float rounding of the group averages.
    """
    base = np.asarray(base_payments, dtype=float)
    out = np.empty_like(base)
    sum_a = math.fsum(base[list(group_a)])
    sum_b = math.fsum(base[list(group_b)])
    out[list(group_a)] = base[list(group_a)] - sum_b / len(group_a)
    out[list(group_b)] = base[list(group_b)] - sum_a / len(group_b)
    return out


def realized_payments(
    config: MechanismConfig, reports: Sequence[Report], matching: Matching
) -> np.ndarray:
    """Payments of one realized round.

    Truthful variant: alpha * score_P + beta * score_I against the matched
    peer.  Disagreement variant: the zero-sum group score on the in-group base
    payments plus the classification reward of the matched pair.
    """
    n = len(reports)
    peers = matching.peers
    if peers.shape != (n,):
        raise MechanismError(f"need one peer per agent, got shape {peers.shape}")
    if np.any(peers == np.arange(n)) or np.any(peers < 0) or np.any(peers >= n):
        raise MechanismError("peers must be valid agent indices distinct from self")

    if config.variant == "truthful":
        return np.array(
            [pairwise_payment(config, reports[i], reports[peers[i]]) for i in range(n)]
        )

    group_a, group_b = config.groups(n)
    in_a = np.zeros(n, dtype=bool)
    in_a[list(group_a)] = True
    for i in range(n):
        if in_a[i] != in_a[peers[i]]:
            raise MechanismError(f"agent {i}'s base-payment peer {peers[i]} is in the other group")
    if matching.pairs is None:
        raise MechanismError("disagreement variant needs a (j, k) pair per agent")
    pairs = matching.pairs
    if pairs.shape != (n, 2):
        raise MechanismError(f"pairs must have shape ({n}, 2), got {pairs.shape}")
    base = np.array([pairwise_payment(config, reports[i], reports[peers[i]]) for i in range(n)])
    payments = zero_sum_group_scores(base, group_a, group_b)
    for i in range(n):
        j, k = pairs[i]
        if len({int(j), int(k), i}) != 3 or not (0 <= j < n and 0 <= k < n):
            raise MechanismError(f"agent {i}'s pair {j, k} must be two distinct other agents")
        payments[i] += classification_pair_score(reports[j], reports[k])
    return payments


@dataclass(frozen=True)
class WelfareBreakdown:
    """Exact welfare decomposition of a profile under a prior.

    classification_score = diversity - inconsistency holds by construction;
    total_divergence >= diversity with equality exactly when inconsistency is
    zero; average_welfare is the disagreement variant's expected per-agent
    payment, which equals the classification score.
    """

    diversity: float
    inconsistency: float
    total_divergence: float
    classification_score: float
    average_welfare: float

    def to_dict(self) -> dict:
        return {
            "diversity": self.diversity,
            "inconsistency": self.inconsistency,
            "total_divergence": self.total_divergence,
            "classification_score": self.classification_score,
            "average_welfare": self.average_welfare,
        }


def welfare_metrics(prior: PairwisePrior, profile: StrategyProfile) -> WelfareBreakdown:
    """Diversity, inconsistency, total divergence, classification score.

    Sums over ordered agent pairs j != k with weight 1/(n(n-1)), private
    signals weighted by the pairwise joint, and reports weighted by the two
    signal strategies.  Diversity keeps report-differing pairs (Hellinger
    divergence), inconsistency keeps report-matching pairs (Hellinger
    distance), total divergence drops the indicator.
    """
    n, m = profile.n, profile.m
    joint = prior.joint()  # joint[a, b] = Pr(one agent a, another b)

    # flatten (agent, private, report) into one axis x
    t_flat = profile.thetas.transpose(0, 2, 1).reshape(n * m * m)  # theta[j, r, a] -> [j, a, r]
    pred_flat = profile.predictions.reshape(n * m * m, m)
    agent_ix, sig_ix, rep_ix = np.unravel_index(np.arange(n * m * m), (n, m, m))
    sq = np.sqrt(pred_flat)

    # pairwise block accumulation keeps memory linear in the block size
    size = n * m * m
    block = max(1, min(size, 2**22 // (size * m)))
    diversity = inconsistency = total = 0.0
    for lo in range(0, size, block):
        hi = min(lo + block, size)
        weight = (
            t_flat[lo:hi, None]
            * t_flat[None, :]
            * joint[sig_ix[lo:hi, None], sig_ix[None, :]]
            * (agent_ix[lo:hi, None] != agent_ix[None, :])
        ) / (n * (n - 1))
        diff = sq[lo:hi, None, :] - sq[None, :, :]
        dstar = np.sum(diff * diff, axis=-1)
        same_report = rep_ix[lo:hi, None] == rep_ix[None, :]
        diversity += float(np.sum(weight * dstar * ~same_report))
        inconsistency += float(np.sum(weight * np.sqrt(dstar) * same_report))
        total += float(np.sum(weight * dstar))

    classification = diversity - inconsistency
    return WelfareBreakdown(diversity, inconsistency, total, classification, classification)


@dataclass(frozen=True)
class MonteCarloPayments:
    """Per-agent sampled mean payments with standard errors, plus the sampled
    average welfare (mean over agents of a round's payments)."""

    mean: np.ndarray
    stderr: np.ndarray
    welfare_mean: float
    welfare_stderr: float
    trials: int

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "stderr": self.stderr.tolist(),
            "welfare_mean": self.welfare_mean,
            "welfare_stderr": self.welfare_stderr,
            "trials": self.trials,
        }


def _sample_categorical(cum_cols: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Index of the first cumulative weight exceeding u; cum_cols is (k, m)."""
    idx = (u[:, None] >= cum_cols).sum(axis=1)
    return np.minimum(idx, cum_cols.shape[1] - 1)


def _weighted_first_arg_scores(rule_id, pred_first, pred_second):
    """Vectorized PS(row of pred_first, row of pred_second) over (k, m) arrays."""
    rule = get_rule(rule_id)
    if rule_id == "log":
        good = pred_second > 0.0
        if np.any((pred_first > 0.0) & ~good):
            raise MechanismError(
                "log rule hit a zero-probability prediction with positive weight"
            )
        logs = np.log(np.where(good, pred_second, 1.0))
        return np.sum(np.where(pred_first > 0.0, pred_first * logs, 0.0), axis=1)
    return rule.weighted_score(pred_first, pred_second)


def monte_carlo_payments(
    config: MechanismConfig,
    latent: LatentStatePrior,
    profile: StrategyProfile,
    trials: int,
    seed: int = 0,
    chunk: int = 65536,
) -> MonteCarloPayments:
    """Unbiased sampled payments under the full mechanism.

    Samples latent states, conditionally independent signals, mixed reports,
    and uniform matchings.  Uses a counter-based generator keyed by ``seed``,
    so results are reproducible and trials could be partitioned across workers
    without changing the stream semantics.
    """
    if trials < 1:
        raise MechanismError("need at least one trial")
    n, m = profile.n, profile.m
    rule_id = config.rule
    alpha, beta = config.alpha, config.beta
    rng = np.random.Generator(np.random.Philox(seed))

    if config.variant == "disagreement":
        group_a, group_b = config.groups(n)
        in_a = np.zeros(n, dtype=bool)
        in_a[list(group_a)] = True
        group_of = [np.array(group_a), np.array(group_b)]

    theta_cums = np.cumsum(profile.thetas, axis=1)  # (n, m, m) cumulative over reports

    pay_sum = np.zeros(n)
    pay_sumsq = np.zeros(n)
    welfare_sum = 0.0
    welfare_sumsq = 0.0

    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        done += k

        signals = latent.sample_signals(n, k, rng)  # (k, n)
        reports = np.empty((k, n), dtype=int)
        for i in range(n):
            cum_cols = theta_cums[i][:, signals[:, i]].T  # (k, m)
            reports[:, i] = _sample_categorical(cum_cols, rng.random(k))
        preds = np.empty((k, n, m))
        for i in range(n):
            preds[:, i, :] = profile.predictions[i, signals[:, i], reports[:, i]]

        # base-payment peer: uniform over the eligible set minus self
        peers = np.empty((k, n), dtype=int)
        for i in range(n):
            if config.variant == "truthful":
                draw = rng.integers(0, n - 1, size=k)
                peers[:, i] = draw + (draw >= i)
            else:
                mates = group_of[0] if in_a[i] else group_of[1]
                others = mates[mates != i]
                peers[:, i] = others[rng.integers(0, others.size, size=k)]

        base = np.empty((k, n))
        for i in range(n):
            p_i = preds[:, i, :]
            peer = peers[:, i]
            rows = np.arange(k)
            peer_rep = reports[rows, peer]
            peer_pred = preds[rows, peer, :]
            if rule_id == "log":
                score_p = np.log(p_i[rows, peer_rep])
                if not np.all(np.isfinite(score_p)):
                    raise MechanismError(
                        "log rule hit a zero-probability prediction for a realized report"
                    )
            else:
                score_p = 2.0 * p_i[rows, peer_rep] - np.sum(p_i * p_i, axis=1)
            same = reports[:, i] == peer_rep
            score_i = np.zeros(k)
            if np.any(same):
                a = _weighted_first_arg_scores(rule_id, peer_pred[same], p_i[same])
                b = _weighted_first_arg_scores(rule_id, peer_pred[same], peer_pred[same])
                score_i[same] = a - b
            base[:, i] = alpha * score_p + beta * score_i

        if config.variant == "truthful":
            payments = base
        else:
            sums_a = base[:, list(group_a)].sum(axis=1)
            sums_b = base[:, list(group_b)].sum(axis=1)
            payments = np.empty_like(base)
            payments[:, list(group_a)] = base[:, list(group_a)] - (sums_b / len(group_a))[:, None]
            payments[:, list(group_b)] = base[:, list(group_b)] - (sums_a / len(group_b))[:, None]
            rows = np.arange(k)
            for i in range(n):
                draw_j = rng.integers(0, n - 1, size=k)
                j = draw_j + (draw_j >= i)
                draw_k = rng.integers(0, n - 2, size=k)
                lo = np.minimum(i, j)
                hi = np.maximum(i, j)
                kk = draw_k + (draw_k >= lo)
                kk = kk + (kk >= hi)
                d = hellinger(preds[rows, j, :], preds[rows, kk, :])
                same_jk = reports[rows, j] == reports[rows, kk]
                payments[:, i] += np.where(same_jk, -np.sqrt(d), d)

        pay_sum += payments.sum(axis=0)
        pay_sumsq += (payments * payments).sum(axis=0)
        w = payments.mean(axis=1)
        welfare_sum += w.sum()
        welfare_sumsq += float(w @ w)

    mean = pay_sum / trials
    var = np.maximum(pay_sumsq / trials - mean * mean, 0.0)
    stderr = np.sqrt(var / trials)
    wmean = welfare_sum / trials
    wvar = max(welfare_sumsq / trials - wmean * wmean, 0.0)
    return MonteCarloPayments(mean, stderr, wmean, math.sqrt(wvar / trials), trials)
