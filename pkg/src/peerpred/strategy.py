"""Strategy profiles and their algebra.

An agent's behavior is a column-stochastic signal strategy
``theta[r, s] = Pr(report r | private signal s)`` together with a prediction
table ``P[s, r]`` giving the probability vector reported alongside report
``r`` when the private signal is ``s``.  One prediction per (private,
reported) pair is a lossless representation wherever predictions are best
responses, and report-probability-zero cells never enter any expectation;
constructors fill them anyway so tables stay total.

A profile stacks these per agent: ``thetas`` has shape (n, m, m) and
``predictions`` has shape (n, m, m, m) indexed [agent, private, reported,
coordinate].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .priors import PairwisePrior, PermutationMap, PriorError, all_permutations

__all__ = [
    "StrategyProfile",
    "AggregateStrategies",
    "MatrixClass",
    "ProfileError",
    "truth_telling_profile",
    "permutation_profile",
    "constant_report_profile",
    "uniform_report_profile",
    "counterexample_profile",
    "candidate_profiles",
    "aggregate_strategies",
    "best_prediction_profile",
    "symmetrized_best_prediction",
    "symmetric_profile",
    "matrix_classify",
    "permute_profile",
    "validate_signal_strategy",
    "random_signal_strategy",
    "tau_closeness",
]

STOCHASTIC_TOL = 1e-12


class ProfileError(ValueError):
    """Raised for malformed strategies or profiles."""


def validate_signal_strategy(theta: np.ndarray, tol: float = STOCHASTIC_TOL) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise ProfileError(f"signal strategy must be square, got shape {theta.shape}")
    if np.any(theta < 0.0):
        raise ProfileError("signal strategy entries must be non-negative")
    colsums = theta.sum(axis=0)
    if np.max(np.abs(colsums - 1.0)) > tol:
        raise ProfileError(f"columns must sum to 1, got {colsums}")
    return theta


@dataclass(frozen=True)
class StrategyProfile:
    """Per-agent signal strategies and prediction tables."""

    thetas: np.ndarray
    predictions: np.ndarray

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float)
        predictions = np.asarray(self.predictions, dtype=float)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "predictions", predictions)
        if thetas.ndim != 3 or thetas.shape[1] != thetas.shape[2]:
            raise ProfileError(f"thetas must have shape (n, m, m), got {thetas.shape}")
        n, m, _ = thetas.shape
        if n < 2:
            raise ProfileError("a profile needs at least two agents")
        if predictions.shape != (n, m, m, m):
            raise ProfileError(
                f"predictions must have shape ({n}, {m}, {m}, {m}), got {predictions.shape}"
            )
        for i in range(n):
            validate_signal_strategy(thetas[i])
        if np.any(predictions < 0.0) or np.max(np.abs(predictions.sum(axis=-1) - 1.0)) > 1e-9:
            raise ProfileError("every prediction cell must be a probability vector")
        thetas.setflags(write=False)
        predictions.setflags(write=False)

    @property
    def n(self) -> int:
        return self.thetas.shape[0]

    @property
    def m(self) -> int:
        return self.thetas.shape[1]

    def with_predictions(self, predictions: np.ndarray) -> "StrategyProfile":
        return StrategyProfile(self.thetas, predictions)

    def is_symmetric(self, tol: float = STOCHASTIC_TOL) -> bool:
        return bool(
            np.max(np.abs(self.thetas - self.thetas[0])) <= tol
            and np.max(np.abs(self.predictions - self.predictions[0])) <= tol
        )


@dataclass(frozen=True)
class AggregateStrategies:
    """Average signal strategy and the leave-one-out averages.

    Satisfies (n - 1) theta_minus[i] + thetas[i] = n * theta_bar entrywise.
    """

    theta_bar: np.ndarray
    theta_minus: np.ndarray

    def report_distribution(self, omega: np.ndarray) -> np.ndarray:
        """Distribution of a uniformly chosen agent's report when private
        signals follow ``omega``."""
        return self.theta_bar @ np.asarray(omega, dtype=float)


def aggregate_strategies(profile: StrategyProfile) -> AggregateStrategies:
    n = profile.n
    theta_bar = profile.thetas.mean(axis=0)
    theta_minus = (n * theta_bar[None, :, :] - profile.thetas) / (n - 1)
    return AggregateStrategies(theta_bar, theta_minus)


def _filled_predictions(n: int, per_signal: np.ndarray) -> np.ndarray:
    """Tile per-signal predictions (m, m) -> (n, m, m, m), same vector for every report."""
    m = per_signal.shape[0]
    return np.broadcast_to(per_signal[None, :, None, :], (n, m, m, m)).copy()


def truth_telling_profile(prior: PairwisePrior, n: int) -> StrategyProfile:
    """Report the private signal and predict its conditional column.

    Off-path cells (s, r != s) hold the conditional column of the reported
    signal; they are never realized under the identity signal strategy.
    """
    if n < 2:
        raise ProfileError("need n >= 2")
    m = prior.m
    thetas = np.broadcast_to(np.eye(m), (n, m, m)).copy()
    # predictions[i, s, r] = q_r  (diagonal r = s gives the truthful q_s)
    per_report = prior.conditional.T  # row r = q_r
    predictions = np.broadcast_to(per_report[None, None, :, :], (n, m, m, m)).copy()
    return StrategyProfile(thetas, predictions)


def permutation_profile(prior: PairwisePrior, n: int, perm: PermutationMap) -> StrategyProfile:
    """Truth-telling after relabeling signals by ``perm``: report perm(s) and
    predict the relabeled conditional column ``theta_perm @ q_s``."""
    if n < 2:
        raise ProfileError("need n >= 2")
    if perm.m != prior.m:
        raise PriorError(f"permutation on {perm.m} signals, prior has {prior.m}")
    m = prior.m
    theta_pi = perm.matrix()
    thetas = np.broadcast_to(theta_pi, (n, m, m)).copy()
    per_signal = (theta_pi @ prior.conditional).T  # row s = theta_pi q_s
    return StrategyProfile(thetas, _filled_predictions(n, per_signal))


def constant_report_profile(prior: PairwisePrior, n: int, target: int) -> StrategyProfile:
    """Everyone reports ``target`` and predicts a point mass on it."""
    m = prior.m
    theta = np.zeros((m, m))
    theta[target, :] = 1.0
    point = np.zeros(m)
    point[target] = 1.0
    thetas = np.broadcast_to(theta, (n, m, m)).copy()
    predictions = np.broadcast_to(point, (n, m, m, m)).copy()
    return StrategyProfile(thetas, predictions)


def uniform_report_profile(prior: PairwisePrior, n: int) -> StrategyProfile:
    """Reports uniform at random; predictions are the induced best prediction,
    which is the uniform vector."""
    m = prior.m
    thetas = np.full((n, m, m), 1.0 / m)
    predictions = np.full((n, m, m, m), 1.0 / m)
    return StrategyProfile(thetas, predictions)


def counterexample_profile(prior: PairwisePrior, n: int) -> StrategyProfile:
    """The n = m profile where agent i always reports signal i and predicts
    1/(m-1) on every signal except i (and 0 on i).

    Inconsistency vanishes (no two agents ever share a report) while the
    prediction spread is maximal, so its classification score beats
    truth-telling's; it is the reason welfare-dominance over *all* equilibria
    is unattainable.
    """
    m = prior.m
    if n != m:
        raise ProfileError(f"this profile needs one agent per signal (n = m), got n={n}, m={m}")
    thetas = np.zeros((n, m, m))
    predictions = np.zeros((n, m, m, m))
    for i in range(n):
        thetas[i, i, :] = 1.0
        spread = np.full(m, 1.0 / (m - 1))
        spread[i] = 0.0
        predictions[i, :, :] = spread[None, None, :]
    return StrategyProfile(thetas, predictions)


def candidate_profiles(prior: PairwisePrior, n: int) -> dict[str, StrategyProfile]:
    """Named catalogue of benchmark profiles for welfare comparisons."""
    if n < 2:
        raise ProfileError("need n >= 2")
    m = prior.m
    out: dict[str, StrategyProfile] = {"truth": truth_telling_profile(prior, n)}
    if m <= 4:
        for perm in all_permutations(m):
            if perm.is_identity:
                continue
            out[f"permutation:{','.join(map(str, perm.mapping))}"] = permutation_profile(
                prior, n, perm
            )
    for target in range(m):
        out[f"constant:{prior.space.labels[target]}"] = constant_report_profile(prior, n, target)
    out["uniform"] = uniform_report_profile(prior, n)
    if n == m:
        out["counterexample"] = counterexample_profile(prior, n)
    return out


def best_prediction_profile(profile: StrategyProfile, prior: PairwisePrior) -> StrategyProfile:
    """Keep signal strategies, replace every prediction by the prediction-score
    maximizer theta_minus[i] @ q_s (independent of the reported signal)."""
    agg = aggregate_strategies(profile)
    per_agent_signal = np.einsum("iuv,vs->isu", agg.theta_minus, prior.conditional)
    n, m = profile.n, profile.m
    predictions = np.broadcast_to(per_agent_signal[:, :, None, :], (n, m, m, m)).copy()
    return profile.with_predictions(predictions)


def symmetrized_best_prediction(profile: StrategyProfile, prior: PairwisePrior) -> StrategyProfile:
    """Like :func:`best_prediction_profile` but with the population average
    theta_bar @ q_s for every agent."""
    agg = aggregate_strategies(profile)
    per_signal = (agg.theta_bar @ prior.conditional).T  # row s
    return profile.with_predictions(_filled_predictions(profile.n, per_signal))


def symmetric_profile(prior: PairwisePrior, n: int, theta: np.ndarray) -> StrategyProfile:
    """All agents play ``theta`` and predict theta @ q_s."""
    theta = validate_signal_strategy(theta)
    thetas = np.broadcast_to(theta, (n, theta.shape[0], theta.shape[1])).copy()
    per_signal = (theta @ prior.conditional).T
    return StrategyProfile(thetas, _filled_predictions(n, per_signal))


@dataclass(frozen=True)
class MatrixClass:
    is_permutation: bool
    is_tau_close: bool


def matrix_classify(theta: np.ndarray, tau: float, tol: float = STOCHASTIC_TOL) -> MatrixClass:
    """Row-wise classification of a column-stochastic matrix.

    A column-stochastic matrix is a permutation matrix exactly when every row
    has at most one entry above ``tol``; it is tau-close to a permutation when
    every row has at most one entry strictly above ``tau`` (ties at tau do not
    count as exceeding).
    """
    theta = validate_signal_strategy(theta, tol=1e-9)
    if not (0.0 < tau < 1.0):
        raise ProfileError(f"tau must lie in (0, 1), got {tau}")
    per_row_big = (theta > tol).sum(axis=1)
    per_row_tau = (theta > tau).sum(axis=1)
    return MatrixClass(
        is_permutation=bool(np.all(per_row_big <= 1)),
        is_tau_close=bool(np.all(per_row_tau <= 1)),
    )


def random_signal_strategy(rng: np.random.Generator, m: int) -> np.ndarray:
    """Column-stochastic matrix with columns uniform on the simplex."""
    return rng.dirichlet(np.ones(m), size=m).T


def tau_closeness(theta: np.ndarray) -> float:
    """Smallest tau at which ``theta`` is tau-close to a permutation: the
    largest second-largest row entry.  0 for permutation matrices."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[0] < 2:
        return 0.0
    second = np.sort(theta, axis=1)[:, -2]
    return float(np.max(second))


def permute_profile(profile: StrategyProfile, perm: PermutationMap) -> StrategyProfile:
    """Precompose a profile with a relabeling of private signals.

    The returned profile plays, at private signal s, whatever the input plays
    at perm(s): theta'[r, s] = theta[r, perm(s)] and P'[s, r] = P[perm(s), r].
    Composing with ``perm.inverse()`` restores the input bit-exactly.  Paired
    with the inversely-permuted prior this realizes the relabeled scenario
    whose welfare matches the original.
    """
    if perm.m != profile.m:
        raise ProfileError(f"permutation on {perm.m} signals, profile has {profile.m}")
    idx = list(perm.mapping)
    thetas = profile.thetas[:, :, idx]
    predictions = profile.predictions[:, idx, :, :]
    return StrategyProfile(thetas.copy(), predictions.copy())
