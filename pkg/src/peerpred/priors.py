"""Signal spaces and common priors for peer-prediction games.

A prior is represented by its first two moments: the marginal q(sigma) of a
single agent's private signal and the conditional matrix q(sigma'|sigma) of a
peer's signal given one's own.  The conditional is stored with columns as the
conditioning signal: ``conditional[a, b] = q(sigma_a | sigma_b)``, so that
``conditional[:, s]`` is the distribution of a peer's signal given own signal
``s`` (written ``q_s`` throughout).

A full exchangeable joint for any number of agents is supplied by
:class:`LatentStatePrior`, a conditionally-i.i.d. model: a latent state is
drawn, then every agent's signal is drawn independently from the state's
emission row.  Its derived pairwise moments satisfy pairwise symmetry by
construction, and it yields the triple-wise conditionals needed for full
expected-payment accounting.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SignalSpace",
    "PairwisePrior",
    "LatentStatePrior",
    "AssumptionReport",
    "PermutationMap",
    "PriorConstants",
    "TheoremBounds",
    "PriorError",
    "build_pairwise_prior",
    "from_latent",
    "validate_snife",
    "permute_prior",
    "random_snife_prior",
    "prior_constants",
    "theorem_bounds",
    "all_permutations",
]

DEFAULT_TOL = 1e-9


class PriorError(ValueError):
    """Raised when a prior fails structural validation."""


def default_labels(m: int) -> tuple[str, ...]:
    return tuple(f"s{i + 1}" for i in range(m))


@dataclass(frozen=True)
class SignalSpace:
    """An ordered finite set of signal labels."""

    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(set(self.labels)) != len(self.labels):
            raise PriorError(f"signal labels must be unique, got {self.labels}")
        if len(self.labels) < 2:
            raise PriorError("a signal space needs at least two signals")

    @property
    def m(self) -> int:
        return len(self.labels)

    @classmethod
    def of_size(cls, m: int) -> "SignalSpace":
        return cls(default_labels(m))

    def index(self, label: str) -> int:
        return self.labels.index(label)


@dataclass(frozen=True)
class PairwisePrior:
    """First two moments of a symmetric prior.

    ``conditional[a, b] = q(sigma_a | sigma_b)``; column ``b`` is the peer
    distribution given own signal ``b``.  Construction here performs shape
    checks only; use :func:`build_pairwise_prior` for full validation, or
    :func:`validate_snife` for an itemized report.
    """

    space: SignalSpace
    marginal: np.ndarray
    conditional: np.ndarray

    def __post_init__(self):
        marginal = np.asarray(self.marginal, dtype=float)
        conditional = np.asarray(self.conditional, dtype=float)
        object.__setattr__(self, "marginal", marginal)
        object.__setattr__(self, "conditional", conditional)
        m = self.space.m
        if marginal.shape != (m,):
            raise PriorError(f"marginal shape {marginal.shape} != ({m},)")
        if conditional.shape != (m, m):
            raise PriorError(f"conditional shape {conditional.shape} != ({m}, {m})")
        marginal.setflags(write=False)
        conditional.setflags(write=False)

    @property
    def m(self) -> int:
        return self.space.m

    def q_sigma(self, s: int) -> np.ndarray:
        """Peer-signal distribution conditioned on own signal ``s``."""
        return self.conditional[:, s]

    def joint(self) -> np.ndarray:
        """Joint ``J[a, b] = Pr(peer = a, own = b) = q(a|b) q(b)``.

        Symmetric exactly when the pairwise-symmetry invariant holds.
        """
        return self.conditional * self.marginal[None, :]

    def symmetry_residual(self) -> float:
        j = self.joint()
        return float(np.max(np.abs(j - j.T)))


@dataclass(frozen=True)
class LatentStatePrior:
    """Conditionally-i.i.d. generative prior.

    A latent state ``t`` is drawn from ``state_probs``; each agent's signal is
    then an independent draw from the row ``emissions[t]``.  The derived
    pairwise moments are identical for every number of agents, and the model
    also provides the triple conditional Pr(sigma_j, sigma_k | sigma_i).
    """

    space: SignalSpace
    state_probs: np.ndarray
    emissions: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.state_probs, dtype=float)
        emissions = np.asarray(self.emissions, dtype=float)
        object.__setattr__(self, "state_probs", probs)
        object.__setattr__(self, "emissions", emissions)
        if probs.ndim != 1 or probs.size < 1:
            raise PriorError("state_probs must be a non-empty vector")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise PriorError("state_probs must be a probability vector")
        if emissions.shape != (probs.size, self.space.m):
            raise PriorError(
                f"emissions shape {emissions.shape} != ({probs.size}, {self.space.m})"
            )
        if np.any(emissions < 0) or np.max(np.abs(emissions.sum(axis=1) - 1.0)) > 1e-9:
            raise PriorError("each emissions row must be a probability vector")
        probs.setflags(write=False)
        emissions.setflags(write=False)

    @property
    def m(self) -> int:
        return self.space.m

    @property
    def num_states(self) -> int:
        return self.state_probs.size

    def marginal(self) -> np.ndarray:
        return self.state_probs @ self.emissions

    def state_posterior(self, s: int) -> np.ndarray:
        """Pr(state | own signal s)."""
        w = self.state_probs * self.emissions[:, s]
        total = w.sum()
        if total <= 0.0:
            raise PriorError(
                f"signal {self.space.labels[s]!r} has zero marginal probability"
            )
        return w / total

    def triple_conditional(self, s: int) -> np.ndarray:
        """``T[a, b] = Pr(sigma_j = a, sigma_k = b | sigma_i = s)`` for distinct j, k, i."""
        post = self.state_posterior(s)
        return np.einsum("t,ta,tb->ab", post, self.emissions, self.emissions)

    def sample_signals(self, n: int, trials: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``trials`` independent rounds of ``n`` agents' signals, shape (trials, n)."""
        states = rng.choice(self.num_states, size=trials, p=self.state_probs)
        cum = np.cumsum(self.emissions, axis=1)
        u = rng.random((trials, n))
        return (u[:, :, None] >= cum[states][:, None, :]).sum(axis=2)


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of checking the symmetric / non-zero / informative / fine-grained
    assumptions on a pairwise prior, with a witness for each failure."""

    symmetric_ok: bool
    nonzero_ok: bool
    informative_ok: bool
    finegrained_ok: bool
    witnesses: dict = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return (
            self.symmetric_ok
            and self.nonzero_ok
            and self.informative_ok
            and self.finegrained_ok
        )

    def to_dict(self) -> dict:
        return {
            "symmetric_ok": self.symmetric_ok,
            "nonzero_ok": self.nonzero_ok,
            "informative_ok": self.informative_ok,
            "finegrained_ok": self.finegrained_ok,
            "witnesses": {k: list(v) for k, v in self.witnesses.items()},
        }


@dataclass(frozen=True)
class PermutationMap:
    """A relabeling of signals.  ``mapping[s]`` is the image of signal ``s``;
    ``order`` is the smallest positive power equal to the identity."""

    mapping: tuple[int, ...]
    order: int = field(init=False)

    def __post_init__(self):
        mapping = tuple(int(x) for x in self.mapping)
        object.__setattr__(self, "mapping", mapping)
        m = len(mapping)
        if sorted(mapping) != list(range(m)):
            raise PriorError(f"mapping {mapping} is not a bijection on 0..{m - 1}")
        current = list(range(m))
        order = 0
        while True:
            current = [mapping[i] for i in current]
            order += 1
            if current == list(range(m)):
                break
        object.__setattr__(self, "order", order)

    @property
    def m(self) -> int:
        return len(self.mapping)

    def __call__(self, s: int) -> int:
        return self.mapping[s]

    @property
    def is_identity(self) -> bool:
        return self.order == 1

    def inverse(self) -> "PermutationMap":
        inv = [0] * self.m
        for s, img in enumerate(self.mapping):
            inv[img] = s
        return PermutationMap(tuple(inv))

    def matrix(self) -> np.ndarray:
        """The induced 0/1 signal strategy: row ``mapping[s]``, column ``s`` is 1."""
        theta = np.zeros((self.m, self.m))
        theta[list(self.mapping), range(self.m)] = 1.0
        return theta

    @classmethod
    def identity(cls, m: int) -> "PermutationMap":
        return cls(tuple(range(m)))


def all_permutations(m: int) -> list[PermutationMap]:
    return [PermutationMap(p) for p in itertools.permutations(range(m))]


@dataclass(frozen=True)
class PriorConstants:
    """Prior-dependent constants entering the welfare-gap bounds.

    c1: smallest conditional entry min q(s|t).
    c2: smallest pairwise joint entry min q(t) q(s|t).
    c3: min over signal pairs (u, v), u != v, of the largest squared difference
        of conditional-ratio profiles max_{s,t} (q(u|s)/q(u|t) - q(v|s)/q(v|t))^2.
    c4: smallest second derivative of f(x) = (sqrt(x) - 1)^2 over the realized
        conditional ratios, f''(x) = x^(-3/2) / 2.
    """

    c1: float
    c2: float
    c3: float
    c4: float

    @property
    def all_positive(self) -> bool:
        return self.c1 > 0 and self.c2 > 0 and self.c3 > 0 and self.c4 > 0

    def to_dict(self) -> dict:
        return {"c1": self.c1, "c2": self.c2, "c3": self.c3, "c4": self.c4}


@dataclass(frozen=True)
class TheoremBounds:
    """Closed-form welfare/closeness bounds parameterized by the prior constants."""

    constants: PriorConstants
    m: int

    def tau1(self, gamma1: float) -> float:
        c = self.constants
        return (1.0 / c.c1) * np.cbrt(gamma1 / (c.c2 * c.c3 * c.c4))

    def gamma2(self, n: int) -> float:
        return 4.0 * np.sqrt(2.0) * self.m / np.sqrt(n)

    def tau2(self, n: int) -> float:
        c = self.constants
        prod = c.c2 * c.c3 * c.c4
        return (128.0 * self.m**2 / (n * c.c1**6 * prod**2)) ** (1.0 / 6.0)


def build_pairwise_prior(
    marginal,
    conditional,
    tol: float = DEFAULT_TOL,
    space: SignalSpace | None = None,
) -> PairwisePrior:
    """Validate and build a pairwise prior.

    Checks that the marginal and every conditional column are stochastic and
    that the two-agent joint is symmetric (q(b) q(a|b) = q(a) q(b|a)), all
    within ``tol``.  Raises :class:`PriorError` otherwise.
    """
    marginal = np.asarray(marginal, dtype=float)
    if space is None:
        space = SignalSpace.of_size(marginal.size)
    prior = PairwisePrior(space, marginal, np.asarray(conditional, dtype=float))
    if np.any(prior.marginal < -tol) or abs(prior.marginal.sum() - 1.0) > tol:
        raise PriorError("marginal is not a probability vector within tolerance")
    colsums = prior.conditional.sum(axis=0)
    if np.any(prior.conditional < -tol) or np.max(np.abs(colsums - 1.0)) > tol:
        raise PriorError("conditional columns are not stochastic within tolerance")
    residual = prior.symmetry_residual()
    if residual > tol:
        raise PriorError(
            f"pairwise symmetry violated: max |q(b)q(a|b) - q(a)q(b|a)| = {residual:.3e}"
        )
    return prior


def from_latent(latent: LatentStatePrior) -> PairwisePrior:
    """Derive the pairwise moments of a latent-state prior.

    q(s) mixes emissions by state probability; q(s'|s) mixes emissions by the
    state posterior given s.  Pairwise symmetry holds by construction.  A
    degenerate latent model (some signal with zero marginal) is rejected since
    no conditional is defined there.
    """
    marginal = latent.marginal()
    if np.any(marginal <= 0.0):
        dead = [latent.space.labels[i] for i in np.nonzero(marginal <= 0.0)[0]]
        raise PriorError(f"degenerate latent prior: zero marginal for {dead}")
    # posterior[t, s] = Pr(state t | signal s)
    posterior = latent.state_probs[:, None] * latent.emissions / marginal[None, :]
    conditional = np.einsum("ts,ta->as", posterior, latent.emissions)
    return PairwisePrior(latent.space, marginal, conditional)


def _fine_grained_witness(conditional: np.ndarray, tol: float):
    """Return (u, v) rows whose entrywise ratio is constant across columns, or None."""
    m = conditional.shape[0]
    for u in range(m):
        for v in range(u + 1, m):
            # constant ratio q(u|.)/q(v|.) <=> all cross products q(u|s)q(v|t)
            # agree with q(u|t)q(v|s); compare products to avoid division
            cross_diff = np.abs(
                conditional[u][:, None] * conditional[v][None, :]
                - conditional[u][None, :] * conditional[v][:, None]
            )
            if np.max(cross_diff) <= tol:
                return (u, v)
    return None


def validate_snife(prior: PairwisePrior, tol: float = DEFAULT_TOL) -> AssumptionReport:
    """Check the four testable prior assumptions at tolerance ``tol``.

    Returns a report rather than raising: symmetric (two-agent joint is
    symmetric), non-zero (all marginals and conditionals > tol), informative
    (distinct signals induce distinct peer distributions), fine-grained (no two
    conditional rows are proportional).  The ensemble assumption is structural
    and carried by :class:`LatentStatePrior` construction.
    """
    witnesses: dict = {}
    c = prior.conditional

    symmetric_ok = prior.symmetry_residual() <= tol
    if not symmetric_ok:
        j = prior.joint()
        a, b = np.unravel_index(np.argmax(np.abs(j - j.T)), j.shape)
        witnesses["symmetric"] = (int(a), int(b))

    nonzero_ok = bool(np.all(prior.marginal > tol) and np.all(c > tol))
    if not nonzero_ok:
        if np.any(prior.marginal <= tol):
            witnesses["nonzero"] = (int(np.argmin(prior.marginal)),)
        else:
            a, b = np.unravel_index(np.argmin(c), c.shape)
            witnesses["nonzero"] = (int(a), int(b))

    informative_ok = True
    for s, t in itertools.combinations(range(prior.m), 2):
        if np.max(np.abs(c[:, s] - c[:, t])) <= tol:
            informative_ok = False
            witnesses["informative"] = (s, t)
            break

    fg = _fine_grained_witness(c, tol)
    finegrained_ok = fg is None
    if fg is not None:
        witnesses["finegrained"] = fg

    return AssumptionReport(symmetric_ok, nonzero_ok, informative_ok, finegrained_ok, witnesses)


def permute_prior(prior: PairwisePrior, perm: PermutationMap) -> PairwisePrior:
    """Relabel signals: q'(perm(s)) = q(s), q'(perm(a)|perm(b)) = q(a|b).

    Pure reindexing, so permuting by ``perm`` then ``perm.inverse()`` restores
    the input bit-exactly.
    """
    if perm.m != prior.m:
        raise PriorError(f"permutation on {perm.m} signals, prior has {prior.m}")
    idx = np.asarray(perm.mapping)
    marginal = np.empty_like(prior.marginal)
    marginal[idx] = prior.marginal
    conditional = np.empty_like(prior.conditional)
    conditional[np.ix_(idx, idx)] = prior.conditional
    return PairwisePrior(prior.space, marginal, conditional)


def random_snife_prior(
    m: int,
    num_states: int = 2,
    seed: int = 0,
    tol: float = 1e-6,
    max_draws: int = 10_000,
) -> LatentStatePrior:
    """Rejection-sample a latent prior whose pairwise moments pass all checks.

    State probabilities and emission rows are uniform on the simplex
    (Dirichlet with all-ones concentration).  Deterministic for a fixed seed.
    """
    if m < 2 or num_states < 2:
        raise PriorError("need m >= 2 signals and at least 2 latent states")
    rng = np.random.default_rng(seed)
    space = SignalSpace.of_size(m)
    for _ in range(max_draws):
        state_probs = rng.dirichlet(np.ones(num_states))
        emissions = rng.dirichlet(np.ones(m), size=num_states)
        latent = LatentStatePrior(space, state_probs, emissions)
        marginal = latent.marginal()
        if np.any(marginal <= 0.0):
            continue
        if validate_snife(from_latent(latent), tol=tol).all_ok:
            return latent
    raise PriorError(f"no valid prior found in {max_draws} draws (m={m}, states={num_states})")


def prior_constants(prior: PairwisePrior) -> PriorConstants:
    """Evaluate c1..c4 for a prior with strictly positive conditionals."""
    c = prior.conditional
    if np.any(c <= 0.0):
        raise PriorError("prior constants need strictly positive conditionals")
    m = prior.m
    c1 = float(np.min(c))
    c2 = float(np.min(prior.joint()))

    # ratio[u, s, t] = q(u|s) / q(u|t)
    ratio = c[:, :, None] / c[:, None, :]
    c3 = np.inf
    for u in range(m):
        for v in range(m):
            if u == v:
                continue
            c3 = min(c3, float(np.max((ratio[u] - ratio[v]) ** 2)))
    # f''(x) = x^(-3/2) / 2 is decreasing, so the minimum sits at the largest ratio
    c4 = float(0.5 * np.max(ratio) ** (-1.5))
    return PriorConstants(c1, c2, float(c3), c4)


def theorem_bounds(
    constants: PriorConstants,
    m: int,
) -> TheoremBounds:
    """Bundle the closed-form bounds; raises if any constant is non-positive."""
    if not constants.all_positive:
        raise PriorError(f"bounds need strictly positive constants, got {constants}")
    return TheoremBounds(constants, m)
