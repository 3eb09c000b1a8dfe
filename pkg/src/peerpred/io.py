"""JSON file formats for priors, profiles, and mechanism configs.

Prior files carry either the latent generative form or the raw pairwise
moments::

    {"signals": [...], "kind": "latent", "state_probs": [...], "emissions": [[...]]}
    {"signals": [...], "kind": "pairwise", "marginal": [...], "conditional": [[...]]}

The conditional is stored row-major with rows indexed by the conditioned
signal and columns by the conditioning signal (``conditional[a][b] =
q(a|b)``).  Profile files::

    {"n": ..., "agents": [{"theta": [[...]], "predictions": [[[...]]]}, ...]}

with ``theta[report][signal]`` and ``predictions[signal][report]`` a
probability vector.  Mechanism files::

    {"alpha": ..., "beta": ..., "rule": "log", "variant": "disagreement", "groupA": [...]}

All reals are IEEE doubles; Python's default float printing is the shortest
representation that round-trips exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .mechanism import MechanismConfig
from .priors import LatentStatePrior, PairwisePrior, PriorError, SignalSpace, from_latent
from .strategy import ProfileError, StrategyProfile

__all__ = [
    "prior_to_dict",
    "prior_from_dict",
    "load_prior",
    "save_prior",
    "pairwise_from_loaded",
    "profile_to_dict",
    "profile_from_dict",
    "load_profile",
    "save_profile",
    "mechanism_from_dict",
    "load_mechanism",
    "save_mechanism",
    "FormatError",
]


class FormatError(ValueError):
    """Raised for malformed input files."""


def _require(data: dict, key: str, path=None) -> object:
    if key not in data:
        where = f" in {path}" if path else ""
        raise FormatError(f"missing field {key!r}{where}")
    return data[key]


def prior_to_dict(prior: LatentStatePrior | PairwisePrior) -> dict:
    if isinstance(prior, LatentStatePrior):
        return {
            "signals": list(prior.space.labels),
            "kind": "latent",
            "state_probs": prior.state_probs.tolist(),
            "emissions": prior.emissions.tolist(),
        }
    return {
        "signals": list(prior.space.labels),
        "kind": "pairwise",
        "marginal": prior.marginal.tolist(),
        "conditional": prior.conditional.tolist(),
    }


def prior_from_dict(data: dict, path=None) -> LatentStatePrior | PairwisePrior:
    labels = _require(data, "signals", path)
    space = SignalSpace(tuple(labels))
    kind = data.get("kind", "pairwise")
    try:
        if kind == "latent":
            return LatentStatePrior(
                space,
                np.asarray(_require(data, "state_probs", path), dtype=float),
                np.asarray(_require(data, "emissions", path), dtype=float),
            )
        if kind == "pairwise":
            return PairwisePrior(
                space,
                np.asarray(_require(data, "marginal", path), dtype=float),
                np.asarray(_require(data, "conditional", path), dtype=float),
            )
    except PriorError as exc:
        raise FormatError(f"invalid prior{f' in {path}' if path else ''}: {exc}") from exc
    raise FormatError(f"unknown prior kind {kind!r}")


def pairwise_from_loaded(prior: LatentStatePrior | PairwisePrior) -> PairwisePrior:
    """Pairwise moments of a loaded prior of either kind."""
    if isinstance(prior, LatentStatePrior):
        return from_latent(prior)
    return prior


def load_prior(path) -> LatentStatePrior | PairwisePrior:
    return prior_from_dict(_load_json(path), path)


def save_prior(prior: LatentStatePrior | PairwisePrior, path):
    _dump_json(prior_to_dict(prior), path)


def profile_to_dict(profile: StrategyProfile) -> dict:
    return {
        "n": profile.n,
        "agents": [
            {
                "theta": profile.thetas[i].tolist(),
                "predictions": profile.predictions[i].tolist(),
            }
            for i in range(profile.n)
        ],
    }


def profile_from_dict(data: dict, path=None) -> StrategyProfile:
    agents = _require(data, "agents", path)
    try:
        thetas = np.asarray([a["theta"] for a in agents], dtype=float)
        predictions = np.asarray([a["predictions"] for a in agents], dtype=float)
        profile = StrategyProfile(thetas, predictions)
    except (KeyError, ProfileError, ValueError) as exc:
        raise FormatError(f"invalid profile{f' in {path}' if path else ''}: {exc}") from exc
    declared = data.get("n", profile.n)
    if declared != profile.n:
        raise FormatError(f"profile declares n={declared} but has {profile.n} agents")
    return profile


def load_profile(path) -> StrategyProfile:
    return profile_from_dict(_load_json(path), path)


def save_profile(profile: StrategyProfile, path):
    _dump_json(profile_to_dict(profile), path)


def mechanism_from_dict(data: dict, path=None) -> MechanismConfig:
    try:
        return MechanismConfig(
            alpha=float(data.get("alpha", 1.0)),
            beta=float(data.get("beta", 0.05)),
            rule=data.get("rule", "log"),
            variant=data.get("variant", "truthful"),
            group_a=tuple(data["groupA"]) if "groupA" in data else None,
        )
    except (ValueError, TypeError) as exc:
        raise FormatError(f"invalid mechanism{f' in {path}' if path else ''}: {exc}") from exc


def load_mechanism(path) -> MechanismConfig:
    return mechanism_from_dict(_load_json(path), path)


def save_mechanism(config: MechanismConfig, path):
    _dump_json(config.to_dict(), path)


def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise FormatError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed JSON in {path}: {exc}") from exc


def _dump_json(data: dict, path):
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
