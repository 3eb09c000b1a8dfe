"""Command-line front end.

Subcommands wire the file formats to the library: validate-prior, gen-prior,
payout, welfare, check-eq, solve-predictions, audit, impossibility, sweep-n,
and suite.  Results go to stdout (or --out) as CSV or JSON; human-facing
status lines go to stderr so machine output stays byte-deterministic for
fixed inputs and seed.

Exit codes: 0 success, 1 usage or input errors, 2 validation failures (a
prior failing its assumption checks, or acceptance-suite failures).
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys

import numpy as np

from . import acceptance
from .audits import (
    AuditError,
    aggregation_error_audit,
    classification_bound_audit,
    far_from_permutation_gap,
    relabeling_cycle_audit,
)
from .divergence import DivergenceDomainError
from .equilibrium import check_equilibrium, expected_conditional_payoff, solved_profile
from .io import (
    FormatError,
    load_mechanism,
    load_prior,
    load_profile,
    pairwise_from_loaded,
    prior_to_dict,
    profile_to_dict,
    save_prior,
)
from .mechanism import MechanismConfig, MechanismError, monte_carlo_payments, welfare_metrics
from .priors import (
    LatentStatePrior,
    PermutationMap,
    PriorError,
    prior_constants,
    random_snife_prior,
    theorem_bounds,
    validate_snife,
)
from .scoring import ScoreDomainError
from .strategy import (
    ProfileError,
    aggregate_strategies,
    constant_report_profile,
    counterexample_profile,
    permutation_profile,
    random_signal_strategy,
    truth_telling_profile,
    uniform_report_profile,
)

__all__ = ["main"]

NAMED_PROFILES = "truth | uniform | counterexample | constant:<label> | permutation:<imgs>"


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors instead of argparse's 2
        raise CliError(message)


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _emit(rows: list[dict], args, payload_key="rows"):
    """Write rows as CSV (one header from the first row) or a JSON list."""
    if args.format == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        buf = _io.StringIO()
        if rows:
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(rows[0].keys())
            for row in rows:
                writer.writerow([_fmt(v) for v in row.values()])
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _status(message: str):
    print(message, file=sys.stderr)


def _load_pairwise(path):
    return pairwise_from_loaded(load_prior(path))


def _mechanism(args) -> MechanismConfig:
    if getattr(args, "mech", None):
        config = load_mechanism(args.mech)
        overrides = {}
        if args.alpha is not None:
            overrides["alpha"] = args.alpha
        if args.beta is not None:
            overrides["beta"] = args.beta
        if args.rule is not None:
            overrides["rule"] = args.rule
        if overrides:
            data = config.to_dict()
            data.update(overrides)
            config = MechanismConfig(
                alpha=data["alpha"],
                beta=data["beta"],
                rule=data["rule"],
                variant=data["variant"],
                group_a=tuple(data["groupA"]) if "groupA" in data else None,
            )
        return config
    return MechanismConfig(
        alpha=args.alpha if args.alpha is not None else 1.0,
        beta=args.beta if args.beta is not None else 0.05,
        rule=args.rule if args.rule is not None else "log",
    )


def _resolve_profile(spec: str, prior, n: int):
    if spec == "truth":
        return truth_telling_profile(prior, n)
    if spec == "uniform":
        return uniform_report_profile(prior, n)
    if spec == "counterexample":
        return counterexample_profile(prior, prior.m)
    if spec.startswith("constant:"):
        label = spec.split(":", 1)[1]
        target = prior.space.index(label) if label in prior.space.labels else int(label)
        return constant_report_profile(prior, n, target)
    if spec.startswith("permutation:"):
        imgs = tuple(int(x) for x in spec.split(":", 1)[1].split(","))
        return permutation_profile(prior, n, PermutationMap(imgs))
    return load_profile(spec)


def _build_parser() -> _Parser:
    parser = _Parser(prog="peerpred", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, prior=True, profile=False, mech=False):
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", help="write results to this path instead of stdout")
        if prior:
            p.add_argument("--prior", required=True, help="prior JSON file")
        if profile:
            p.add_argument(
                "--profile",
                required=True,
                help=f"profile JSON file or one of: {NAMED_PROFILES}",
            )
            p.add_argument("--n", type=int, default=4, help="agents for named profiles")
        if mech:
            p.add_argument("--mech", help="mechanism JSON file")
            p.add_argument("--alpha", type=float)
            p.add_argument("--beta", type=float)
            p.add_argument("--rule", choices=("log", "quadratic"))

    p = sub.add_parser("validate-prior", help="check the prior assumptions")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")

    p = sub.add_parser("gen-prior", help="sample a validated latent prior")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--states", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="json")

    p = sub.add_parser("payout", help="expected payoffs, or sampled payments with --trials")
    common(p, profile=True, mech=True)
    p.add_argument("--trials", type=int, help="Monte Carlo trials (needs a latent prior)")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("welfare", help="welfare decomposition of a profile")
    common(p, profile=True, mech=True)

    p = sub.add_parser("check-eq", help="best-response gaps of a profile")
    common(p, profile=True, mech=True)
    p.add_argument("--eps", type=float, default=1e-9)

    p = sub.add_parser("solve-predictions", help="equilibrium predictions for fixed signal strategies")
    common(p, profile=True, mech=True)

    p = sub.add_parser("audit", help="welfare-bound audits on a profile")
    common(p, profile=True, mech=True)
    p.add_argument(
        "--which",
        choices=("classification-bound", "far-from-permutation", "aggregation-error", "all"),
        default="all",
    )
    p.add_argument("--tau", type=float, default=0.2)
    p.add_argument("--eps", type=float, default=0.5)

    p = sub.add_parser("impossibility", help="relabeling welfare-cycle identities")
    common(p, profile=True)
    p.add_argument("--perm", required=True, help="comma-separated image indices, e.g. 1,0")

    p = sub.add_parser("sweep-n", help="welfare gaps of solved profiles vs the n-dependence bound")
    common(p, mech=True)
    p.add_argument("--n", required=True, help="comma-separated agent counts")
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="evaluate agent counts concurrently")

    p = sub.add_parser("suite", help="run the acceptance battery")
    p.add_argument("--jobs", type=int, default=1)
    return parser


def _cmd_validate_prior(args) -> int:
    prior = _load_pairwise(args.infile)
    report = validate_snife(prior, tol=args.tol)
    rows = [
        {
            "assumption": name,
            "ok": ok,
            "witness": ";".join(map(str, report.witnesses.get(key, ()))),
        }
        for name, key, ok in (
            ("symmetric", "symmetric", report.symmetric_ok),
            ("nonzero", "nonzero", report.nonzero_ok),
            ("informative", "informative", report.informative_ok),
            ("finegrained", "finegrained", report.finegrained_ok),
        )
    ]
    _emit(rows, args)
    if not report.all_ok:
        _status("validation failed: " + ", ".join(r["assumption"] for r in rows if not r["ok"]))
        return 2
    return 0


def _cmd_gen_prior(args) -> int:
    latent = random_snife_prior(args.m, args.states, seed=args.seed)
    if args.out:
        save_prior(latent, args.out)
    else:
        sys.stdout.write(json.dumps(prior_to_dict(latent), indent=2) + "\n")
    return 0


def _cmd_payout(args) -> int:
    loaded = load_prior(args.prior)
    prior = pairwise_from_loaded(loaded)
    config = _mechanism(args)
    profile = _resolve_profile(args.profile, prior, args.n)
    if args.trials:
        if not isinstance(loaded, LatentStatePrior):
            raise CliError("--trials needs a latent prior (sampling requires the full joint)")
        mc = monte_carlo_payments(config, loaded, profile, args.trials, seed=args.seed)
        rows = [
            {"agent": i, "mean_payment": mc.mean[i], "stderr": mc.stderr[i]}
            for i in range(profile.n)
        ]
        rows.append(
            {"agent": "average", "mean_payment": mc.welfare_mean, "stderr": mc.welfare_stderr}
        )
        _emit(rows, args)
        return 0
    report = check_equilibrium(config, prior, profile)
    rows = [
        {
            "agent": i,
            "signal": prior.space.labels[s],
            "payoff": expected_conditional_payoff(config, prior, profile, i, s),
            "gap": float(report.gaps[i, s]),
        }
        for i in range(profile.n)
        for s in range(prior.m)
    ]
    _emit(rows, args)
    return 0


def _cmd_welfare(args) -> int:
    prior = _load_pairwise(args.prior)
    config = _mechanism(args)
    config.warn_if_outside_regime(prior.m)
    profile = _resolve_profile(args.profile, prior, args.n)
    _emit([welfare_metrics(prior, profile).to_dict()], args)
    return 0


def _cmd_check_eq(args) -> int:
    prior = _load_pairwise(args.prior)
    config = _mechanism(args)
    profile = _resolve_profile(args.profile, prior, args.n)
    report = check_equilibrium(config, prior, profile, eps=args.eps)
    _emit(report.to_rows(), args)
    _status(
        f"max_gap={report.max_gap:.3e} eps={args.eps:g} "
        f"is_eps_equilibrium={report.is_eps_equilibrium}"
    )
    return 0


def _cmd_solve_predictions(args) -> int:
    prior = _load_pairwise(args.prior)
    config = _mechanism(args)
    profile = _resolve_profile(args.profile, prior, args.n)
    solved = solved_profile(config, prior, profile.thetas)
    if args.format == "json":
        # a profile object, directly reusable as a --profile input
        text = json.dumps(profile_to_dict(solved), indent=2) + "\n"
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    else:
        rows = [
            {
                "agent": i,
                "signal": prior.space.labels[s],
                "report": prior.space.labels[r],
                **{
                    f"p_{prior.space.labels[u]}": float(solved.predictions[i, s, r, u])
                    for u in range(prior.m)
                },
            }
            for i in range(solved.n)
            for s in range(prior.m)
            for r in range(prior.m)
        ]
        _emit(rows, args)
    return 0


def _cmd_audit(args) -> int:
    prior = _load_pairwise(args.prior)
    config = _mechanism(args)
    profile = _resolve_profile(args.profile, prior, args.n)
    results = []
    if args.which in ("classification-bound", "all"):
        results.append(classification_bound_audit(config, prior, profile))
    if args.which in ("far-from-permutation", "all"):
        theta_bar = aggregate_strategies(profile).theta_bar
        try:
            results.append(far_from_permutation_gap(prior, theta_bar, tau=args.tau))
        except AuditError as exc:
            if args.which != "all":
                raise
            _status(f"far-from-permutation skipped: {exc}")
    if args.which in ("aggregation-error", "all"):
        try:
            results.append(aggregation_error_audit(prior, profile.thetas, eps=args.eps))
        except AuditError as exc:
            if args.which != "all":
                raise
            _status(f"aggregation-error skipped: {exc}")
    _emit([_audit_row(r) for r in results], args)
    return 0


def _audit_row(result) -> dict:
    return {
        "name": result.name,
        "lhs": result.lhs,
        "rhs": result.rhs,
        "slack": result.slack,
        "passed": result.passed,
        "context": json.dumps(result.context, sort_keys=True, default=str),
    }


def _cmd_impossibility(args) -> int:
    prior = _load_pairwise(args.prior)
    profile = _resolve_profile(args.profile, prior, args.n)
    perm = PermutationMap(tuple(int(x) for x in args.perm.split(",")))
    results = relabeling_cycle_audit(prior, profile, perm)
    _emit([_audit_row(r) for r in results], args)
    return 0


def _cmd_sweep_n(args) -> int:
    prior = _load_pairwise(args.prior)
    config = _mechanism(args)
    bounds = theorem_bounds(prior_constants(prior), prior.m)
    ns = [int(x) for x in args.n.split(",")]

    def unit(n: int) -> dict:
        # per-n generator seeded independently, so rows are identical no
        # matter how the units are scheduled
        rng = np.random.default_rng([args.seed, n])
        truth_score = welfare_metrics(
            prior, truth_telling_profile(prior, n)
        ).classification_score
        max_gap = -np.inf
        for _ in range(args.samples):
            thetas = np.stack([random_signal_strategy(rng, prior.m) for _ in range(n)])
            profile = solved_profile(config, prior, thetas)
            score = welfare_metrics(prior, profile).classification_score
            max_gap = max(max_gap, score - truth_score)
        gamma2 = bounds.gamma2(n)
        return {
            "n": n,
            "max_welfare_gap": float(max_gap),
            "gamma2": float(gamma2),
            "within_bound": bool(max_gap <= gamma2),
        }

    if args.jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(unit, ns))
    else:
        rows = [unit(n) for n in ns]
    _emit(rows, args)
    return 0


def _cmd_suite(args) -> int:
    results = acceptance.run_all(jobs=args.jobs)
    for result in results:
        print(result.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 2 if failed else 0


_COMMANDS = {
    "validate-prior": _cmd_validate_prior,
    "gen-prior": _cmd_gen_prior,
    "payout": _cmd_payout,
    "welfare": _cmd_welfare,
    "check-eq": _cmd_check_eq,
    "solve-predictions": _cmd_solve_predictions,
    "audit": _cmd_audit,
    "impossibility": _cmd_impossibility,
    "sweep-n": _cmd_sweep_n,
    "suite": _cmd_suite,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (
        FormatError,
        PriorError,
        ProfileError,
        MechanismError,
        ScoreDomainError,
        DivergenceDomainError,
        AuditError,
    ) as exc:
        print(f"error: {type(exc).__module__.split('.')[-1]}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
