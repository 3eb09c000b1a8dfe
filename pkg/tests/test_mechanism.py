import math

import numpy as np
import pytest

from peerpred.divergence import hellinger
from peerpred.mechanism import (
    Matching,
    MechanismConfig,
    MechanismError,
    Report,
    classification_pair_score,
    monte_carlo_payments,
    pair_scores,
    pairwise_payment,
    realized_payments,
    welfare_metrics,
    zero_sum_group_scores,
)
from peerpred.priors import PermutationMap, from_latent
from peerpred.strategy import (
    StrategyProfile,
    constant_report_profile,
    permutation_profile,
    random_signal_strategy,
    truth_telling_profile,
)


def random_profile(rng, m, n):
    thetas = np.stack([random_signal_strategy(rng, m) for _ in range(n)])
    predictions = rng.dirichlet(np.ones(m), size=(n, m, m))
    return StrategyProfile(thetas, predictions)


class TestConfig:
    def test_parameter_signs(self):
        with pytest.raises(MechanismError):
            MechanismConfig(alpha=0.0)
        with pytest.raises(MechanismError):
            MechanismConfig(beta=-0.1)

    def test_variant_names(self):
        with pytest.raises(MechanismError):
            MechanismConfig(variant="zero-sum")

    def test_regime(self):
        assert MechanismConfig(alpha=1.0, beta=0.05).regime_ok(m=3)
        assert not MechanismConfig(alpha=1.0, beta=0.1).regime_ok(m=3)
        with pytest.warns(UserWarning, match="1/\\(4m\\)"):
            MechanismConfig(alpha=1.0, beta=0.1).warn_if_outside_regime(3)

    def test_default_groups(self):
        config = MechanismConfig(variant="disagreement")
        assert config.groups(5) == ((0, 1), (2, 3, 4))

    def test_small_groups_rejected(self):
        config = MechanismConfig(variant="disagreement")
        with pytest.raises(MechanismError, match="two agents per group"):
            config.groups(3)
        with pytest.raises(MechanismError):
            MechanismConfig(variant="disagreement", group_a=(0,)).groups(4)


class TestPairScores:
    def test_different_signals_zero_information_score(self):
        config = MechanismConfig(rule="log")
        r1 = Report(0, np.array([0.6, 0.4]))
        r2 = Report(1, np.array([0.5, 0.5]))
        _, score_i = pair_scores(config, r1, r2)
        assert score_i == 0.0

    def test_equal_predictions_zero_information_score(self):
        config = MechanismConfig(rule="log")
        r = Report(0, np.array([0.6, 0.4]))
        _, score_i = pair_scores(config, r, r)
        assert score_i == 0.0

    def test_log_penalty_is_negative_kl(self):
        config = MechanismConfig(rule="log")
        r_i = Report(0, np.array([0.25, 0.75]))
        r_j = Report(0, np.array([0.5, 0.5]))
        _, score_i = pair_scores(config, r_i, r_j)
        kl = 0.5 * math.log(0.5 / 0.25) + 0.5 * math.log(0.5 / 0.75)
        assert score_i == pytest.approx(-kl, abs=1e-12)
        assert score_i == pytest.approx(-0.143841, abs=1e-6)

    def test_prediction_score(self):
        config = MechanismConfig(rule="quadratic")
        r_i = Report(0, np.array([0.3, 0.7]))
        r_j = Report(1, np.array([0.5, 0.5]))
        score_p, _ = pair_scores(config, r_i, r_j)
        assert score_p == pytest.approx(2 * 0.7 - (0.09 + 0.49))

    def test_information_score_never_positive(self):
        rng = np.random.default_rng(0)
        for rule in ("log", "quadratic"):
            config = MechanismConfig(rule=rule)
            for _ in range(200):
                r_i = Report(1, rng.dirichlet(np.ones(3)))
                r_j = Report(1, rng.dirichlet(np.ones(3)))
                _, score_i = pair_scores(config, r_i, r_j)
                assert score_i <= 1e-15


class TestClassificationPairScore:
    def test_same_signal_same_prediction(self):
        r = Report(0, np.array([0.5, 0.5]))
        assert classification_pair_score(r, r) == 0.0

    def test_disjoint_supports(self):
        r_j = Report(0, np.array([1.0, 0.0]))
        r_k = Report(1, np.array([0.0, 1.0]))
        assert classification_pair_score(r_j, r_k) == 2.0

    def test_same_signal_distance_penalty(self):
        r_j = Report(0, np.array([1.0, 0.0]))
        r_k = Report(0, np.array([0.0, 1.0]))
        assert classification_pair_score(r_j, r_k) == pytest.approx(-math.sqrt(2.0))


class TestRealizedPayments:
    def test_truthful_matches_hand_computation(self):
        config = MechanismConfig(alpha=2.0, beta=0.5, rule="quadratic")
        rng = np.random.default_rng(1)
        reports = [Report(int(rng.integers(0, 2)), rng.dirichlet(np.ones(2))) for _ in range(4)]
        peers = np.array([1, 2, 3, 0])
        payments = realized_payments(config, reports, Matching(peers))
        for i in range(4):
            score_p, score_i = pair_scores(config, reports[i], reports[peers[i]])
            assert payments[i] == pytest.approx(2.0 * score_p + 0.5 * score_i, abs=1e-15)

    def test_identical_reports_reduce_to_prediction_score(self):
        config = MechanismConfig(alpha=1.0, beta=0.7, rule="log")
        report = Report(0, np.array([0.6, 0.4]))
        reports = [report] * 4
        payments = realized_payments(config, reports, Matching(np.array([1, 0, 3, 2])))
        assert np.allclose(payments, math.log(0.6))

    def test_zero_sum_identity(self):
        rng = np.random.default_rng(2)
        for n in (4, 5, 6, 7):
            config = MechanismConfig(1.0, 0.05, "quadratic", "disagreement")
            group_a, group_b = config.groups(n)
            reports = [Report(int(rng.integers(0, 3)), rng.dirichlet(np.ones(3))) for _ in range(n)]
            peers = np.empty(n, dtype=int)
            for group in (group_a, group_b):
                for i in group:
                    mates = [j for j in group if j != i]
                    peers[i] = mates[rng.integers(0, len(mates))]
            base = [pairwise_payment(config, reports[i], reports[peers[i]]) for i in range(n)]
            scores = zero_sum_group_scores(base, group_a, group_b)
            assert abs(math.fsum(scores)) <= 1e-12
            # full payments are the zero-sum scores plus the watched-pair reward
            pairs = np.array(
                [rng.choice([j for j in range(n) if j != i], size=2, replace=False) for i in range(n)]
            )
            payments = realized_payments(config, reports, Matching(peers, pairs))
            for i in range(n):
                j, k = pairs[i]
                expected = scores[i] + classification_pair_score(reports[j], reports[k])
                assert payments[i] == pytest.approx(expected, abs=1e-15)

    def test_matching_validation(self):
        config = MechanismConfig(rule="log")
        reports = [Report(0, np.array([0.5, 0.5]))] * 4
        with pytest.raises(MechanismError, match="distinct from self"):
            realized_payments(config, reports, Matching(np.array([0, 0, 3, 2])))
        config_d = MechanismConfig(1.0, 0.05, "log", "disagreement")
        with pytest.raises(MechanismError, match="other group"):
            realized_payments(config_d, reports, Matching(np.array([2, 3, 0, 1]), np.zeros((4, 2), int)))
        with pytest.raises(MechanismError, match="pair"):
            realized_payments(
                config_d,
                reports,
                Matching(np.array([1, 0, 3, 2]), np.array([[0, 1]] * 4)),
            )


def welfare_oracle(prior, profile):
    """Nested-loop re-derivation of the welfare decomposition."""
    n, m = profile.n, profile.m
    joint = prior.joint()
    diversity = inconsistency = total = 0.0
    for j in range(n):
        for k in range(n):
            if j == k:
                continue
            for a in range(m):
                for b in range(m):
                    w_sig = joint[a, b] / (n * (n - 1))
                    for rj in range(m):
                        for rk in range(m):
                            w = (
                                w_sig
                                * profile.thetas[j, rj, a]
                                * profile.thetas[k, rk, b]
                            )
                            if w == 0.0:
                                continue
                            d = float(
                                hellinger(
                                    profile.predictions[j, a, rj],
                                    profile.predictions[k, b, rk],
                                )
                            )
                            total += w * d
                            if rj == rk:
                                inconsistency += w * math.sqrt(d)
                            else:
                                diversity += w * d
    return diversity, inconsistency, total


class TestWelfareMetrics:
    def test_truth_telling_consistency(self, prior3):
        truth = truth_telling_profile(prior3, 5)
        wb = welfare_metrics(prior3, truth)
        assert wb.inconsistency == 0.0
        assert wb.classification_score == wb.total_divergence == wb.diversity
        # direct double sum over signal pairs
        expected = sum(
            prior3.joint()[a, b] * float(hellinger(prior3.q_sigma(a), prior3.q_sigma(b)))
            for a in range(3)
            for b in range(3)
        )
        assert wb.total_divergence == pytest.approx(expected, abs=1e-14)

    def test_permutation_parity(self, prior3):
        truth = welfare_metrics(prior3, truth_telling_profile(prior3, 4)).to_dict()
        for mapping in ((1, 0, 2), (1, 2, 0), (2, 1, 0)):
            profile = permutation_profile(prior3, 4, PermutationMap(mapping))
            wb = welfare_metrics(prior3, profile).to_dict()
            for key in truth:
                assert wb[key] == pytest.approx(truth[key], abs=1e-12)

    def test_constant_report_all_zero(self, prior3):
        wb = welfare_metrics(prior3, constant_report_profile(prior3, 4, 0))
        assert wb.to_dict() == {
            "diversity": 0.0,
            "inconsistency": 0.0,
            "total_divergence": 0.0,
            "classification_score": 0.0,
            "average_welfare": 0.0,
        }

    def test_matches_nested_loop_oracle(self, prior3):
        rng = np.random.default_rng(4)
        for _ in range(3):
            profile = random_profile(rng, 3, 4)
            wb = welfare_metrics(prior3, profile)
            div, inc, total = welfare_oracle(prior3, profile)
            assert wb.diversity == pytest.approx(div, abs=1e-13)
            assert wb.inconsistency == pytest.approx(inc, abs=1e-13)
            assert wb.total_divergence == pytest.approx(total, abs=1e-13)

    def test_identity_and_ordering(self, prior3):
        rng = np.random.default_rng(5)
        for _ in range(50):
            profile = random_profile(rng, 3, 4)
            wb = welfare_metrics(prior3, profile)
            assert wb.classification_score == wb.diversity - wb.inconsistency
            assert wb.total_divergence >= wb.diversity - 1e-15
            assert wb.average_welfare == wb.classification_score


class TestMonteCarlo:
    def test_deterministic_per_seed(self, latent3):
        prior = from_latent(latent3)
        config = MechanismConfig(1.0, 0.03, "log", "disagreement")
        profile = truth_telling_profile(prior, 4)
        a = monte_carlo_payments(config, latent3, profile, trials=2000, seed=5)
        b = monte_carlo_payments(config, latent3, profile, trials=2000, seed=5)
        assert np.array_equal(a.mean, b.mean)
        assert a.welfare_mean == b.welfare_mean

    def test_identical_reports_zero_variance(self, latent3):
        prior = from_latent(latent3)
        config = MechanismConfig(1.0, 0.5, "quadratic")
        profile = constant_report_profile(prior, 4, target=1)
        mc = monte_carlo_payments(config, latent3, profile, trials=500, seed=1)
        assert np.allclose(mc.stderr, 0.0)
        assert np.allclose(mc.mean, 2.0 - 1.0)  # point-mass quadratic score

    def test_truthful_variant_matches_exact_payoff(self, latent3):
        from peerpred.equilibrium import expected_conditional_payoff

        prior = from_latent(latent3)
        config = MechanismConfig(1.0, 0.04, "log")
        profile = truth_telling_profile(prior, 5)
        mc = monte_carlo_payments(config, latent3, profile, trials=60_000, seed=2)
        exact = np.array(
            [
                sum(
                    prior.marginal[s] * expected_conditional_payoff(config, prior, profile, i, s)
                    for s in range(3)
                )
                for i in range(5)
            ]
        )
        assert np.all(np.abs(mc.mean - exact) <= 5.0 * mc.stderr + 1e-12)

    def test_disagreement_welfare_consistency(self, latent3):
        prior = from_latent(latent3)
        config = MechanismConfig(1.0, 1.0 / 24.0, "log", "disagreement")
        profile = truth_telling_profile(prior, 6)
        mc = monte_carlo_payments(config, latent3, profile, trials=50_000, seed=3)
        exact = welfare_metrics(prior, profile).classification_score
        assert abs(mc.welfare_mean - exact) <= 5.0 * mc.welfare_stderr

    def test_needs_positive_trials(self, latent3):
        prior = from_latent(latent3)
        with pytest.raises(MechanismError):
            monte_carlo_payments(
                MechanismConfig(), latent3, truth_telling_profile(prior, 4), trials=0
            )
