import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from objlab.objectives import (
    DesireDistribution,
    GenerativeModel,
    PolicySimplex,
    best_action,
    desire_from_reward,
    divergence_as_evidence,
    divergence_latent_decomposition,
    divergence_objective,
    entropy_latent_identity,
    evidence_as_divergence,
    evidence_objective,
    info_gain_equals_mi,
    kl_control_objective,
)
from objlab.probcore import AbsoluteContinuityError, CondTable, ProbabilityError
from objlab.sampling import random_desire, random_model, trial_rng

import oracles


def _model(prior, lik):
    return GenerativeModel.from_arrays(np.asarray(prior, float), np.asarray(lik, float))


def _bandit(k):
    return _model(np.eye(k), np.eye(k))


seeds = st.integers(0, 2**32 - 1)


class TestDesire:
    def test_equal_rewards_uniform(self):
        np.testing.assert_allclose(desire_from_reward([0.0, 0.0]).probs, [0.5, 0.5])

    def test_log_odds(self):
        np.testing.assert_allclose(desire_from_reward([math.log(9), 0.0]).probs, [0.9, 0.1], atol=1e-15)

    def test_zero_temperature_limit(self):
        assert desire_from_reward([1.0, 0.0], beta=800.0).probs[0] == pytest.approx(1.0, abs=1e-300)

    def test_highest_reward_most_desired(self):
        d = desire_from_reward([0.3, 2.0, -1.0], beta=1.7)
        assert int(np.argmax(d.probs)) == 1
        assert d.log_normalizer == pytest.approx(math.log(np.exp(1.7 * np.array([0.3, 2.0, -1.0])).sum()))

    def test_literal_sign(self):
        d = desire_from_reward([1.0, 0.0], sign=-1.0)
        assert d.probs[1] > d.probs[0]

    def test_mapping_input(self):
        np.testing.assert_allclose(desire_from_reward({1: 0.0, 0: math.log(9)}).probs, [0.9, 0.1], atol=1e-15)

    @pytest.mark.parametrize("bad", [[math.inf, 0.0], [math.nan, 1.0]])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(ValueError):
            desire_from_reward(bad)

    def test_beta_must_be_positive(self):
        with pytest.raises(ValueError):
            desire_from_reward([0.0, 1.0], beta=0.0)


class TestPolicySimplex:
    def test_rejects_unnormalized(self):
        with pytest.raises(ProbabilityError):
            PolicySimplex([0.5, 0.6])

    def test_delta(self):
        assert PolicySimplex.delta(3, 1).weights.tolist() == [0.0, 1.0, 0.0]


class TestObjectives:
    def test_evidence_uniform(self):
        m = _model([[1.0]], [[0.5, 0.5]])
        assert evidence_objective(m, DesireDistribution.uniform(2), 0) == pytest.approx(-math.log(2))

    def test_evidence_delta(self):
        m = _model([[1.0]], [[0.0, 1.0, 0.0]])
        d = DesireDistribution([0.2, 0.3, 0.5])
        assert evidence_objective(m, d, 0) == pytest.approx(math.log(0.3))

    def test_evidence_greedy_bandit(self):
        d = DesireDistribution([0.9, 0.1])
        assert evidence_objective(_bandit(2), d, 0) == pytest.approx(-0.105360515657826301, abs=1e-15)

    def test_evidence_off_support_is_minus_inf(self):
        m = _model([[1.0]], [[0.5, 0.5]])
        assert evidence_objective(m, DesireDistribution([1.0, 0.0]), 0) == -math.inf

    def test_divergence_zero_at_desire(self):
        m = _model([[1.0]], [[0.3, 0.7]])
        assert divergence_objective(m, DesireDistribution([0.3, 0.7]), 0) == pytest.approx(0.0, abs=1e-15)

    def test_divergence_delta_vs_uniform(self):
        m = _model([[1.0]], [[0.0, 0.0, 1.0, 0.0]])
        assert divergence_objective(m, DesireDistribution.uniform(4), 0) == pytest.approx(math.log(4))

    def test_divergence_matching_policy(self):
        d = DesireDistribution([0.9, 0.1])
        assert divergence_objective(_bandit(2), d, PolicySimplex([0.9, 0.1])) == pytest.approx(0.0, abs=1e-15)

    def test_divergence_support_violation(self):
        m = _model([[1.0]], [[0.5, 0.5]])
        with pytest.raises(AbsoluteContinuityError):
            divergence_objective(m, DesireDistribution([1.0, 0.0]), 0)

    def test_space_mismatch(self):
        with pytest.raises(ProbabilityError):
            evidence_objective(_bandit(2), DesireDistribution.uniform(3), 0)

    def test_policy_is_mixture(self):
        m = random_model(trial_rng(7, 0), n_actions=3)
        pi = PolicySimplex([0.2, 0.5, 0.3])
        mix = sum(w * m.predictive(a) for a, w in enumerate(pi.weights))
        np.testing.assert_allclose(m.predictive(pi), mix, atol=1e-15)

    @given(seeds)
    def test_against_loop_oracle(self, seed):
        rng = trial_rng(seed, 0)
        m = random_model(rng)
        d = random_desire(rng, m.n_obs)
        a = int(rng.integers(m.n_actions))
        p = oracles.predictive(m.prior_array[a].tolist(), m.likelihood_array.tolist())
        assert divergence_objective(m, d, a) == pytest.approx(oracles.KL(p, d.probs.tolist()), abs=1e-12)
        assert evidence_objective(m, d, a) == pytest.approx(sum(v * math.log(q) for v, q in zip(p, d.probs)), abs=1e-12)


class TestDecompositions:
    """The evidence equals -KL - H; see the decisions ledger for the sign."""

    def test_evidence_at_desire_is_negative_entropy(self):
        m = _model([[1.0]], [[0.2, 0.3, 0.5]])
        r = evidence_as_divergence(m, DesireDistribution([0.2, 0.3, 0.5]), 0)
        assert r.terms["Divergence"] == pytest.approx(0.0, abs=1e-15)
        assert r.terms["Evidence Objective"] == pytest.approx(-r.terms["Expected Future Entropy"])
        assert r.passed

    def test_evidence_delta(self):
        m = _model([[1.0]], [[0.0, 1.0, 0.0]])
        r = evidence_as_divergence(m, DesireDistribution([0.2, 0.3, 0.5]), 0)
        assert r.terms["Expected Future Entropy"] == 0.0
        assert r.terms["Evidence Objective"] == pytest.approx(math.log(0.3))

    def test_divergence_as_evidence_delta(self):
        m = _model([[1.0]], [[0.0, 1.0, 0.0]])
        r = divergence_as_evidence(m, DesireDistribution([0.2, 0.3, 0.5]), 0)
        assert r.lhs == pytest.approx(-math.log(0.3))
        assert r.passed

    def test_latent_split_deterministic_likelihood(self):
        m = _model([[0.5, 0.5]], np.eye(2))
        r = divergence_latent_decomposition(m, DesireDistribution.uniform(2), 0)
        assert r.terms["Information Gain"] == pytest.approx(math.log(2))
        assert r.terms["Desire Divergence"] == pytest.approx(math.log(2))
        assert r.lhs == pytest.approx(0.0, abs=1e-15)
        assert r.passed

    def test_latent_split_independent(self):
        m = _model([[0.4, 0.6]], [[0.1, 0.9], [0.1, 0.9]])
        r = divergence_latent_decomposition(m, DesireDistribution([0.5, 0.5]), 0)
        assert r.terms["Information Gain"] == pytest.approx(0.0, abs=1e-15)
        assert r.terms["Desire Divergence"] == pytest.approx(r.lhs)

    def test_entropy_identity_deterministic(self):
        m = _model([[0.3, 0.7]], np.eye(2))
        r = entropy_latent_identity(m, 0)
        assert r.terms["Likelihood Entropy"] == 0.0
        assert r.terms["Marginal Entropy"] == pytest.approx(r.terms["Expected Information Gain"])

    def test_entropy_identity_independent(self):
        m = _model([[0.3, 0.7]], [[0.2, 0.8], [0.2, 0.8]])
        r = entropy_latent_identity(m, 0)
        assert r.terms["Expected Information Gain"] == pytest.approx(0.0, abs=1e-15)

    @given(seeds)
    def test_random_residuals(self, seed):
        rng = trial_rng(seed, 1)
        m = random_model(rng)
        d = random_desire(rng, m.n_obs)
        a = int(rng.integers(m.n_actions))
        for r in (
            evidence_as_divergence(m, d, a),
            divergence_as_evidence(m, d, a),
            divergence_latent_decomposition(m, d, a),
            entropy_latent_identity(m, a),
        ):
            assert r.residual < 1e-10, r.relation_id
        assert info_gain_equals_mi(m, a).residual < 1e-12

    @given(seeds)
    def test_terms_against_loop_oracle(self, seed):
        rng = trial_rng(seed, 2)
        m = random_model(rng)
        d = random_desire(rng, m.n_obs)
        a = int(rng.integers(m.n_actions))
        j = oracles.joint_xo(m.prior_array[a].tolist(), m.likelihood_array.tolist())
        r = divergence_latent_decomposition(m, d, a)
        assert r.terms["Information Gain"] == pytest.approx(oracles.info_gain(j), abs=1e-12)
        desire_div = sum(w * oracles.KL(row, d.probs.tolist()) for w, row in zip(m.prior_array[a], m.likelihood_array.tolist()))
        assert r.terms["Desire Divergence"] == pytest.approx(desire_div, abs=1e-12)

    def test_report_names_every_term(self):
        r = divergence_latent_decomposition(_model([[0.5, 0.5]], np.eye(2)), DesireDistribution.uniform(2), 0)
        d = r.to_dict()
        assert set(d["terms"]) == {"Divergence Objective", "Desire Divergence", "Information Gain"}
        assert d["residual"] == pytest.approx(abs(d["lhs"] - d["signed_sum"]), abs=1e-14)


class TestKLControl:
    def test_zero_at_desire(self):
        sm = CondTable.from_array([[0.2, 0.8]], ["x"], ["a"])
        assert kl_control_objective(sm, DesireDistribution([0.2, 0.8]), 0) == pytest.approx(0.0, abs=1e-15)

    def test_delta_vs_uniform(self):
        sm = CondTable.from_array([[0.0, 0.0, 1.0]], ["x"], ["a"])
        assert kl_control_objective(sm, DesireDistribution.uniform(3), 0) == pytest.approx(math.log(3))

    @given(seeds)
    def test_relabeling(self, seed):
        rng = trial_rng(seed, 3)
        m = random_model(rng)
        d = random_desire(rng, m.n_latent)
        relabeled = GenerativeModel.from_arrays(m.prior_array, np.eye(m.n_latent))
        for a in range(m.n_actions):
            assert kl_control_objective(m.prior, d, a) == pytest.approx(divergence_objective(relabeled, d, a), abs=1e-12)


class TestLimitingEquivalence:
    def test_peaked_desire_aligns_rankings(self):
        """Past some beta the two objectives pick the same action on every sampled model."""
        betas = [2.0**k for k in range(0, 7)]
        beta0 = []
        for t in range(40):
            rng = trial_rng(99, t)
            m = random_model(rng, n_actions=4)
            r = rng.normal(size=m.n_obs)
            agree = [best_action(m, desire_from_reward(r, b), "divergence") == best_action(m, desire_from_reward(r, b), "evidence") for b in betas]
            assert agree[-1]
            beta0.append(next(i for i in range(len(betas)) if all(agree[i:])))
        assert max(beta0) < len(betas) - 1

    def test_best_action_tie_breaks_low(self):
        m = _bandit(3)
        assert best_action(m, DesireDistribution.uniform(3), "evidence") == 0
        assert best_action(m, DesireDistribution.uniform(3), "divergence") == 0

    def test_best_action_unknown(self):
        with pytest.raises(ValueError):
            best_action(_bandit(2), DesireDistribution.uniform(2), "greedy")
