import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from objlab.empowerment import (
    AF,
    AP,
    OF,
    OP,
    XF,
    XP,
    SequenceDesire,
    SequenceModel,
    empowerment_entropy_identity,
    empowerment_mi,
    past_divergence_delta_check,
    random_sequence_desire,
    random_sequence_model,
    sequence_divergence_decomposition,
    sequence_terms,
)
from objlab.probcore import ProbabilityError, mutual_information
from objlab.sampling import dirichlet, dirichlet_rows, trial_rng

import oracles

seeds = st.integers(0, 2**32 - 1)


def _delta(n, i):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def _small(rng, p_future, n_op=2, n_of=2):
    n_xp, n_ap, n_xf = p_future.shape[:3]
    p_past = dirichlet_rows(rng, n_op, n_xp * n_ap).reshape(n_op, n_xp, n_ap)
    return SequenceModel(_delta(n_op, 0), p_past, p_future, dirichlet_rows(rng, n_xf, n_of))


def _arrays(seq):
    return [np.asarray(f.rows if hasattr(f, "rows") else f.probs) for f in seq.factors]


def _oracle_truth(seq, desire):
    p_op, p_past, p_future, p_obs = (a.tolist() for a in _arrays(seq))
    return oracles.sequence_truth(p_op, p_past, p_future, p_obs, desire.desire_past.tolist(), desire.desire_future.tolist())


class TestModel:
    def test_joint_normalized(self):
        seq = random_sequence_model(trial_rng(1, 0))
        assert seq.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert seq.joint.names == (OP, XP, AP, XF, AF, OF)

    def test_shape_mismatch(self):
        with pytest.raises(ProbabilityError):
            SequenceModel([1.0], np.ones((1, 2, 1)) / 2, np.ones((3, 1, 2, 2)) / 4, np.eye(2))

    def test_unnormalized_desire(self):
        with pytest.raises(ProbabilityError):
            SequenceDesire(np.array([0.5, 0.6]), np.array([1.0]))

    def test_delta_flag(self):
        assert random_sequence_model(trial_rng(2, 0)).past_is_delta
        assert not random_sequence_model(trial_rng(2, 0), delta_past=False).past_is_delta


class TestEmpowerment:
    def test_actions_independent_of_future_state(self):
        rng = trial_rng(3, 0)
        p_xf = dirichlet_rows(rng, 4, 3).reshape(2, 2, 3)
        p_af = dirichlet_rows(rng, 4, 2).reshape(2, 2, 2)
        p_future = p_xf[..., :, None] * p_af[..., None, :]
        assert empowerment_mi(_small(rng, p_future)) == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_invertible_control(self, k):
        p_future = np.tile(np.eye(k) / k, (2, 2, 1, 1))
        seq = _small(trial_rng(4, k), p_future)
        assert empowerment_mi(seq) == pytest.approx(math.log(k), abs=1e-14)

    def test_future_independent_of_past_has_no_filtering(self):
        rng = trial_rng(5, 0)
        p_future = np.tile(dirichlet(rng, 6).reshape(3, 2), (2, 2, 1, 1))
        seq = _small(rng, p_future)
        terms = sequence_terms(seq, SequenceDesire(np.full(2, 0.5), np.full(2, 0.5)))
        assert terms["Latent Filtering Information"] == pytest.approx(0.0, abs=1e-14)
        assert empowerment_mi(seq) >= 0.0

    @given(seeds)
    def test_entropy_identity(self, seed):
        rep = empowerment_entropy_identity(random_sequence_model(trial_rng(seed, 1), delta_past=bool(seed % 2)))
        assert rep.passed
        assert rep.terms["Empowerment"] >= 0.0

    @given(seeds)
    def test_permuting_future_states(self, seed):
        rng = trial_rng(seed, 2)
        seq = random_sequence_model(rng)
        desire = random_sequence_desire(rng, seq)
        _, p_past, p_future, p_obs = _arrays(seq)
        perm = rng.permutation(p_future.shape[2])
        permuted = SequenceModel(seq.p_o_past, p_past, p_future[:, :, perm, :], p_obs[perm])
        a, b = sequence_terms(seq, desire), sequence_terms(permuted, desire)
        for name in a:
            assert b[name] == pytest.approx(a[name], abs=1e-12), name

    def test_observation_screened_by_future_state(self):
        seq = random_sequence_model(trial_rng(6, 0), delta_past=False)
        assert mutual_information(seq.joint, [OF], [OP, XP, AP, AF], given=[XF]) == pytest.approx(0.0, abs=1e-14)


class TestDecomposition:
    @given(seeds)
    def test_delta_past_exact(self, seed):
        rng = trial_rng(seed, 3)
        seq = random_sequence_model(rng)
        desire = random_sequence_desire(rng, seq)
        rep = sequence_divergence_decomposition(seq, desire)
        assert rep.passed
        assert rep.condition_flags["decomposition_exact"]
        assert rep.terms["Sequence Divergence"] == pytest.approx(_oracle_truth(seq, desire), abs=1e-12)

    @given(seeds)
    def test_general_past_excess(self, seed):
        rng = trial_rng(seed, 4)
        seq = random_sequence_model(rng, delta_past=False)
        desire = random_sequence_desire(rng, seq)
        rep = sequence_divergence_decomposition(seq, desire)
        assert rep.passed
        assert rep.terms["Decomposition Excess"] == pytest.approx(rep.terms["Past-Future Latent Information"], abs=1e-10)
        assert rep.terms["Sequence Divergence"] == pytest.approx(_oracle_truth(seq, desire), abs=1e-12)

    def test_required_flags_follow_past(self):
        rng = trial_rng(7, 0)
        seq = random_sequence_model(rng)
        rep = sequence_divergence_decomposition(seq, random_sequence_desire(rng, seq))
        assert "decomposition_exact" in rep.required_flags


class TestPastDelta:
    def _seq(self, n_op=4, obs=2):
        rng = trial_rng(8, 0)
        p_past = dirichlet_rows(rng, n_op, 4).reshape(n_op, 2, 2)
        p_future = dirichlet_rows(rng, 4, 4).reshape(2, 2, 2, 2)
        return SequenceModel(_delta(n_op, obs), p_past, p_future, dirichlet_rows(rng, 2, 3))

    def test_uniform_desire(self):
        rep = past_divergence_delta_check(self._seq(), SequenceDesire(np.full(4, 0.25), np.full(3, 1 / 3)))
        assert rep.lhs == pytest.approx(math.log(4), abs=1e-15)
        assert rep.condition_flags["desire_uniform"]
        assert rep.passed

    def test_desire_on_observed_past(self):
        rep = past_divergence_delta_check(self._seq(), SequenceDesire(_delta(4, 2), np.full(3, 1 / 3)))
        assert rep.lhs == 0.0

    def test_quarter_desire(self):
        rep = past_divergence_delta_check(self._seq(), SequenceDesire(np.array([0.5, 0.2, 0.25, 0.05]), np.full(3, 1 / 3)))
        assert rep.lhs == pytest.approx(math.log(4), abs=1e-15)
        assert not rep.condition_flags["desire_uniform"]

    def test_future_does_not_matter(self):
        rng = trial_rng(9, 0)
        d = SequenceDesire(dirichlet(rng, 4), np.full(2, 0.5))
        values = set()
        for t in range(5):
            r = trial_rng(9, t + 1)
            seq = SequenceModel(_delta(4, 1), dirichlet_rows(r, 4, 4).reshape(4, 2, 2), dirichlet_rows(r, 4, 6).reshape(2, 2, 3, 2), dirichlet_rows(r, 3, 2))
            values.add(past_divergence_delta_check(seq, d).lhs)
        assert len(values) == 1

    def test_requires_delta(self):
        rng = trial_rng(10, 0)
        seq = random_sequence_model(rng, delta_past=False)
        with pytest.raises(ProbabilityError):
            past_divergence_delta_check(seq, random_sequence_desire(rng, seq))
