"""Identities and bounds linking the two objectives to existing frameworks.

Factor conventions (fixed here, used everywhere below):

* EFE:   q(o, x) = p(o | x) q(x);  p~(o, x) = p~(o) p(x | o), with p(x | o)
         the model's exact posterior under p(x | a).
* APDM:  A(o, x) = q(x | o) p(o);   T(o, x) = p(o, x) p~(o)  (unnormalized).

All log-quantities are in nats and every term is evaluated by its own
enumeration, so a closing identity is a genuine check rather than a rewrite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .objectives import (
    ActionLike,
    DesireDistribution,
    GenerativeModel,
    PolicySimplex,
    desire_from_reward,
    evidence_objective,
)
from .probcore import (
    JointTable,
    NORM_TOL,
    ProbabilityError,
    entropy,
    expected_info_gain,
    kl,
    marginalize,
)
from .reports import BOUND, DEFAULT_BOUND_TOL, IDENTITY, REPORT_ONLY, RelationReport

TIE_TOL = 1e-12


@dataclass(frozen=True)
class VariationalBelief:
    """q(x), optionally an explicit q(x | o) (rows indexed by o), optionally q(a)."""

    q_x: np.ndarray
    q_x_given_o: np.ndarray | None = None
    q_a: PolicySimplex | None = None

    def __post_init__(self):
        q_x = np.asarray(self.q_x, dtype=float)
        if np.any(q_x < 0) or abs(q_x.sum() - 1.0) > NORM_TOL:
            raise ProbabilityError("q(x) must be a normalized distribution")
        object.__setattr__(self, "q_x", q_x)
        if self.q_x_given_o is not None:
            rows = np.asarray(self.q_x_given_o, dtype=float)
            if rows.ndim != 2 or rows.shape[1] != q_x.size:
                raise ProbabilityError("q(x | o) must have shape (n_obs, n_latent)")
            if np.any(rows < 0) or np.any(np.abs(rows.sum(axis=1) - 1.0) > NORM_TOL):
                raise ProbabilityError("q(x | o) rows must be normalized")
            object.__setattr__(self, "q_x_given_o", rows)

    @classmethod
    def exact(cls, model: GenerativeModel, action: ActionLike = 0) -> "VariationalBelief":
        """q(x) = p(x | a) and q(x | o) = p(x | o, a)."""
        return cls(model.latent_prior(action), model.posterior(action))


def _xlogy_sum(weights: np.ndarray, values: np.ndarray) -> float:
    """sum w * v over w > 0, inf if any such v is -inf/+inf."""
    mask = weights > 0
    return math.fsum((weights[mask] * values[mask]).ravel())


def _log(a) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(a)


def _row_kl_mean(weights, rows_p, rows_q, allow_unnormalized=False) -> float:
    return math.fsum(
        w * kl(p, q, allow_unnormalized=allow_unnormalized) for w, p, q in zip(weights, rows_p, rows_q) if w > 0
    )


def _normalize_rows(joint_xo: np.ndarray) -> np.ndarray:
    """Rows p(x | o) (indexed by o) from a (x, o) joint; zero columns give zero rows."""
    po = joint_xo.sum(axis=0)
    safe = np.where(po > 0, po, 1.0)
    return (joint_xo / safe).T


def _as_marginal(data_marginal, n: int) -> np.ndarray:
    p = np.asarray(getattr(data_marginal, "probs", data_marginal), dtype=float).ravel()
    if p.size != n or np.any(p < 0) or abs(p.sum() - 1.0) > NORM_TOL:
        raise ProbabilityError("data marginal must be a normalized distribution over o")
    return p


# --------------------------------------------------------------------------
# Control as inference
# --------------------------------------------------------------------------


def action_evidences(model: GenerativeModel, desire: DesireDistribution) -> np.ndarray:
    return np.array([evidence_objective(model, desire, a) for a in range(model.n_actions)])


def _prior_or_uniform(prior_a: PolicySimplex | None, n: int) -> PolicySimplex:
    return prior_a if prior_a is not None else PolicySimplex.uniform(n)


def elbo(q_a: PolicySimplex, prior_a: PolicySimplex | None, model: GenerativeModel, desire: DesireDistribution) -> float:
    """E_q[Evidence(a)] - KL[q(a) || p(a)]."""
    prior_a = _prior_or_uniform(prior_a, model.n_actions)
    ev = action_evidences(model, desire)
    return _xlogy_sum(q_a.weights, ev) - kl(q_a.weights, prior_a.weights)


def log_evidence(model: GenerativeModel, desire: DesireDistribution, prior_a: PolicySimplex | None = None) -> float:
    """ln sum_a p(a) exp(Evidence(a))."""
    prior_a = _prior_or_uniform(prior_a, model.n_actions)
    return float(logsumexp(action_evidences(model, desire), b=prior_a.weights))


def action_posterior(model: GenerativeModel, desire: DesireDistribution, prior_a: PolicySimplex | None = None) -> PolicySimplex:
    """Boltzmann posterior q*(a) proportional to p(a) exp(Evidence(a))."""
    prior_a = _prior_or_uniform(prior_a, model.n_actions)
    logits = _log(prior_a.weights) + action_evidences(model, desire)
    w = np.exp(logits - logsumexp(logits))
    return PolicySimplex(w / w.sum())


def cai_objective(q_a: PolicySimplex, model: GenerativeModel, rewards, beta: float = 1.0) -> float:
    """E_q[E_{p(o|a)}[beta r(o)]] + H[q(a)].

    The reward term is the unnormalized log-desire, so this equals the
    uniform-prior ELBO plus ln|A| plus the Boltzmann log-normalizer.
    """
    r = np.asarray(rewards, dtype=float)
    per_action = np.array([model.predictive(a) @ (beta * r) for a in range(model.n_actions)])
    return float(q_a.weights @ per_action) + entropy(q_a.weights)


def cai_from_elbo(q_a: PolicySimplex, model: GenerativeModel, rewards, beta: float = 1.0) -> float:
    """Independent route to ``cai_objective`` through the ELBO."""
    desire = desire_from_reward(rewards, beta)
    return elbo(q_a, None, model, desire) + math.log(model.n_actions) + desire.log_normalizer


def cai_elbo_identity(q_a: PolicySimplex, model: GenerativeModel, rewards, beta: float = 1.0, tol: float = 1e-10) -> RelationReport:
    """Reward-form objective = ELBO + ln|A| + ln Z, computed along both routes."""
    desire = desire_from_reward(rewards, beta)
    lhs = cai_objective(q_a, model, rewards, beta)
    return RelationReport(
        "cai_elbo_identity",
        terms={
            "Control as Inference Objective": lhs,
            "ELBO": elbo(q_a, None, model, desire),
            "Log Action Count": math.log(model.n_actions),
            "Log Normalizer": desire.log_normalizer,
        },
        coefficients={"ELBO": 1.0, "Log Action Count": 1.0, "Log Normalizer": 1.0},
        lhs=lhs,
        tolerance=tol,
    )


def cai_evidence_bound(model, desire, q_a: PolicySimplex, prior_a=None, tol: float = DEFAULT_BOUND_TOL) -> RelationReport:
    """ln sum_a p(a) exp(Evidence(a)) >= ELBO(q), slack = KL[q || q*]."""
    prior_a = _prior_or_uniform(prior_a, model.n_actions)
    ev = action_evidences(model, desire)
    reward = _xlogy_sum(q_a.weights, ev)
    complexity = kl(q_a.weights, prior_a.weights)
    lhs = log_evidence(model, desire, prior_a)
    to_post = kl(q_a.weights, action_posterior(model, desire, prior_a).weights)
    slack = lhs - (reward - complexity)
    return RelationReport(
        "cai_evidence_bound",
        terms={
            "Log Evidence": lhs,
            "Reward Maximization": reward,
            "Action Complexity": complexity,
            "KL to Action Posterior": to_post,
        },
        coefficients={"Reward Maximization": 1.0, "Action Complexity": -1.0},
        lhs=lhs,
        kind=BOUND,
        tolerance=tol,
        condition_flags={
            "equality": abs(slack) <= 1e-12,
            "slack_matches_posterior_kl": abs(slack - to_post) <= 1e-10,
        },
        required_flags=("slack_matches_posterior_kl",),
    )


# --------------------------------------------------------------------------
# Expected free energy
# --------------------------------------------------------------------------


class _EFETerms:
    """Shared arrays for the EFE relations at one action."""

    def __init__(self, q: VariationalBelief, model: GenerativeModel, desire: DesireDistribution, action: ActionLike):
        if q.q_x.size != model.n_latent:
            raise ProbabilityError("q(x) does not match the model's latent space")
        self.lik = model.likelihood_array  # (x, o)
        self.q_x = q.q_x
        self.q_xo = self.q_x[:, None] * self.lik
        self.q_o = self.q_xo.sum(axis=0)
        self.q_post = _normalize_rows(self.q_xo)  # q(x | o), rows o
        self.p_post = model.posterior(action)  # p(x | o), rows o
        self.desire = desire.probs
        self.joint_desire = (self.desire[:, None] * self.p_post).T  # p~(o, x) as (x, o)
        self.model = model
        self.action = action

    def efe(self) -> float:
        with np.errstate(invalid="ignore"):  # inf - inf only off the support of q_xo
            vals = _log(self.q_x)[:, None] - _log(self.desire)[None, :] - _log(self.p_post.T)
        return _xlogy_sum(self.q_xo, vals)

    def extrinsic(self) -> float:
        return _xlogy_sum(self.q_o, _log(self.desire))

    def info_gain(self) -> float:
        return expected_info_gain(JointTable.from_array(self.q_xo, ["x", "o"]), "x", "o")

    def posterior_divergence(self) -> float:
        return _row_kl_mean(self.q_o, self.q_post, self.p_post)


def efe(q: VariationalBelief, model: GenerativeModel, desire: DesireDistribution, action: ActionLike = 0) -> float:
    """G = E_{q(o,x)}[ln q(x) - ln p~(o, x)]."""
    return _EFETerms(q, model, desire, action).efe()


def efe_epistemic_decomposition(q, model, desire, action: ActionLike = 0, tol: float = 1e-10) -> RelationReport:
    """G = -E_{q(o)}[ln p~(o)] - IG_q + PostDiv_q."""
    t = _EFETerms(q, model, desire, action)
    g = t.efe()
    return RelationReport(
        "efe_epistemic_decomposition",
        terms={
            "EFE": g,
            "Extrinsic Value": t.extrinsic(),
            "Information Gain": t.info_gain(),
            "Posterior Divergence": t.posterior_divergence(),
        },
        coefficients={"Extrinsic Value": -1.0, "Information Gain": -1.0, "Posterior Divergence": 1.0},
        lhs=g,
        tolerance=tol,
        notes={"extrinsic_value": "uses ln p~(o); the log is required for the identity to close"},
    )


def efe_risk_ambiguity(q, model, desire, action: ActionLike = 0, tol: float = 1e-10) -> RelationReport:
    """G = E_{q(x)} H[p(o|x)] + KL[q(x) || p~(x)] + E_{q(x)} KL[p(o|x) || p~(o|x)]."""
    t = _EFETerms(q, model, desire, action)
    g = t.efe()
    desire_x = t.joint_desire.sum(axis=1)
    safe = np.where(desire_x > 0, desire_x, 1.0)
    desire_o_given_x = t.joint_desire / safe[:, None]
    ambiguity = math.fsum(w * entropy(row) for w, row in zip(t.q_x, t.lik) if w > 0)
    # p~(x) loses mass when p~ covers an o the model never emits; the split still closes.
    normalized = abs(desire_x.sum() - 1.0) <= 1e-9
    risk = kl(t.q_x, desire_x, allow_unnormalized=True)
    lik_div = _row_kl_mean(t.q_x, t.lik, desire_o_given_x)
    return RelationReport(
        "efe_risk_ambiguity",
        terms={"EFE": g, "Ambiguity": ambiguity, "Risk": risk, "Likelihood Divergence": lik_div},
        coefficients={"Ambiguity": 1.0, "Risk": 1.0, "Likelihood Divergence": 1.0},
        lhs=g,
        tolerance=tol,
        condition_flags={"desire_joint_normalized": normalized},
    )


def efe_evidence_relation(q, model, desire, action: ActionLike = 0, tol: float = 1e-10) -> RelationReport:
    """Evidence_q = -G - IG_q + PostDiv_q, so -G >= Evidence_q iff IG_q >= PostDiv_q."""
    t = _EFETerms(q, model, desire, action)
    g, ig, pd, ev = t.efe(), t.info_gain(), t.posterior_divergence(), t.extrinsic()
    ig_ge_pd = ig - pd >= -TIE_TOL
    bound = -g - ev >= -TIE_TOL
    return RelationReport(
        "efe_evidence_relation",
        terms={"Evidence Objective": ev, "EFE": g, "Information Gain": ig, "Posterior Divergence": pd},
        coefficients={"EFE": -1.0, "Information Gain": -1.0, "Posterior Divergence": 1.0},
        lhs=ev,
        tolerance=tol,
        condition_flags={
            "ig_ge_postdiv": ig_ge_pd,
            "bound_holds": bound,
            "flags_agree": ig_ge_pd == bound,
            "stated_condition_ig_ge_postdiv": ig_ge_pd,
            "stated_condition_ig_lt_postdiv": not ig_ge_pd,
        },
        required_flags=("flags_agree",),
        notes={"bound_holds": "-EFE >= Evidence Objective"},
    )


def _belief_posterior(q: VariationalBelief, model: GenerativeModel) -> np.ndarray:
    """Explicit q(x | o) if given, else the posterior of p(o | x) q(x)."""
    if q.q_x_given_o is not None:
        if q.q_x_given_o.shape != (model.n_obs, model.n_latent):
            raise ProbabilityError("q(x | o) does not match the model")
        return q.q_x_given_o
    rows = _normalize_rows(q.q_x[:, None] * model.likelihood_array)
    # Observations impossible under q get a flat row; they carry zero weight
    # whenever the data marginal is the model's own prediction.
    empty = rows.sum(axis=1) == 0
    rows[empty] = 1.0 / model.n_latent
    return rows


def _efe_hat(p_o, q_post, q_x, desire) -> float:
    vals = _log(q_x)[None, :] - _log(desire)[:, None] - _log(q_post)
    return _xlogy_sum(p_o[:, None] * q_post, vals)


def efe_divergence_identity(q, model, desire, action: ActionLike = 0, tol: float = 1e-10) -> RelationReport:
    """KL[p(o) || p~(o)] = G_hat + IG_p - H[p(o)], expectations under p(o | a) q(x | o)."""
    p_o = model.predictive(action)
    q_post = _belief_posterior(q, model)
    g_hat = _efe_hat(p_o, q_post, q.q_x, desire.probs)
    ig = _row_kl_mean(p_o, q_post, np.broadcast_to(q.q_x, q_post.shape))
    h = entropy(p_o)
    div = kl(p_o, desire.probs)
    return RelationReport(
        "efe_divergence_identity",
        terms={"Divergence Objective": div, "EFE": g_hat, "Information Gain": ig, "Marginal Entropy": h},
        coefficients={"EFE": 1.0, "Information Gain": 1.0, "Marginal Entropy": -1.0},
        lhs=div,
        tolerance=tol,
        condition_flags={
            "efe_upper_bounds_divergence": g_hat - div >= -TIE_TOL,
            "ig_le_marginal_entropy": h - ig >= -TIE_TOL,
            "stated_condition_ig_gt_marginal_entropy": ig > h,
        },
    )


def _vfe_per_obs(q_post, joint_xo) -> np.ndarray:
    """F(o) = E_{q(x|o)}[ln q(x|o) - ln p(o, x)] for every o."""
    out = np.zeros(q_post.shape[0])
    for o, row in enumerate(q_post):
        if joint_xo[:, o].sum() > 0:  # unreachable o carries zero weight
            out[o] = kl(row, joint_xo[:, o], allow_unnormalized=True)
    return out


def efe_divergence_bound_probe(q, model, desire, action: ActionLike = 0) -> RelationReport:
    """Measure KL[p(o) || p~] against EFE - VFE + IG; nothing is asserted."""
    p_o = model.predictive(action)
    q_post = _belief_posterior(q, model)
    g_hat = _efe_hat(p_o, q_post, q.q_x, desire.probs)
    vfe = _xlogy_sum(p_o, _vfe_per_obs(q_post, model.joint_array(action)))
    ig = _row_kl_mean(p_o, q_post, np.broadcast_to(q.q_x, q_post.shape))
    div = kl(p_o, desire.probs)
    rhs = g_hat - vfe + ig
    vfe_le_ig = vfe <= ig
    holds = div - rhs >= -TIE_TOL
    return RelationReport(
        "efe_divergence_bound_probe",
        terms={"Divergence Objective": div, "EFE": g_hat, "VFE": vfe, "Information Gain": ig},
        coefficients={"EFE": 1.0, "VFE": -1.0, "Information Gain": 1.0},
        lhs=div,
        kind=REPORT_ONLY,
        condition_flags={"vfe_le_ig": vfe_le_ig, "bound_holds": holds, "violation": vfe_le_ig and not holds},
    )


# --------------------------------------------------------------------------
# Action and perception as divergence minimization
# --------------------------------------------------------------------------


def _apdm_parts(q, model, desire, data_marginal, action):
    p_data = model.predictive(action) if data_marginal is None else _as_marginal(data_marginal, model.n_obs)
    q_post = _belief_posterior(q, model)
    actual = (p_data[:, None] * q_post).T  # A(x, o)
    joint = model.joint_array(action)  # p(x, o)
    target = joint * desire.probs[None, :]  # T(x, o), unnormalized
    return p_data, q_post, actual, joint, target


def apdm_objective(q, model, desire, data_marginal=None, action: ActionLike = 0) -> float:
    """J = KL[q(x|o) p(o) || p(o, x) p~(o)] against the unnormalized target."""
    _, _, actual, _, target = _apdm_parts(q, model, desire, data_marginal, action)
    return kl(actual, target, allow_unnormalized=True)


def apdm_split(q, model, desire, data_marginal=None, action: ActionLike = 0, tol: float = 1e-10) -> RelationReport:
    """J = E_{p(o)} F(o) + KL[p(o) || p~(o)], with F the per-observation free energy."""
    p_data, q_post, actual, joint, target = _apdm_parts(q, model, desire, data_marginal, action)
    j = kl(actual, target, allow_unnormalized=True)
    f = _vfe_per_obs(q_post, joint)
    vfe = _xlogy_sum(p_data, f)
    div = kl(p_data, desire.probs)
    p_model = joint.sum(axis=0)
    seen = p_data > 0
    return RelationReport(
        "apdm_split",
        terms={"APDM Objective": j, "Variational Free Energy": vfe, "Divergence Objective": div},
        coefficients={"Variational Free Energy": 1.0, "Divergence Objective": 1.0},
        lhs=j,
        tolerance=tol,
        condition_flags={
            "free_energy_ge_surprisal": bool(np.all(f[seen] + _log(p_model[seen]) >= -TIE_TOL)),
            "apdm_ge_divergence": j - div >= -TIE_TOL,
        },
        required_flags=("free_energy_ge_surprisal", "apdm_ge_divergence"),
    )


def apdm_info_bound(q, model, target_posterior=None, data_marginal=None, action: ActionLike = 0, tol: float = 1e-10) -> RelationReport:
    """E_A[ln T(x|o) - ln A(x)] = IG_A - E_{A(o)} KL[A(x|o) || T(x|o)] <= IG_A."""
    p_data = model.predictive(action) if data_marginal is None else _as_marginal(data_marginal, model.n_obs)
    q_post = _belief_posterior(q, model)
    t_post = model.posterior(action) if target_posterior is None else np.asarray(target_posterior, dtype=float)
    actual = (p_data[:, None] * q_post).T  # A(x, o)
    a_x = actual.sum(axis=1)
    bound = _xlogy_sum(actual, _log(t_post.T) - _log(a_x)[:, None])
    ig = expected_info_gain(JointTable.from_array(actual, ["x", "o"]), "x", "o")
    pd = _row_kl_mean(p_data, q_post, t_post)
    return RelationReport(
        "apdm_info_bound",
        terms={"Information Bound": bound, "Information Gain": ig, "Posterior Divergence": pd},
        coefficients={"Information Gain": 1.0, "Posterior Divergence": -1.0},
        lhs=bound,
        tolerance=tol,
        condition_flags={"bound_le_info_gain": bound <= ig + DEFAULT_BOUND_TOL},
        required_flags=("bound_le_info_gain",),
        notes={"direction": "the information bound is a lower bound on the information gain"},
    )


def joint_vs_marginal_divergence(p_joint: JointTable, target_joint: JointTable, obs: str = "o", tol: float = 1e-10) -> RelationReport:
    """KL[p(o,x) || p~(o,x)] = KL[p(o) || p~(o)] + E_{p(o)} KL[p(x|o) || p~(x|o)]."""
    names = (obs,) + tuple(n for n in p_joint.names if n != obs)
    p = p_joint.transpose(names).probs.reshape(p_joint.space.card(obs), -1)
    t = target_joint.transpose(names).probs.reshape(p.shape)
    joint_kl = kl(p, t)
    p_o, t_o = p.sum(axis=1), t.sum(axis=1)
    marginal = kl(p_o, t_o)
    post = math.fsum(w * kl(p[o] / w, t[o] / t_o[o]) for o, w in enumerate(p_o) if w > 0)
    return RelationReport(
        "joint_vs_marginal_divergence",
        terms={"Joint Divergence": joint_kl, "Divergence Objective": marginal, "Posterior Divergence": post},
        coefficients={"Divergence Objective": 1.0, "Posterior Divergence": 1.0},
        lhs=joint_kl,
        tolerance=tol,
        condition_flags={"joint_ge_marginal": joint_kl - marginal >= -TIE_TOL},
        required_flags=("joint_ge_marginal",),
    )


def apdm_evidence_bound(q, model, desire, target_posterior=None, data_marginal=None, action: ActionLike = 0, tol: float = DEFAULT_BOUND_TOL) -> RelationReport:
    """E_{p(o)}[ln sum_x p~(o,x)] >= -J_APDM + E_{p(o)q(x|o)}[ln p~(x|o) - ln p(x|o)].

    The desire joint is p~(o, x) = p~(o) p~(x | o) with ``target_posterior``
    as p~(x | o) (default: the model posterior).
    """
    p_data, q_post, actual, joint, target = _apdm_parts(q, model, desire, data_marginal, action)
    t_post = model.posterior(action) if target_posterior is None else np.asarray(target_posterior, dtype=float)
    desire_joint = desire.probs[:, None] * t_post  # (o, x)
    lhs = _xlogy_sum(p_data, _log(desire_joint.sum(axis=1)))
    j = kl(actual, target, allow_unnormalized=True)
    d = _xlogy_sum(actual.T, _log(t_post) - _log(model.posterior(action)))
    slack = lhs - (-j + d)
    return RelationReport(
        "apdm_evidence_bound",
        terms={
            "Expected Log Desire": lhs,
            "APDM Objective": j,
            "Posterior Divergence Bound": d,
            "Approximate Bound Gap": lhs + j,
        },
        coefficients={"APDM Objective": -1.0, "Posterior Divergence Bound": 1.0},
        lhs=lhs,
        kind=BOUND,
        tolerance=tol,
        condition_flags={"equality": abs(slack) <= 1e-12},
    )


def apdm_generic_split(actual: np.ndarray, target_o: np.ndarray, target_x_given_o: np.ndarray, tol: float = 1e-10) -> RelationReport:
    """KL[A || T] = E_{A(x)} KL[A(o|x) || T(o)] - E_A[ln T(x|o) - ln A(x)] for T(o,x) = T(o) T(x|o).

    ``actual`` is A(x, o); ``target_x_given_o`` has rows indexed by o.  Neither
    target factor needs to be normalized.
    """
    actual = np.asarray(actual, dtype=float)
    target = (np.asarray(target_o)[:, None] * np.asarray(target_x_given_o)).T  # (x, o)
    lhs = kl(actual, target, allow_unnormalized=True)
    a_x = actual.sum(axis=1)
    a_o_given_x = actual / np.where(a_x > 0, a_x, 1.0)[:, None]
    realize = math.fsum(w * kl(row, target_o, allow_unnormalized=True) for w, row in zip(a_x, a_o_given_x) if w > 0)
    bound = _xlogy_sum(actual, _log(np.asarray(target_x_given_o).T) - _log(a_x)[:, None])
    return RelationReport(
        "apdm_generic_split",
        terms={"APDM Objective": lhs, "Realizing Latent Preferences": realize, "Information Bound": bound},
        coefficients={"Realizing Latent Preferences": 1.0, "Information Bound": -1.0},
        lhs=lhs,
        tolerance=tol,
    )


def apdm_realize_preferences_split(q, model, desire, data_marginal=None, action: ActionLike = 0, tol: float = 1e-10) -> RelationReport:
    """Generic APDM split for A = q(x|o) p(o), with T(o) := p~(o) and T(x|o) := p(o, x)."""
    _, _, actual, joint, _ = _apdm_parts(q, model, desire, data_marginal, action)
    report = apdm_generic_split(actual, desire.probs, joint.T, tol=tol)
    report.relation_id = "apdm_realize_preferences_split"
    report.notes["factors"] = "T(o) = p~(o); T(x|o) = p(o, x) (unnormalized over x)"
    return report
