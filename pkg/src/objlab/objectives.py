"""Evidence and divergence objectives over a finite generative model.

A ``GenerativeModel`` holds p(x | a) and p(o | x); the predicted observation
distribution for an action is p(o | a) = sum_x p(x | a) p(o | x).  For a
stochastic policy pi, predictions are the pi-mixture of the per-action ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from .probcore import (
    AbsoluteContinuityError,
    CondTable,
    JointTable,
    NORM_TOL,
    ProbabilityError,
    build_joint,
    cross_entropy,
    entropy,
    expected_info_gain,
    kl,
    marginalize,
    mutual_information,
)
from .reports import RelationReport

ActionLike = Union[int, "PolicySimplex"]


@dataclass(frozen=True)
class PolicySimplex:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).copy()
        if w.ndim != 1 or w.size == 0:
            raise ProbabilityError("policy weights must be a non-empty vector")
        if np.any(w < 0) or abs(w.sum() - 1.0) > NORM_TOL:
            raise ProbabilityError(f"policy weights must be a distribution, got {w}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, n: int) -> "PolicySimplex":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def delta(cls, n: int, index: int) -> "PolicySimplex":
        w = np.zeros(n)
        w[index] = 1.0
        return cls(w)

    def __len__(self):
        return self.weights.size


@dataclass(frozen=True)
class DesireDistribution:
    probs: np.ndarray
    rewards: np.ndarray | None = None
    beta: float | None = None
    log_normalizer: float | None = None

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).copy()
        if np.any(p < 0) or abs(p.sum() - 1.0) > NORM_TOL:
            raise ProbabilityError("desire must be a normalized distribution")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, n: int) -> "DesireDistribution":
        return cls(np.full(n, 1.0 / n))

    @property
    def log_probs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.probs)

    def __len__(self):
        return self.probs.size


def desire_from_reward(rewards, beta: float = 1.0, sign: float = 1.0) -> DesireDistribution:
    """Boltzmann desire p~(o) proportional to exp(sign * beta * r(o)).

    ``sign=+1`` makes the highest reward most desired; ``sign=-1`` is the
    literal exp(-r) form kept for fidelity experiments.
    """
    if isinstance(rewards, Mapping):
        rewards = [rewards[k] for k in sorted(rewards)]
    r = np.asarray(rewards, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("rewards must be finite")
    if not beta > 0:
        raise ValueError("beta must be positive")
    if sign not in (1.0, -1.0):
        raise ValueError("sign must be +1 or -1")
    logits = sign * beta * r
    log_z = float(logsumexp(logits))
    return DesireDistribution(np.exp(logits - log_z), rewards=r, beta=float(beta), log_normalizer=log_z)


class GenerativeModel:
    """Action-conditioned latent model p(x | a) p(o | x)."""

    def __init__(self, prior: CondTable, likelihood: CondTable, actions: Sequence | None = None):
        if len(prior.given.names) != 1 or len(prior.target.names) != 1:
            raise ProbabilityError("prior must be a single-variable table p(x | a)")
        if len(likelihood.given.names) != 1 or len(likelihood.target.names) != 1:
            raise ProbabilityError("likelihood must be a single-variable table p(o | x)")
        if likelihood.given.variables != prior.target.variables:
            raise ProbabilityError("likelihood must condition on the prior's latent variable only")
        self.prior = prior
        self.likelihood = likelihood
        n_actions = prior.given.shape[0]
        self.actions = list(actions) if actions is not None else list(range(n_actions))
        if len(self.actions) != n_actions:
            raise ProbabilityError("action labels do not match the prior's action axis")

    @classmethod
    def from_arrays(cls, prior, likelihood, actions=None, names=("a", "x", "o")) -> "GenerativeModel":
        a, x, o = names
        return cls(
            CondTable.from_array(prior, target=[x], given=[a]),
            CondTable.from_array(likelihood, target=[o], given=[x]),
            actions,
        )

    @property
    def action_name(self) -> str:
        return self.prior.given.names[0]

    @property
    def latent_name(self) -> str:
        return self.prior.target.names[0]

    @property
    def obs_name(self) -> str:
        return self.likelihood.target.names[0]

    @property
    def n_actions(self) -> int:
        return self.prior.rows.shape[0]

    @property
    def n_latent(self) -> int:
        return self.prior.rows.shape[1]

    @property
    def n_obs(self) -> int:
        return self.likelihood.rows.shape[1]

    @property
    def prior_array(self) -> np.ndarray:
        return self.prior.rows

    @property
    def likelihood_array(self) -> np.ndarray:
        return self.likelihood.rows

    def _action_weights(self, action: ActionLike) -> np.ndarray:
        if isinstance(action, PolicySimplex):
            if len(action) != self.n_actions:
                raise ProbabilityError("policy size does not match the action set")
            return action.weights
        index = int(action)
        if not 0 <= index < self.n_actions:
            raise IndexError(f"action {action} out of range")
        w = np.zeros(self.n_actions)
        w[index] = 1.0
        return w

    def latent_prior(self, action: ActionLike) -> np.ndarray:
        """p(x | a), or the policy mixture of it."""
        return self._action_weights(action) @ self.prior_array

    def predictive(self, action: ActionLike) -> np.ndarray:
        """p(o | a), or the policy mixture of it."""
        return self.latent_prior(action) @ self.likelihood_array

    def joint(self, action: ActionLike) -> JointTable:
        """p(x, o | a) as a table over (x, o)."""
        px = JointTable.from_array(self.latent_prior(action), [self.latent_name])
        return build_joint([px, self.likelihood])

    def joint_array(self, action: ActionLike) -> np.ndarray:
        return self.latent_prior(action)[:, None] * self.likelihood_array

    def posterior(self, action: ActionLike) -> np.ndarray:
        """Exact p(x | o, a) with rows indexed by o; zero-probability rows are zero."""
        j = self.joint_array(action)
        po = j.sum(axis=0)
        safe = np.where(po > 0, po, 1.0)
        return (j / safe).T


def _check_desire(model: GenerativeModel, desire: DesireDistribution) -> None:
    if len(desire) != model.n_obs:
        raise ProbabilityError(f"desire has {len(desire)} outcomes, model has {model.n_obs}")


def evidence_objective(model: GenerativeModel, desire: DesireDistribution, action: ActionLike) -> float:
    """E_{p(o|a)}[ln p~(o)]; -inf when the prediction leaves the desire's support."""
    _check_desire(model, desire)
    return -cross_entropy(model.predictive(action), desire.probs)


def divergence_objective(model: GenerativeModel, desire: DesireDistribution, action: ActionLike) -> float:
    """KL[p(o|a) || p~(o)]."""
    _check_desire(model, desire)
    return kl(model.predictive(action), desire.probs)


def _desire_divergence(model: GenerativeModel, desire: DesireDistribution, action: ActionLike) -> float:
    px = model.latent_prior(action)
    return math.fsum(w * kl(row, desire.probs) for w, row in zip(px, model.likelihood_array) if w > 0)


def _likelihood_entropy(model: GenerativeModel, weights) -> float:
    return math.fsum(w * entropy(row) for w, row in zip(weights, model.likelihood_array) if w > 0)


def _info_gain(model: GenerativeModel, action: ActionLike) -> float:
    return expected_info_gain(model.joint(action), model.latent_name, model.obs_name)


def evidence_as_divergence(model, desire, action, tol: float = 1e-10) -> RelationReport:
    """Evidence = -KL[p(o|a) || p~] - H[p(o|a)]."""
    p = model.predictive(action)
    return RelationReport(
        "evidence_as_divergence",
        terms={
            "Evidence Objective": evidence_objective(model, desire, action),
            "Divergence": kl(p, desire.probs),
            "Expected Future Entropy": entropy(p),
        },
        coefficients={"Divergence": -1.0, "Expected Future Entropy": -1.0},
        lhs=evidence_objective(model, desire, action),
        tolerance=tol,
    )


def divergence_as_evidence(model, desire, action, tol: float = 1e-10) -> RelationReport:
    """KL[p(o|a) || p~] = -H[p(o|a)] - Evidence."""
    p = model.predictive(action)
    div = kl(p, desire.probs)
    return RelationReport(
        "divergence_as_evidence",
        terms={
            "Divergence Objective": div,
            "Expected Future Entropy": entropy(p),
            "Evidence Objective": evidence_objective(model, desire, action),
        },
        coefficients={"Expected Future Entropy": -1.0, "Evidence Objective": -1.0},
        lhs=div,
        tolerance=tol,
    )


def divergence_latent_decomposition(model, desire, action, tol: float = 1e-10) -> RelationReport:
    """KL[p(o|a) || p~] = E_{p(x|a)} KL[p(o|x) || p~] - E_{p(o|a)} KL[p(x|o,a) || p(x|a)]."""
    div = divergence_objective(model, desire, action)
    return RelationReport(
        "divergence_latent_decomposition",
        terms={
            "Divergence Objective": div,
            "Desire Divergence": _desire_divergence(model, desire, action),
            "Information Gain": _info_gain(model, action),
        },
        coefficients={"Desire Divergence": 1.0, "Information Gain": -1.0},
        lhs=div,
        tolerance=tol,
    )


def entropy_latent_identity(model, action, tol: float = 1e-10) -> RelationReport:
    """H[p(o|a)] = E_{p(x|a)} H[p(o|x)] + information gain."""
    h = entropy(model.predictive(action))
    return RelationReport(
        "entropy_latent_identity",
        terms={
            "Marginal Entropy": h,
            "Likelihood Entropy": _likelihood_entropy(model, model.latent_prior(action)),
            "Expected Information Gain": _info_gain(model, action),
        },
        coefficients={"Likelihood Entropy": 1.0, "Expected Information Gain": 1.0},
        lhs=h,
        tolerance=tol,
    )


def info_gain_equals_mi(model, action, tol: float = 1e-12) -> RelationReport:
    """Expected information gain of x from o equals I(o; x)."""
    joint = model.joint(action)
    ig = expected_info_gain(joint, model.latent_name, model.obs_name)
    mi = mutual_information(joint, model.obs_name, model.latent_name)
    return RelationReport(
        "info_gain_equals_mi",
        terms={"Information Gain": ig, "Mutual Information": mi},
        coefficients={"Mutual Information": 1.0},
        lhs=ig,
        tolerance=tol,
    )


def kl_control_objective(state_model: CondTable, desire_x: DesireDistribution, action: ActionLike) -> float:
    """KL[p(x|a) || p~(x)]: the divergence objective with fully observed state."""
    n = state_model.target.shape[0]
    x = state_model.target.names[0]
    identity = CondTable.from_array(np.eye(n), target=[f"{x}_obs"], given=[x])
    return divergence_objective(GenerativeModel(state_model, identity), desire_x, action)


def best_action(model: GenerativeModel, desire: DesireDistribution, objective: str = "divergence") -> int:
    """Optimal deterministic action; ties go to the lowest index."""
    if objective == "divergence":
        scores = [-divergence_objective(model, desire, a) for a in range(model.n_actions)]
    elif objective == "evidence":
        scores = [evidence_objective(model, desire, a) for a in range(model.n_actions)]
    else:
        raise ValueError(f"unknown objective {objective!r}")
    return int(np.argmax(scores))


def predictive_table(model: GenerativeModel, action: ActionLike) -> JointTable:
    return marginalize(model.joint(action), [model.obs_name])


__all__ = [
    "AbsoluteContinuityError",
    "DesireDistribution",
    "GenerativeModel",
    "PolicySimplex",
    "best_action",
    "desire_from_reward",
    "divergence_as_evidence",
    "divergence_latent_decomposition",
    "divergence_objective",
    "entropy_latent_identity",
    "evidence_as_divergence",
    "evidence_objective",
    "info_gain_equals_mi",
    "kl_control_objective",
    "predictive_table",
]
