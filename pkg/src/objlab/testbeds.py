"""Behavioral testbeds: probability matching in bandits and a two-step information-seeking task."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .objectives import (
    DesireDistribution,
    GenerativeModel,
    PolicySimplex,
    divergence_latent_decomposition,
    divergence_objective,
    evidence_objective,
)
from .probcore import NORM_TOL, ProbabilityError, mutual_information, JointTable
from .reports import RelationReport

MAX_GRID_POINTS = 200_000
MIN_POINTS_PER_DIM = 10


# ---------------------------------------------------------------------------
# simplex search oracle


def simplex_grid(k: int, resolution: float) -> np.ndarray:
    """All points of the K-simplex whose coordinates are multiples of 1/n, n = round(1/resolution)."""
    n = int(round(1.0 / resolution))
    if k == 1:
        return np.ones((1, 1))
    # stars and bars: choose K-1 cut positions among n + K - 1 slots
    cuts = np.array(list(itertools.combinations(range(n + k - 1), k - 1)), dtype=int)
    bounds = np.hstack([np.full((len(cuts), 1), -1), cuts, np.full((len(cuts), 1), n + k - 1)])
    counts = np.diff(bounds, axis=1) - 1
    return counts / n


def _grid_size(k: int, n: int) -> int:
    return math.comb(n + k - 1, k - 1)


def _refine(objective, start: np.ndarray, step: float, final_step: float) -> tuple[np.ndarray, float]:
    """Pairwise mass-transfer descent with a halving step size."""
    k = start.size
    best = start.copy()
    best_val = float(objective(best[None, :])[0])
    pairs = [(i, j) for i in range(k) for j in range(k) if i != j]
    while step >= final_step:
        improved = True
        while improved:
            moves = []
            for i, j in pairs:
                h = min(step, best[j])
                if h <= 0:
                    continue
                cand = best.copy()
                cand[i] += h
                cand[j] -= h
                moves.append(cand)
            if not moves:
                break
            cands = np.array(moves)
            vals = objective(cands)
            idx = int(np.argmin(vals))
            improved = vals[idx] < best_val - 1e-15
            if improved:
                best, best_val = cands[idx], float(vals[idx])
        step /= 2.0
    return best, best_val


def simplex_search(objective, k: int, resolution: float, refine: bool = True) -> np.ndarray:
    """Minimize a vectorized ``objective`` (rows = policies) over the K-simplex.

    The full grid at ``resolution`` is used when it has at most MAX_GRID_POINTS
    entries; otherwise a coarser grid seeds the local refinement.  Grid ties
    go to the point with the most mass on the lowest indices.
    """
    if not 0 < resolution <= 1.0 / MIN_POINTS_PER_DIM:
        raise ValueError(f"resolution {resolution} gives fewer than {MIN_POINTS_PER_DIM} points per dimension")
    if k == 1:
        return np.ones(1)
    n = int(round(1.0 / resolution))
    while _grid_size(k, n) > MAX_GRID_POINTS:
        n //= 2
    grid = simplex_grid(k, 1.0 / n)[::-1]  # ties favor mass on low indices
    vals = objective(grid)
    best = grid[int(np.argmin(vals))]
    if refine:
        best, _ = _refine(objective, best, 1.0 / n, resolution / 16.0)
    return best


def batch_scores(model: GenerativeModel, desire: DesireDistribution, policies: np.ndarray, kind: str) -> np.ndarray:
    """Objective values (lower is better) for many policies at once.

    ``divergence`` gives KL[p_pi(o) || p~]; ``evidence`` gives the negated
    evidence -E_{p_pi(o)}[ln p~(o)] so both are minimized.
    """
    pred = policies @ (model.prior_array @ model.likelihood_array)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_q = np.log(desire.probs)
        cross = np.where(pred > 0, -pred * log_q, 0.0).sum(axis=1)
        if kind == "evidence":
            return cross
        if kind != "divergence":
            raise ValueError(f"unknown objective {kind!r}")
        neg_h = np.where(pred > 0, pred * np.log(np.where(pred > 0, pred, 1.0)), 0.0).sum(axis=1)
    return neg_h + cross


def _vertex_argmax(scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    w = np.zeros(scores.size)
    w[int(np.argmax(scores))] = 1.0
    return w


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())


# ---------------------------------------------------------------------------
# bandits


@dataclass(frozen=True)
class MatchingBandit:
    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 1 or phi.size == 0:
            raise ValueError("phi must be a non-empty vector")
        if np.any(phi < 0) or np.any(phi > 1):
            raise ValueError("phi entries must lie in [0, 1]")
        if not np.any(phi > 0):
            raise ValueError("phi must have at least one positive entry")
        object.__setattr__(self, "phi", phi)

    @property
    def k(self) -> int:
        return self.phi.size

    @property
    def phi_bar(self) -> np.ndarray:
        return self.phi / self.phi.sum()

    def model(self) -> GenerativeModel:
        """Choosing arm a yields observation o = a."""
        eye = np.eye(self.k)
        return GenerativeModel.from_arrays(eye, eye, names=("arm", "x", "o"))

    def desire(self) -> DesireDistribution:
        return DesireDistribution(self.phi_bar)


@dataclass(frozen=True)
class MatchingReport:
    policy_divergence: PolicySimplex
    policy_evidence: PolicySimplex
    target: np.ndarray
    matching_index: float
    scores: dict = field(default_factory=dict)

    @staticmethod
    def index_of(policy, target) -> float:
        return 1.0 - total_variation(policy, target)

    @property
    def evidence_matching_index(self) -> float:
        return self.index_of(self.policy_evidence.weights, self.target)

    def to_dict(self) -> dict:
        return {
            "policy_divergence": self.policy_divergence.weights.tolist(),
            "policy_evidence": self.policy_evidence.weights.tolist(),
            "target": np.asarray(self.target).tolist(),
            "matching_index": self.matching_index,
            "evidence_matching_index": self.evidence_matching_index,
            "scores": dict(self.scores),
        }


def _report(model, desire, pi_div, pi_ev, target) -> MatchingReport:
    pi_div, pi_ev = PolicySimplex(pi_div / pi_div.sum()), PolicySimplex(pi_ev)
    scores = {
        "divergence_of_divergence_policy": divergence_objective(model, desire, pi_div),
        "divergence_of_evidence_policy": divergence_objective(model, desire, pi_ev),
        "evidence_of_divergence_policy": evidence_objective(model, desire, pi_div),
        "evidence_of_evidence_policy": evidence_objective(model, desire, pi_ev),
    }
    target = np.asarray(target, dtype=float)
    return MatchingReport(pi_div, pi_ev, target, MatchingReport.index_of(pi_div.weights, target), scores)


def matching_bandit_policies(bandit: MatchingBandit) -> MatchingReport:
    """Closed-form optima: KL[pi || phi_bar] is minimized at phi_bar; evidence at argmax phi."""
    model, desire = bandit.model(), bandit.desire()
    with np.errstate(divide="ignore"):
        pi_ev = _vertex_argmax(np.log(bandit.phi_bar))
    return _report(model, desire, bandit.phi_bar.copy(), pi_ev, bandit.phi_bar)


def matching_bandit_search(bandit: MatchingBandit, resolution: float = 1e-3) -> MatchingReport:
    """The same optima found by brute force over the policy simplex."""
    model, desire = bandit.model(), bandit.desire()
    pi_div = simplex_search(lambda P: batch_scores(model, desire, P, "divergence"), bandit.k, resolution)
    pi_ev = simplex_search(lambda P: batch_scores(model, desire, P, "evidence"), bandit.k, resolution, refine=False)
    return _report(model, desire, pi_div, pi_ev, bandit.phi_bar)


def bernoulli_model(theta) -> GenerativeModel:
    """Arm a yields the joint observation (a, r) with r ~ Bernoulli(theta_a); index 2a + r."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size == 0 or np.any(theta < 0) or np.any(theta > 1):
        raise ValueError("theta must be a vector of probabilities")
    k = theta.size
    lik = np.zeros((k, 2 * k))
    lik[np.arange(k), 2 * np.arange(k)] = 1.0 - theta
    lik[np.arange(k), 2 * np.arange(k) + 1] = theta
    return GenerativeModel.from_arrays(np.eye(k), lik, names=("arm", "x", "o"))


def floor_desire(k: int, eps: float = 0.01) -> DesireDistribution:
    """p~(a, r=1) = (1 - eps)/K and p~(a, r=0) = eps/K."""
    if not 0 <= eps <= 1:
        raise ValueError("eps must lie in [0, 1]")
    probs = np.empty(2 * k)
    probs[0::2] = eps / k
    probs[1::2] = (1.0 - eps) / k
    return DesireDistribution(probs)


def bernoulli_divergence_closed_form(theta, desire: DesireDistribution) -> np.ndarray:
    """With disjoint per-arm outcomes, KL[p_pi || p~] = sum_a pi_a (ln pi_a + d_a), so pi_a oc exp(-d_a)."""
    model = bernoulli_model(theta)
    d = np.array([
        math.fsum(p * math.log(p / q) for p, q in zip(row, desire.probs) if p > 0)
        for row in model.likelihood_array
    ])
    w = np.exp(-(d - d.min()))
    return w / w.sum()


def bernoulli_bandit_policies(theta, desire: DesireDistribution | None = None, resolution: float = 1e-3) -> MatchingReport:
    theta = np.asarray(theta, dtype=float)
    model = bernoulli_model(theta)
    desire = desire if desire is not None else floor_desire(theta.size)
    if len(desire) != 2 * theta.size:
        raise ProbabilityError("desire must cover every (arm, reward) pair")
    if not 0 < resolution <= 1.0 / MIN_POINTS_PER_DIM:
        raise ValueError(f"resolution {resolution} gives fewer than {MIN_POINTS_PER_DIM} points per dimension")
    pi_div = simplex_search(lambda P: batch_scores(model, desire, P, "divergence"), theta.size, resolution)
    pi_ev = simplex_search(lambda P: batch_scores(model, desire, P, "evidence"), theta.size, resolution, refine=False)
    target = theta / theta.sum() if theta.sum() > 0 else np.full(theta.size, 1.0 / theta.size)
    return _report(model, desire, pi_div, pi_ev, target)


# ---------------------------------------------------------------------------
# two-step information seeking

PLANS = ("skip-A", "skip-B", "check-A", "check-follow")
BLIND_PLANS = ("skip-A", "skip-B", "check-A")


@dataclass(frozen=True)
class TwoStepEnv:
    """Latent door z in {A, B}; step 1 is ``check`` or ``skip``; step 2 opens a door.

    Observations are (signal s, reward r).  ``check`` reports z with accuracy
    alpha, ``skip`` returns a coin flip.  r = 1 iff the opened door is z.
    """

    alpha: float = 1.0

    def __post_init__(self):
        if not 0.5 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0.5, 1]")

    @staticmethod
    def obs_index(s: int, r: int) -> int:
        return 2 * s + r

    def plan_likelihood(self, plan: str) -> np.ndarray:
        """p(s, r | z) for one plan as a (2, 4) table."""
        check = plan.startswith("check")
        acc = self.alpha if check else 0.5
        lik = np.zeros((2, 4))
        for z in (0, 1):
            for s in (0, 1):
                ps = acc if s == z else 1.0 - acc
                door = s if plan == "check-follow" else (1 if plan == "skip-B" else 0)
                lik[z, self.obs_index(s, int(door == z))] += ps
        return lik

    def model(self) -> GenerativeModel:
        """Latent x = (plan, z) so that p(o | x) is plan-free, as the generic model requires."""
        n = len(PLANS)
        prior = np.zeros((n, 2 * n))
        lik = np.zeros((2 * n, 4))
        for i, plan in enumerate(PLANS):
            prior[i, 2 * i: 2 * i + 2] = 0.5
            lik[2 * i: 2 * i + 2] = self.plan_likelihood(plan)
        return GenerativeModel.from_arrays(prior, lik, actions=list(PLANS), names=("plan", "x", "o"))

    def observation_desire(self, reward_desire: DesireDistribution) -> DesireDistribution:
        """p~(s, r) = U(s) p~(r): the signal itself is not desired either way."""
        if len(reward_desire) != 2:
            raise ProbabilityError("reward desire must cover r in {0, 1}")
        return DesireDistribution(np.kron(np.full(2, 0.5), reward_desire.probs))


def reward_desire(p_reward: float = 0.99) -> DesireDistribution:
    return DesireDistribution(np.array([1.0 - p_reward, p_reward]))


@dataclass
class PlanScore:
    plan: str
    evidence: float
    divergence: float
    desire_divergence: float
    information_gain: float
    signal_information: float
    decomposition: RelationReport

    def to_dict(self) -> dict:
        return {
            "plan": self.plan,
            "evidence": self.evidence,
            "divergence": self.divergence,
            "desire_divergence": self.desire_divergence,
            "information_gain": self.information_gain,
            "signal_information": self.signal_information,
            "decomposition_residual": self.decomposition.residual,
        }


@dataclass
class TwoStepReport:
    alpha: float
    plans: list[PlanScore]

    def score(self, plan: str) -> PlanScore:
        return next(p for p in self.plans if p.plan == plan)

    @property
    def selected(self) -> str:
        """Divergence-optimal plan; ties go to the earliest plan in PLANS."""
        return self.plans[int(np.argmin([p.divergence for p in self.plans]))].plan

    @property
    def check_margin(self) -> float:
        """Best blind divergence minus the check-follow divergence."""
        return min(self.score(p).divergence for p in BLIND_PLANS) - self.score("check-follow").divergence

    @property
    def divergence_spread(self) -> float:
        d = [p.divergence for p in self.plans]
        return max(d) - min(d)

    @property
    def evidence_spread(self) -> float:
        e = [p.evidence for p in self.plans]
        return max(e) - min(e)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "selected": self.selected,
            "check_margin": self.check_margin,
            "plans": [p.to_dict() for p in self.plans],
        }


def twostep_plan_scores(env: TwoStepEnv, desire: DesireDistribution | None = None) -> TwoStepReport:
    """Score every plan exactly.

    ``information_gain`` is the full I(z; s, r): the reward bit alone reveals
    z under every plan, so this is ln 2 throughout.  ``signal_information``
    is I(z; s), the part the ``check`` action contributes.
    """
    desire = desire if desire is not None else reward_desire()
    model = env.model()
    obs_desire = env.observation_desire(desire)
    out = []
    for i, plan in enumerate(PLANS):
        rep = divergence_latent_decomposition(model, obs_desire, i)
        zs = 0.5 * env.plan_likelihood(plan).reshape(2, 2, 2)  # (z, s, r)
        sig = mutual_information(JointTable.from_array(zs, ["z", "s", "r"]), "z", "s")
        out.append(PlanScore(
            plan=plan,
            evidence=evidence_objective(model, obs_desire, i),
            divergence=rep.terms["Divergence Objective"],
            desire_divergence=rep.terms["Desire Divergence"],
            information_gain=rep.terms["Information Gain"],
            signal_information=sig,
            decomposition=rep,
        ))
    return TwoStepReport(env.alpha, out)


__all__ = [
    "BLIND_PLANS",
    "MatchingBandit",
    "MatchingReport",
    "PLANS",
    "PlanScore",
    "TwoStepEnv",
    "TwoStepReport",
    "batch_scores",
    "bernoulli_bandit_policies",
    "bernoulli_divergence_closed_form",
    "bernoulli_model",
    "floor_desire",
    "matching_bandit_policies",
    "matching_bandit_search",
    "reward_desire",
    "simplex_grid",
    "simplex_search",
    "total_variation",
    "twostep_plan_scores",
]
