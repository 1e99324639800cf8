"""Past/future split of the sequence divergence and the empowerment functional.

Variables: ``o_past``, ``x_past``, ``a_past``, ``x_future``, ``a_future``,
``o_future``.  The joint factorizes as

    p(o_<) p(x_<, a_< | o_<) p(x_>, a_> | x_<, a_<) p(o_> | x_>)

and every conditional used below is read off that assembled joint.  The
Emp and Filter terms are expectations of log-ratios under the full joint.
With that choice the signed four-term sum exceeds the true marginal sequence
divergence by exactly I(x_>, a_> ; o_< | o_>), which vanishes when o_< is a
point mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .probcore import (
    CondTable,
    JointTable,
    NORM_TOL,
    ProbabilityError,
    build_joint,
    conditional_entropy,
    kl,
    marginalize,
    mutual_information,
)
from .reports import DEFAULT_BOUND_TOL, RelationReport

OP, XP, AP, XF, AF, OF = "o_past", "x_past", "a_past", "x_future", "a_future", "o_future"
ORDER = (OP, XP, AP, XF, AF, OF)
PAST = (XP, AP)
FUTURE = (XF, AF)


class SequenceModel:
    """Finite past/future model assembled from its four factors.

    Arrays: ``p_o_past`` (Op,), ``p_past`` (Op, Xp, Ap), ``p_future``
    (Xp, Ap, Xf, Af), ``p_obs`` (Xf, Of).
    """

    def __init__(self, p_o_past, p_past, p_future, p_obs):
        p_o_past = np.asarray(p_o_past, dtype=float)
        p_past = np.asarray(p_past, dtype=float)
        p_future = np.asarray(p_future, dtype=float)
        p_obs = np.asarray(p_obs, dtype=float)
        n_op, n_xp, n_ap = p_past.shape
        n_xf, n_af = p_future.shape[2:]
        if p_o_past.shape != (n_op,) or p_future.shape[:2] != (n_xp, n_ap) or p_obs.shape[0] != n_xf:
            raise ProbabilityError("factor shapes are inconsistent")
        self.factors = (
            JointTable.from_array(p_o_past, [OP]),
            CondTable.from_array(p_past, target=[XP, AP], given=[OP]),
            CondTable.from_array(p_future, target=[XF, AF], given=[XP, AP]),
            CondTable.from_array(p_obs, target=[OF], given=[XF]),
        )
        self.joint = build_joint(self.factors).transpose(ORDER)
        self.p_o_past = p_o_past

    @property
    def probs(self) -> np.ndarray:
        return self.joint.probs

    @property
    def past_is_delta(self) -> bool:
        return bool(np.isclose(self.p_o_past.max(), 1.0, rtol=0, atol=NORM_TOL))

    @property
    def observed_past(self) -> int:
        return int(np.argmax(self.p_o_past))

    def marginal(self, names) -> np.ndarray:
        """Marginal over ``names`` in ORDER-axis layout, keeping dropped axes as size 1."""
        drop = tuple(i for i, n in enumerate(ORDER) if n not in names)
        return self.probs.sum(axis=drop, keepdims=True)


@dataclass(frozen=True)
class SequenceDesire:
    desire_past: np.ndarray
    desire_future: np.ndarray

    def __post_init__(self):
        for name in ("desire_past", "desire_future"):
            p = np.asarray(getattr(self, name), dtype=float)
            if np.any(p < 0) or abs(p.sum() - 1.0) > NORM_TOL:
                raise ProbabilityError(f"{name} must be normalized")
            object.__setattr__(self, name, p)


def empowerment_mi(seq: SequenceModel) -> float:
    """I(x_> ; a_> | x_<, a_<)."""
    return mutual_information(seq.joint, XF, AF, given=PAST)


def empowerment_entropy_identity(seq: SequenceModel, tol: float = 1e-10) -> RelationReport:
    """I(x_> ; a_> | past) = H(x_> | past) - H(x_> | a_>, past)."""
    mi = empowerment_mi(seq)
    return RelationReport(
        "empowerment_entropy_identity",
        terms={
            "Empowerment": mi,
            "Future State Entropy": conditional_entropy(seq.joint, XF, PAST),
            "Future State Entropy Given Actions": conditional_entropy(seq.joint, XF, (AF,) + PAST),
        },
        coefficients={"Future State Entropy": 1.0, "Future State Entropy Given Actions": -1.0},
        lhs=mi,
        tolerance=tol,
    )


def _expected_log_ratio(weights: np.ndarray, num: np.ndarray, den: np.ndarray) -> float:
    """E_weights[ln num - ln den] over the support of ``weights``."""
    num = np.broadcast_to(num, weights.shape)
    den = np.broadcast_to(den, weights.shape)
    mask = weights > 0
    return math.fsum((weights[mask] * (np.log(num[mask]) - np.log(den[mask]))).ravel())


def _conditional(seq: SequenceModel, target, given) -> np.ndarray:
    """p(target | given) broadcast over the ORDER layout."""
    joint = seq.marginal(tuple(target) + tuple(given))
    norm = seq.marginal(tuple(given))
    return joint / np.where(norm > 0, norm, 1.0)


def sequence_terms(seq: SequenceModel, desire: SequenceDesire) -> dict[str, float]:
    p = seq.probs
    p_op = seq.marginal((OP,)).ravel()
    p_xf = seq.marginal((XF,)).ravel()
    lik = marginalize(seq.joint, [XF, OF]).probs
    lik = lik / np.where(p_xf > 0, p_xf, 1.0)[:, None]
    future = math.fsum(w * kl(row, desire.desire_future) for w, row in zip(p_xf, lik) if w > 0)
    emp = _expected_log_ratio(p, _conditional(seq, FUTURE, (OF,)), _conditional(seq, FUTURE, PAST))
    filt = _expected_log_ratio(p, _conditional(seq, PAST, (OP,) + FUTURE), _conditional(seq, PAST, (OP,)))
    past = kl(p_op, desire.desire_past)
    p_obs_joint = marginalize(seq.joint, [OP, OF]).probs
    truth = kl(p_obs_joint, np.outer(desire.desire_past, desire.desire_future))
    excess_info = mutual_information(seq.joint, FUTURE, (OP,), given=(OF,))
    return {
        "Future Divergence": future,
        "Generalized Empowerment": emp,
        "Latent Filtering Information": filt,
        "Past Divergence": past,
        "Sequence Divergence": truth,
        "Past-Future Latent Information": excess_info,
    }


def sequence_divergence_decomposition(seq: SequenceModel, desire: SequenceDesire, tol: float = 1e-10) -> RelationReport:
    """Future - Emp - Filter + Past = KL[p(o_<, o_>) || p~ p~] + I(x_>, a_> ; o_< | o_>).

    ``decomposition_exact`` records whether the four terms alone reproduce
    the sequence divergence, which is guaranteed when o_< is a point mass.
    """
    terms = sequence_terms(seq, desire)
    four = (
        terms["Future Divergence"]
        - terms["Generalized Empowerment"]
        - terms["Latent Filtering Information"]
        + terms["Past Divergence"]
    )
    excess = four - terms["Sequence Divergence"]
    terms["Decomposition Excess"] = excess
    return RelationReport(
        "sequence_divergence_decomposition",
        terms=terms,
        coefficients={"Sequence Divergence": 1.0, "Past-Future Latent Information": 1.0},
        lhs=four,
        tolerance=tol,
        condition_flags={
            "past_is_delta": seq.past_is_delta,
            "excess_nonnegative": excess >= -DEFAULT_BOUND_TOL,
            "decomposition_exact": abs(excess) <= tol,
        },
        required_flags=("excess_nonnegative",) + (("decomposition_exact",) if seq.past_is_delta else ()),
    )


def past_divergence_delta_check(seq: SequenceModel, desire: SequenceDesire, tol: float = 1e-10) -> RelationReport:
    """With p(o_<) a point mass at o_hat, KL[p(o_<) || p~(o_<)] = -ln p~(o_hat).

    The value depends only on the fixed past, not on any future factor.
    """
    if not seq.past_is_delta:
        raise ProbabilityError("past observation distribution is not a point mass")
    o_hat = seq.observed_past
    past = kl(seq.marginal((OP,)).ravel(), desire.desire_past)
    closed = -math.log(desire.desire_past[o_hat])
    uniform = bool(np.allclose(desire.desire_past, desire.desire_past[0], rtol=0, atol=NORM_TOL))
    return RelationReport(
        "past_divergence_delta_check",
        terms={"Past Divergence": past, "Negative Log Desire of Observed Past": closed},
        coefficients={"Negative Log Desire of Observed Past": 1.0},
        lhs=past,
        tolerance=tol,
        condition_flags={"past_is_delta": True, "desire_uniform": uniform, "action_independent": True},
        notes={"action_independent": "depends only on p(o_<) and p~(o_<), which no future factor enters"},
    )


def random_sequence_model(rng: np.random.Generator, max_card: int = 3, delta_past: bool = True) -> SequenceModel:
    """Flat-Dirichlet factors with every cardinality drawn from 2..max_card."""
    from .sampling import dirichlet, dirichlet_rows

    n_op, n_xp, n_ap, n_xf, n_af, n_of = (int(c) for c in rng.integers(2, max_card + 1, size=6))
    if delta_past:
        p_op = np.zeros(n_op)
        p_op[int(rng.integers(n_op))] = 1.0
    else:
        p_op = dirichlet(rng, n_op)
    p_past = dirichlet_rows(rng, n_op, n_xp * n_ap).reshape(n_op, n_xp, n_ap)
    p_future = dirichlet_rows(rng, n_xp * n_ap, n_xf * n_af).reshape(n_xp, n_ap, n_xf, n_af)
    p_obs = dirichlet_rows(rng, n_xf, n_of)
    return SequenceModel(p_op, p_past, p_future, p_obs)


def random_sequence_desire(rng: np.random.Generator, seq: SequenceModel) -> SequenceDesire:
    from .sampling import dirichlet

    n_op = seq.joint.space.card(OP)
    n_of = seq.joint.space.card(OF)
    return SequenceDesire(dirichlet(rng, n_op), dirichlet(rng, n_of))
