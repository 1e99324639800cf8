"""Exact discrete probability tables and information functionals.

Every distribution is a dense numpy tensor whose axes are named variables.
All quantities are in nats, with 0 ln 0 = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_CELLS = 10**7
NORM_TOL = 1e-12


class ProbabilityError(ValueError):
    """Malformed table or factorization."""


class AbsoluteContinuityError(ProbabilityError):
    """p puts mass where q has none, so KL[p || q] is infinite."""


@dataclass(frozen=True)
class VariableSpace:
    variables: tuple[tuple[str, int], ...]

    def __post_init__(self):
        variables = tuple((str(n), int(c)) for n, c in self.variables)
        object.__setattr__(self, "variables", variables)
        names = [n for n, _ in variables]
        if len(set(names)) != len(names):
            raise ProbabilityError(f"duplicate variable names in {names}")
        if any(c < 1 for _, c in variables):
            raise ProbabilityError(f"cardinalities must be >= 1, got {variables}")
        if self.size > MAX_CELLS:
            raise ProbabilityError(f"joint of {self.size} cells exceeds the {MAX_CELLS} cell guard")

    @classmethod
    def of(cls, **cards: int) -> "VariableSpace":
        return cls(tuple(cards.items()))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.variables)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c for _, c in self.variables)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def card(self, name: str) -> int:
        return self.shape[self.axis(name)]

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown variable {name!r}; space has {self.names}") from None

    def subspace(self, names: Iterable[str]) -> "VariableSpace":
        return VariableSpace(tuple((n, self.card(n)) for n in names))

    def __contains__(self, name) -> bool:
        return name in self.names


def _as_names(names) -> tuple[str, ...]:
    if isinstance(names, str):
        return (names,)
    return tuple(names)


class JointTable:
    """Normalized probability tensor over a ``VariableSpace``."""

    __slots__ = ("space", "probs")

    def __init__(self, space: VariableSpace, probs, *, check: bool = True):
        probs = np.asarray(probs, dtype=float)
        if probs.shape != space.shape:
            probs = probs.reshape(space.shape)
        if check:
            if np.any(probs < 0) or not np.all(np.isfinite(probs)):
                raise ProbabilityError("probabilities must be finite and non-negative")
            total = probs.sum()
            if abs(total - 1.0) > NORM_TOL:
                raise ProbabilityError(f"table sums to {total!r}, not 1")
        probs.setflags(write=False)
        self.space = space
        self.probs = probs

    @classmethod
    def from_array(cls, probs, names: Sequence[str]) -> "JointTable":
        probs = np.asarray(probs, dtype=float)
        return cls(VariableSpace(tuple(zip(_as_names(names), probs.shape))), probs)

    @classmethod
    def normalized(cls, weights, names: Sequence[str]) -> "JointTable":
        weights = np.asarray(weights, dtype=float)
        return cls.from_array(weights / weights.sum(), names)

    @property
    def names(self) -> tuple[str, ...]:
        return self.space.names

    def transpose(self, names: Sequence[str]) -> "JointTable":
        names = _as_names(names)
        axes = [self.space.axis(n) for n in names]
        if sorted(axes) != list(range(len(self.names))):
            raise ProbabilityError(f"{names} is not a permutation of {self.names}")
        return JointTable(self.space.subspace(names), np.transpose(self.probs, axes), check=False)

    def __repr__(self):
        return f"JointTable({dict(self.space.variables)})"


class CondTable:
    """Rows p(target | given), stored with the ``given`` axes first.

    ``undefined`` marks given-configurations with zero probability; their
    rows are zero-filled and excluded from every expectation.
    """

    __slots__ = ("target", "given", "rows", "undefined")

    def __init__(self, target: VariableSpace, given: VariableSpace, rows, undefined=None, *, check: bool = True):
        overlap = set(target.names) & set(given.names)
        if overlap:
            raise ProbabilityError(f"target and given overlap on {sorted(overlap)}")
        rows = np.asarray(rows, dtype=float).reshape(given.shape + target.shape)
        if undefined is None:
            undefined = np.zeros(given.shape, dtype=bool)
        undefined = np.asarray(undefined, dtype=bool).reshape(given.shape)
        if check:
            if np.any(rows < 0) or not np.all(np.isfinite(rows)):
                raise ProbabilityError("conditional rows must be finite and non-negative")
            sums = rows.reshape(given.shape + (-1,)).sum(axis=-1)
            bad = ~undefined & (np.abs(sums - 1.0) > NORM_TOL)
            if np.any(bad):
                raise ProbabilityError(f"conditional rows do not sum to 1: {sums[bad][:5]}")
        rows.setflags(write=False)
        self.target = target
        self.given = given
        self.rows = rows
        self.undefined = undefined

    @classmethod
    def from_array(cls, rows, target: Sequence[str], given: Sequence[str] = ()) -> "CondTable":
        """Build from an array whose leading axes are ``given`` then ``target``."""
        rows = np.asarray(rows, dtype=float)
        given, target = _as_names(given), _as_names(target)
        g = len(given)
        return cls(
            VariableSpace(tuple(zip(target, rows.shape[g:]))),
            VariableSpace(tuple(zip(given, rows.shape[:g]))),
            rows,
        )

    @property
    def names(self) -> tuple[str, ...]:
        return self.given.names + self.target.names

    def row(self, *given_index) -> np.ndarray:
        return self.rows[tuple(given_index)]

    def __repr__(self):
        return f"CondTable({list(self.target.names)} | {list(self.given.names)})"


def _aligned(array: np.ndarray, names: Sequence[str], order: Sequence[str]) -> np.ndarray:
    """View ``array`` (axes ``names``) broadcastable against axes ``order``."""
    perm = sorted(range(len(names)), key=lambda i: order.index(names[i]))
    moved = np.transpose(array, perm)
    present = {names[i] for i in perm}
    shape = []
    it = iter(moved.shape)
    for n in order:
        shape.append(next(it) if n in present else 1)
    return moved.reshape(shape)


def build_joint(factors: Sequence) -> JointTable:
    """Multiply marginal and conditional factors into one joint table.

    Factors may come in any order; each variable must be the target of
    exactly one factor and the ``given`` sets must admit a topological order.
    """
    pending = []
    targeted: dict[str, int] = {}
    for f in factors:
        if isinstance(f, JointTable):
            target, given, arr = f.space, VariableSpace(()), f.probs
        elif isinstance(f, CondTable):
            target, given, arr = f.target, f.given, f.rows
        else:
            raise TypeError(f"factor must be JointTable or CondTable, got {type(f).__name__}")
        for name, card in target.variables:
            if name in targeted:
                raise ProbabilityError(f"variable {name!r} is targeted by more than one factor")
            targeted[name] = card
        pending.append((target, given, arr))

    for _, given, _ in pending:
        for name, card in given.variables:
            if name not in targeted:
                raise ProbabilityError(f"variable {name!r} is conditioned on but never targeted")
            if targeted[name] != card:
                raise ProbabilityError(f"cardinality mismatch for {name!r}")

    order: list[str] = []
    placed = []
    while pending:
        ready = [f for f in pending if all(n in order for n in f[1].names)]
        if not ready:
            raise ProbabilityError("factorization is cyclic")
        for f in ready:
            pending.remove(f)
            order.extend(f[0].names)
            placed.append(f)

    space = VariableSpace(tuple((n, targeted[n]) for n in order))
    joint = np.ones(space.shape)
    for target, given, arr in placed:
        joint = joint * _aligned(arr, given.names + target.names, order)
    total = joint.sum()
    if abs(total - 1.0) > 1e-9:
        raise ProbabilityError(f"factor product sums to {total!r}; a factor is not normalized")
    return JointTable(space, joint / total)


def marginalize(joint: JointTable, keep) -> JointTable:
    """Sum out every variable not in ``keep``; result axes follow ``keep``."""
    keep = _as_names(keep)
    for n in keep:
        joint.space.axis(n)
    drop = tuple(i for i, n in enumerate(joint.names) if n not in keep)
    summed = joint.probs.sum(axis=drop) if drop else joint.probs
    remaining = [n for n in joint.names if n in keep]
    table = JointTable(joint.space.subspace(remaining), summed, check=False)
    return table.transpose(keep) if tuple(remaining) != keep else table


def condition(joint: JointTable, target, given=()) -> CondTable:
    """p(target | given) by renormalizing slices of the joint."""
    target, given = _as_names(target), _as_names(given)
    if set(target) & set(given):
        raise ProbabilityError("target and given must be disjoint")
    sub = marginalize(joint, given + target).probs
    g_shape = sub.shape[: len(given)]
    flat = sub.reshape(g_shape + (-1,))
    norm = flat.sum(axis=-1)
    undefined = norm <= 0
    safe = np.where(undefined, 1.0, norm)
    rows = (flat / safe[..., None]).reshape(sub.shape)
    return CondTable(joint.space.subspace(target), joint.space.subspace(given), rows, undefined, check=False)


def _probs(dist) -> np.ndarray:
    return np.asarray(getattr(dist, "probs", dist), dtype=float)


def entropy(dist) -> float:
    """Shannon entropy -sum p ln p."""
    p = _probs(dist).ravel()
    nz = p[p > 0]
    return float(-np.dot(nz, np.log(nz)))


def kl(p, q, *, allow_unnormalized: bool = False) -> float:
    """KL[p || q] = sum p ln(p/q), skipping p = 0 cells.

    ``q`` may be an arbitrary non-negative table only when
    ``allow_unnormalized`` is set; the result can then be negative.
    """
    if isinstance(p, JointTable) and isinstance(q, JointTable) and p.names != q.names:
        q = q.transpose(p.names)
    pa, qa = _probs(p), _probs(q)
    if pa.shape != qa.shape:
        raise ProbabilityError(f"shape mismatch {pa.shape} vs {qa.shape}")
    if np.any(qa < 0):
        raise ProbabilityError("q has negative entries")
    if not allow_unnormalized and abs(qa.sum() - 1.0) > 1e-9:
        raise ProbabilityError("q is not normalized; pass allow_unnormalized=True for a KL to a measure")
    mask = pa > 0
    if np.any(qa[mask] <= 0):
        raise AbsoluteContinuityError("p has mass where q is zero")
    return float(np.dot(pa[mask], np.log(pa[mask]) - np.log(qa[mask])))


def cross_entropy(p, q) -> float:
    """-sum p ln q; infinite when p has mass where q is zero."""
    pa, qa = _probs(p).ravel(), _probs(q).ravel()
    mask = pa > 0
    if np.any(qa[mask] <= 0):
        return math.inf
    return float(-np.dot(pa[mask], np.log(qa[mask])))


def conditional_entropy(joint: JointTable, target, given=()) -> float:
    """H(target | given) = H(target, given) - H(given)."""
    target, given = _as_names(target), _as_names(given)
    h = entropy(marginalize(joint, given + target))
    return h - entropy(marginalize(joint, given)) if given else h


def mutual_information(joint: JointTable, a, b, given=()) -> float:
    """I(A; B | given) by enumeration, as KL[p(a,b|c) || p(a|c) p(b|c)] averaged over c."""
    a, b, given = _as_names(a), _as_names(b), _as_names(given)
    if set(a) & set(b) or set(a) & set(given) or set(b) & set(given):
        raise ProbabilityError("variable sets must be pairwise disjoint")
    p_abc = marginalize(joint, given + a + b).probs
    g = len(given)
    ga = g + len(a)
    p_c = p_abc.sum(axis=tuple(range(g, p_abc.ndim)), keepdims=True)
    p_ac = p_abc.sum(axis=tuple(range(ga, p_abc.ndim)), keepdims=True)
    p_bc = p_abc.sum(axis=tuple(range(g, ga)), keepdims=True)
    mask = p_abc > 0
    ratio = np.log(np.broadcast_to(p_abc, p_abc.shape)[mask]) + np.log(np.broadcast_to(p_c, p_abc.shape)[mask])
    ratio -= np.log(np.broadcast_to(p_ac, p_abc.shape)[mask]) + np.log(np.broadcast_to(p_bc, p_abc.shape)[mask])
    return float(max(np.dot(p_abc[mask], ratio), 0.0))


def expected_info_gain(joint: JointTable, latent, obs) -> float:
    """E_{p(obs)} KL[p(latent | obs) || p(latent)]."""
    latent, obs = _as_names(latent), _as_names(obs)
    prior = marginalize(joint, latent).probs.ravel()
    post = condition(joint, latent, obs)
    p_obs = marginalize(joint, obs).probs.ravel()
    rows = post.rows.reshape(p_obs.size, -1)
    undefined = post.undefined.ravel()
    total = 0.0
    for w, row, skip in zip(p_obs, rows, undefined):
        if skip or w == 0:
            continue
        total += w * kl(row, prior)
    return total
