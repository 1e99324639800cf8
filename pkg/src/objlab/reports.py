"""RelationReport: one checked identity or bound, with every named term kept."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

IDENTITY = "identity"
BOUND = "bound"
REPORT_ONLY = "report_only"
KINDS = (IDENTITY, BOUND, REPORT_ONLY)

DEFAULT_IDENTITY_TOL = 1e-10
DEFAULT_BOUND_TOL = 1e-12


@dataclass
class RelationReport:
    """A verified relation ``lhs (=|>=) sum_k coefficients[k] * terms[k]``.

    For ``kind="identity"`` the check is ``residual <= tolerance``.  For
    ``kind="bound"`` it is ``lhs - signed_sum >= -tolerance``.  Report-only
    relations always pass; their flags are informational.  Any flag listed in
    ``required_flags`` must also be true for ``passed``.
    """

    relation_id: str
    terms: dict[str, float]
    coefficients: dict[str, float]
    lhs: float
    kind: str = IDENTITY
    tolerance: float = DEFAULT_IDENTITY_TOL
    condition_flags: dict[str, bool] = field(default_factory=dict)
    required_flags: tuple[str, ...] = ()
    notes: dict[str, str] = field(default_factory=dict)
    trial: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown report kind {self.kind!r}")
        missing = set(self.coefficients) - set(self.terms)
        if missing:
            raise ValueError(f"coefficients reference unknown terms {sorted(missing)}")
        self.terms = {k: float(v) for k, v in self.terms.items()}
        self.lhs = float(self.lhs)
        self.condition_flags = {k: bool(v) for k, v in self.condition_flags.items()}

    @property
    def signed_sum(self) -> float:
        return math.fsum(c * self.terms[k] for k, c in self.coefficients.items())

    @property
    def slack(self) -> float:
        return self.lhs - self.signed_sum

    @property
    def residual(self) -> float:
        return abs(self.slack)

    @property
    def passed(self) -> bool:
        if not all(self.condition_flags.get(f, False) for f in self.required_flags):
            return False
        if self.kind == IDENTITY:
            return self.residual <= self.tolerance
        if self.kind == BOUND:
            return self.slack >= -self.tolerance
        return True

    def to_dict(self) -> dict:
        out = {
            "relation_id": self.relation_id,
            "kind": self.kind,
            "terms": dict(self.terms),
            "coefficients": dict(self.coefficients),
            "lhs": self.lhs,
            "signed_sum": self.signed_sum,
            "residual": self.residual,
            "slack": self.slack,
            "tolerance": self.tolerance,
            "condition_flags": dict(self.condition_flags),
            "pass": self.passed,
        }
        if self.trial is not None:
            out["trial"] = self.trial
        if self.notes:
            out["notes"] = dict(self.notes)
        return out
