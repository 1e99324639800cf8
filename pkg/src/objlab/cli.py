"""Command-line entry point: verification sweeps, the mixture experiment and the testbeds.

Exit codes: 0 when every hard assertion passes, 1 when one fails, 2 on a
usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import empowerment as emp
from . import objectives as obj
from . import relations as rel
from .mixturefit import QuadratureGrid, fig1_experiment
from .probcore import JointTable
from .reports import REPORT_ONLY, RelationReport
from .sampling import dirichlet, dirichlet_rows, random_desire, random_model, random_policy, trial_rng
from .testbeds import (
    MatchingBandit,
    TwoStepEnv,
    bernoulli_bandit_policies,
    floor_desire,
    matching_bandit_policies,
    matching_bandit_search,
    reward_desire,
    total_variation,
    twostep_plan_scores,
)

logger = logging.getLogger("objlab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
FORMATS = ("json", "csv")
SEED_MAX = 2**64 - 1


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    trials: int = 1000
    tolerance: float = 1e-9
    cards: tuple[int, int] = (2, 5)
    seq_max_card: int = 3
    delta_past: bool = True
    out: str | None = None
    format: str = "json"
    steps: int = 5000
    learning_rate: float = 0.05
    grid_points: int = 4000
    phi: tuple[float, ...] = (0.9, 0.1)
    theta: tuple[float, ...] = (0.9, 0.1)
    eps: float = 0.01
    resolution: float = 1e-3
    alpha: float = 1.0
    p_reward: float = 0.99
    extras: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if not isinstance(self.seed, int) or not 0 <= self.seed <= SEED_MAX:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be an integer >= 1")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        lo, hi = self.cards
        if not 1 <= lo <= hi:
            raise ConfigError("cards must be an increasing pair of positive integers")
        if self.seq_max_card < 2:
            raise ConfigError("seq_max_card must be at least 2")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.steps < 0:
            raise ConfigError("steps must be non-negative")
        if not 0.5 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0.5, 1]")
        if not 0 < self.p_reward < 1:
            raise ConfigError("p_reward must lie strictly between 0 and 1")
        return self

    def echo(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("extras", "out")}
        for key in ("cards", "phi", "theta"):
            out[key] = list(out[key])
        return out

    @property
    def out_dir(self) -> Path:
        return Path(self.out or os.environ.get("OBJLAB_OUT") or ".")


_TUPLE_KEYS = {"cards": int, "phi": float, "theta": float}


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """Defaults, then the JSON file, then non-None command-line overrides."""
    values: dict = {}
    if path:
        try:
            with open(path) as fh:
                values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError("config file must hold a JSON object")
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(RunConfig)} - {"extras"}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    try:
        for key, cast in _TUPLE_KEYS.items():
            if key in values:
                values[key] = tuple(cast(v) for v in values[key])
        cfg = RunConfig(**values)
        for name in ("tolerance", "learning_rate", "eps", "resolution", "alpha", "p_reward"):
            setattr(cfg, name, float(getattr(cfg, name)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


# ---------------------------------------------------------------------------
# serialization


def _encode(obj, indent: int = 0) -> str:
    """Deterministic JSON with floats at 17 significant digits."""
    pad, inner = " " * indent, " " * (indent + 2)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_encode(v, indent + 2)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{inner}{_encode(v, indent + 2)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return _encode(obj) + "\n"


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


CSV_COLUMNS = ("relation_id", "trial", "kind", "lhs", "signed_sum", "residual", "slack", "tolerance", "pass")


def write_reports_csv(path: Path, reports: list[RelationReport]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            d = r.to_dict()
            writer.writerow([
                d["relation_id"], d.get("trial", ""), d["kind"],
                *(format(d[k], ".17g") for k in ("lhs", "signed_sum", "residual", "slack", "tolerance")),
                int(d["pass"]),
            ])
    return path


# ---------------------------------------------------------------------------
# verification suite


def trial_reports(seed: int, trial: int, tolerance: float, cards=(2, 5), seq_max_card: int = 3, delta_past: bool = True) -> list[RelationReport]:
    """Every identity, bound and probe on one seeded random model."""
    rng = trial_rng(seed, trial)
    model = random_model(rng, cards)
    n_a, n_x, n_o = model.n_actions, model.n_latent, model.n_obs
    desire = random_desire(rng, n_o)
    action = int(rng.integers(n_a))
    q_a = random_policy(rng, n_a)
    belief = rel.VariationalBelief(dirichlet(rng, n_x), dirichlet_rows(rng, n_o, n_x))
    target_post = dirichlet_rows(rng, n_o, n_x)
    rewards = rng.normal(size=n_o)
    target_joint = JointTable.from_array(dirichlet(rng, n_x * n_o).reshape(n_x, n_o), [model.latent_name, model.obs_name])
    actual = dirichlet(rng, n_x * n_o).reshape(n_x, n_o)
    target_o = rng.uniform(0.1, 2.0, size=n_o)

    tol = tolerance
    out = [
        obj.evidence_as_divergence(model, desire, action, tol=tol),
        obj.divergence_as_evidence(model, desire, action, tol=tol),
        obj.divergence_latent_decomposition(model, desire, action, tol=tol),
        obj.entropy_latent_identity(model, action, tol=tol),
        obj.info_gain_equals_mi(model, action, tol=tol),
        rel.cai_elbo_identity(q_a, model, rewards, beta=1.0, tol=tol),
        rel.cai_evidence_bound(model, desire, q_a),
        rel.efe_epistemic_decomposition(belief, model, desire, action, tol=tol),
        rel.efe_risk_ambiguity(belief, model, desire, action, tol=tol),
        rel.efe_evidence_relation(belief, model, desire, action, tol=tol),
        rel.efe_divergence_identity(belief, model, desire, action, tol=tol),
        rel.efe_divergence_bound_probe(belief, model, desire, action),
        rel.apdm_split(belief, model, desire, action=action, tol=tol),
        rel.apdm_info_bound(belief, model, target_post, action=action, tol=tol),
        rel.joint_vs_marginal_divergence(model.joint(action), target_joint, obs=model.obs_name, tol=tol),
        rel.apdm_evidence_bound(belief, model, desire, target_post, action=action),
        rel.apdm_generic_split(actual, target_o, target_post, tol=tol),
        rel.apdm_realize_preferences_split(belief, model, desire, action=action, tol=tol),
    ]
    out.extend(empower_reports(rng, tolerance, seq_max_card, delta_past))
    for r in out:
        r.trial = trial
    return out


def empower_reports(rng: np.random.Generator, tolerance: float, max_card: int = 3, delta_past: bool = True) -> list[RelationReport]:
    seq = emp.random_sequence_model(rng, max_card=max_card, delta_past=delta_past)
    sdesire = emp.random_sequence_desire(rng, seq)
    out = [
        emp.sequence_divergence_decomposition(seq, sdesire, tol=tolerance),
        emp.empowerment_entropy_identity(seq, tol=tolerance),
    ]
    if seq.past_is_delta:
        out.append(emp.past_divergence_delta_check(seq, sdesire, tol=tolerance))
    return out


def _sorted(reports):
    return sorted(reports, key=lambda r: (r.relation_id, -1 if r.trial is None else r.trial))


def probe_statistics(reports: list[RelationReport]) -> dict:
    """Slack summary for every report-only relation."""
    stats = {}
    for rid in sorted({r.relation_id for r in reports if r.kind == REPORT_ONLY}):
        group = [r for r in reports if r.relation_id == rid]
        slack = np.array([r.slack for r in group])
        entry = {
            "n": len(group),
            "slack_min": float(slack.min()),
            "slack_mean": float(math.fsum(slack) / slack.size),
            "slack_max": float(slack.max()),
            "negative_slack": int((slack < 0).sum()),
        }
        for flag in sorted({f for r in group for f in r.condition_flags}):
            entry[f"flag_{flag}"] = sum(r.condition_flags.get(flag, False) for r in group)
        stats[rid] = entry
    return stats


def aggregate(reports: list[RelationReport]) -> dict:
    hard = [r for r in reports if r.kind != REPORT_ONLY]
    per_relation = {}
    for rid in sorted({r.relation_id for r in reports}):
        group = [r for r in reports if r.relation_id == rid]
        per_relation[rid] = {
            "kind": group[0].kind,
            "n": len(group),
            "passed": sum(r.passed for r in group),
            "failed": sum(not r.passed for r in group),
            "max_residual": max(r.residual for r in group),
            "min_slack": min(r.slack for r in group),
        }
    return {
        "total": len(reports),
        "passed": sum(r.passed for r in hard),
        "failed": sum(not r.passed for r in hard),
        "report_only": len(reports) - len(hard),
        "report_only_violations": sum(r.condition_flags.get("violation", False) for r in reports if r.kind == REPORT_ONLY),
        "per_relation": per_relation,
        "probe_statistics": probe_statistics(reports),
    }


def suite_report(cfg: RunConfig, reports: list[RelationReport], command: str) -> dict:
    reports = _sorted(reports)
    return {
        "version": __version__,
        "command": command,
        "config": cfg.echo(),
        "reports": [r.to_dict() for r in reports],
        "aggregates": aggregate(reports),
    }


def run_verify(cfg: RunConfig) -> list[RelationReport]:
    reports = []
    for t in range(cfg.trials):
        reports.extend(trial_reports(cfg.seed, t, cfg.tolerance, cfg.cards, cfg.seq_max_card, cfg.delta_past))
    return reports


def _persist_suite(cfg: RunConfig, reports, command: str, stem: str) -> dict:
    doc = suite_report(cfg, reports, command)
    if cfg.format == "csv":
        write_reports_csv(cfg.out_dir / f"{stem}.csv", _sorted(reports))
    else:
        write_json(cfg.out_dir / f"{stem}.json", doc)
    return doc


def _summarize(doc: dict, stream=sys.stdout) -> None:
    agg = doc["aggregates"]
    print(f"{agg['passed']} passed, {agg['failed']} failed, {agg['report_only']} report-only", file=stream)
    for rid, entry in agg["per_relation"].items():
        print(f"  {rid:<40} n={entry['n']:<5} failed={entry['failed']:<4} max_residual={entry['max_residual']:.3e}", file=stream)
    for rid, st in agg["probe_statistics"].items():
        print(f"  probe {rid}: slack min {st['slack_min']:.3e} mean {st['slack_mean']:.3e} max {st['slack_max']:.3e}", file=stream)


def cmd_verify(cfg: RunConfig) -> int:
    """Run every identity and bound on seeded random models."""
    start = time.perf_counter()
    reports = run_verify(cfg)
    doc = _persist_suite(cfg, reports, "verify", "suite_report")
    logger.info("verify: %d reports in %.2f s", len(reports), time.perf_counter() - start)
    _summarize(doc)
    return EXIT_OK if doc["aggregates"]["failed"] == 0 else EXIT_FAIL


def cmd_empower(cfg: RunConfig) -> int:
    """Check the sequence divergence decomposition on random models."""
    reports = []
    for t in range(cfg.trials):
        for r in empower_reports(trial_rng(cfg.seed, t), cfg.tolerance, cfg.seq_max_card, cfg.delta_past):
            r.trial = t
            reports.append(r)
    doc = _persist_suite(cfg, reports, "empower", "empower_report")
    _summarize(doc)
    return EXIT_OK if doc["aggregates"]["failed"] == 0 else EXIT_FAIL


def cmd_fig1(cfg: RunConfig) -> int:
    """Fit a two-component mixture under both objectives."""
    start = time.perf_counter()
    grid = QuadratureGrid(n_points=cfg.grid_points)
    summary = fig1_experiment(cfg.out_dir, steps=cfg.steps, learning_rate=cfg.learning_rate, grid=grid, seed=cfg.seed)
    write_json(cfg.out_dir / "fig1_summary.json", {"version": __version__, "command": "fig1", "config": cfg.echo(), "summary": summary})
    logger.info("fig1: %.2f s", time.perf_counter() - start)
    print(
        f"divergence KL {summary['divergence']['final_kl']:.4g}; "
        f"evidence KL {summary['evidence']['final_kl']:.4g}, mass near mode {summary['evidence']['mass_near_mode']:.5f}"
    )
    if not summary["thresholds_met"]:
        print(f"not converged: thresholds unmet after {cfg.steps} steps", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_bandit(cfg: RunConfig) -> int:
    """Compare divergence and evidence policies on the bandit testbeds."""
    bandit = MatchingBandit(np.array(cfg.phi))
    closed = matching_bandit_policies(bandit)
    search = matching_bandit_search(bandit, cfg.resolution)
    bern = bernoulli_bandit_policies(np.array(cfg.theta), floor_desire(len(cfg.theta), cfg.eps), cfg.resolution)
    tv = total_variation(search.policy_divergence.weights, closed.policy_divergence.weights)
    checks = {
        "grid_divergence_within_2_resolution": tv <= 2 * cfg.resolution,
        "grid_evidence_matches_closed_form": bool(np.array_equal(search.policy_evidence.weights, closed.policy_evidence.weights)),
        "bernoulli_divergence_interior": bool(np.all(bern.policy_divergence.weights > 0)) or len(cfg.theta) == 1,
        "bernoulli_evidence_vertex": bool(np.isclose(bern.policy_evidence.weights.max(), 1.0)),
    }
    doc = {
        "version": __version__,
        "command": "bandit",
        "config": cfg.echo(),
        "matching": {"closed_form": closed.to_dict(), "grid_search": search.to_dict(), "total_variation": tv},
        "bernoulli": bern.to_dict(),
        "checks": checks,
    }
    write_json(cfg.out_dir / "bandit_report.json", doc)
    print(f"matching index (divergence) {search.matching_index:.6f}; evidence policy {closed.policy_evidence.weights.tolist()}")
    return EXIT_OK if all(checks.values()) else EXIT_FAIL


def cmd_explore(cfg: RunConfig) -> int:
    """Score the plans of the two-step information-seeking task."""
    report = twostep_plan_scores(TwoStepEnv(cfg.alpha), reward_desire(cfg.p_reward))
    checks = {"decompositions_hold": all(p.decomposition.passed for p in report.plans)}
    if cfg.alpha > 0.5 and cfg.p_reward > 0.5:
        checks["check_plan_selected"] = report.selected == "check-follow"
    if cfg.alpha == 0.5:
        checks["plans_tie"] = report.divergence_spread <= 1e-10
    doc = {"version": __version__, "command": "explore", "config": cfg.echo(), "report": report.to_dict(), "checks": checks}
    write_json(cfg.out_dir / "explore_report.json", doc)
    for p in report.plans:
        print(f"{p.plan:<13} divergence {p.divergence:.6f} evidence {p.evidence:.6f} information gain {p.information_gain:.6f}")
    print(f"selected: {report.selected}")
    return EXIT_OK if all(checks.values()) else EXIT_FAIL


COMMANDS = {"verify": cmd_verify, "fig1": cmd_fig1, "bandit": cmd_bandit, "explore": cmd_explore, "empower": cmd_empower}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--tolerance", type=float)
    common.add_argument("--out", help="output directory (falls back to $OBJLAB_OUT, then the working directory)")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--steps", type=int, help="optimizer steps for fig1")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="objlab", description="Evidence and divergence objective workbench")
    parser.add_argument("--version", action="version", version=f"objlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or name).strip().splitlines()[0] if fn.__doc__ else name)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s", stream=sys.stderr)
    overrides = {k: getattr(args, k) for k in ("seed", "trials", "tolerance", "out", "format", "steps")}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg)
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
