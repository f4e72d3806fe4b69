"""Command-line interface: tabulate, generate, estimate, audit init/round.

Exit codes: 0 success/confirmed, 2 input error, 3 unsupported outcome
(no viable candidate), 4 full manual count required, 5 audit escalation
needed.  All randomness flows from one seed; when none is given a fresh
seed is generated and printed.  With ``--format json`` every command
writes deterministic JSON (same inputs and seed give byte-identical
output); timing goes to stderr.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import secrets
import sys
import time
from pathlib import Path

from . import model, risk, tabulation, viability
from .assertions import assertion_key, describe
from .model import (
    STATUS_COMPLETE,
    STATUS_FULL_COUNT,
    AuditSpec,
    ElectionDataError,
    UnsupportedOutcomeError,
)
from .risk import RiskParams, RiskState

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_UNSUPPORTED = 3
EXIT_FULL_COUNT = 4
EXIT_ESCALATE = 5

STATE_SCHEMA_VERSION = 1


def _risk_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, default=0.05, help="risk limit (default 0.05)")
    parser.add_argument("--gamma", type=float, default=1.1, help="inflation factor (default 1.1)")
    parser.add_argument(
        "--error-rate", type=float, default=0.002, help="simulated overstatement rate (default 0.002)"
    )
    parser.add_argument("--trials", type=int, default=20, help="simulation trials (default 20)")
    parser.add_argument("--seed", type=int, default=None, help="PRNG seed (generated and printed if absent)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hamilton-rla",
        description="Tabulate and audit largest-remainder delegate elections",
    )
    parser.add_argument("--format", choices=("text", "json"), default="text")
    sub = parser.add_subparsers(dest="command", required=True)

    p_tab = sub.add_parser("tabulate", help="compute the reported outcome")
    p_tab.add_argument("--election", required=True)
    p_tab.add_argument("--out", help="write the outcome JSON here")

    p_gen = sub.add_parser("generate", help="generate the audit assertion set")
    p_gen.add_argument("--election", required=True)
    p_gen.add_argument("--level", type=int, choices=(1, 2, 3), default=1)
    p_gen.add_argument("--out", help="audit spec path (default: <election>.levelN.spec.json)")
    p_gen.add_argument("--proof-log", help="write the pruning log here")
    _risk_args(p_gen)

    p_est = sub.add_parser("estimate", help="estimate sample sizes for levels 1-3")
    p_est.add_argument("--election", required=True)
    _risk_args(p_est)

    p_audit = sub.add_parser("audit", help="run comparison-audit rounds")
    audit_sub = p_audit.add_subparsers(dest="phase", required=True)
    p_init = audit_sub.add_parser("init", help="draw the first-round sample")
    p_init.add_argument("--spec", required=True)
    p_init.add_argument("--cvrs", required=True)
    p_init.add_argument("--manifest", required=True, help="manifest CSV to write")
    p_init.add_argument("--state", required=True, help="audit state file to create")
    p_init.add_argument("--seed", type=int, default=None, help="sampling seed (default: spec seed)")
    p_round = audit_sub.add_parser("round", help="apply one round of manual interpretations")
    p_round.add_argument("--spec", required=True)
    p_round.add_argument("--cvrs", required=True)
    p_round.add_argument("--manifest", required=True, help="this round's manifest CSV")
    p_round.add_argument("--interpretations", required=True, help="manual interpretations CSV")
    p_round.add_argument("--state", required=True)
    p_round.add_argument("--next-manifest", help="where to write the next manifest when escalating")
    return parser


def _params_from(args: argparse.Namespace) -> RiskParams:
    seed = args.seed
    if seed is None:
        seed = secrets.randbelow(2**63)
        print(f"seed: {seed} (generated)", file=sys.stderr)
    return RiskParams(
        alpha=args.alpha,
        gamma=args.gamma,
        error_rate=args.error_rate,
        trials=args.trials,
        seed=seed,
    )


def _emit(payload: dict, args: argparse.Namespace, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _fmt_asn(value: float) -> str:
    return "--" if math.isinf(value) else str(int(value))


def cmd_tabulate(args: argparse.Namespace) -> int:
    profile = model.load_election(args.election)
    outcome = tabulation.tabulate(profile)
    payload = model.outcome_to_dict(outcome)
    if args.out:
        model.write_json(payload, args.out)
    lines = [
        f"style: {outcome.style}  ballots: {outcome.total_ballots}  valid: {outcome.valid_ballots}",
        f"viable: {', '.join(sorted(outcome.viable))}",
    ]
    if outcome.elimination_order:
        lines.append(f"eliminated (in order): {', '.join(outcome.elimination_order)}")
    for i, rnd in enumerate(outcome.rounds, start=1):
        piles = "  ".join(
            f"{c}={n} ({100.0 * n / outcome.valid_ballots:.3f}%)" for c, n in rnd.piles.items()
        )
        suffix = f"; exhausted {rnd.exhausted}" if rnd.exhausted else ""
        out = f" -> out: {rnd.eliminated}" if rnd.eliminated else ""
        lines.append(f"round {i}: {piles}{suffix}{out}")
    lines.append(f"qualified votes: {outcome.qualified_total}")
    for c in sorted(outcome.viable):
        lines.append(
            f"  {c}: quota {float(outcome.quotas[c]):.3f} -> {outcome.allocation[c]} of {outcome.delegates} delegates"
        )
    if outcome.tie_flag or outcome.viability_tie_warning:
        lines.append("warning: tie broken during tabulation; affected margins are zero")
    _emit(payload, args, "\n".join(lines))
    return EXIT_OK


def _spec_table(spec: AuditSpec) -> str:
    rows = [f"level {spec.level}  status {spec.status}  assertions {len(spec.entries)}"]
    for e in spec.entries:
        rows.append(f"  margin {float(e.margin):9.4f}  eae {_fmt_asn(e.eae):>6}  {describe(e.assertion)}")
    overall = risk.estimate_audit_asn(spec)
    rows.append(f"overall expected draws: {_fmt_asn(overall)}")
    return "\n".join(rows)


def cmd_generate(args: argparse.Namespace) -> int:
    profile = model.load_election(args.election)
    params = _params_from(args)
    outcome = tabulation.tabulate(profile)
    spec, log = viability.build_audit_spec(profile, outcome, args.level, params)
    out_path = args.out or f"{Path(args.election).with_suffix('')}.level{args.level}.spec.json"
    model.save_audit_spec(spec, out_path)
    if args.proof_log:
        Path(args.proof_log).write_text("\n".join(log) + "\n", encoding="utf-8")
    payload = model.audit_spec_to_dict(spec)
    payload["spec_path"] = str(out_path)
    _emit(payload, args, _spec_table(spec) + f"\nspec written to {out_path}")
    if spec.status == STATUS_FULL_COUNT:
        print("full manual count required", file=sys.stderr)
        return EXIT_FULL_COUNT
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    profile = model.load_election(args.election)
    params = _params_from(args)
    started = time.perf_counter()
    outcome = tabulation.tabulate(profile)
    levels: dict[str, dict] = {}
    text = [
        f"candidates: {len(profile.labels)}  ballots: {profile.total_ballots}",
    ]
    any_full_count = False
    for level in (1, 2, 3):
        spec, _ = viability.build_audit_spec(profile, outcome, level, params)
        overall = risk.estimate_audit_asn(spec)
        if spec.status == STATUS_FULL_COUNT:
            overall = math.inf
            any_full_count = True
        levels[str(level)] = {
            "status": spec.status,
            "assertions": len(spec.entries),
            "overall_asn": None if math.isinf(overall) else int(overall),
            "per_assertion": [
                {
                    "assertion": describe(e.assertion),
                    "margin": float(e.margin),
                    "asn": None if math.isinf(e.eae) else int(e.eae),
                }
                for e in spec.entries
            ],
        }
        text.append(f"level {level}: ASN {_fmt_asn(overall)} ({len(spec.entries)} assertions, {spec.status})")
    elapsed = time.perf_counter() - started
    print(f"generation time: {elapsed:.3f}s", file=sys.stderr)
    payload = {
        "candidates": len(profile.labels),
        "ballots": profile.total_ballots,
        "levels": levels,
    }
    _emit(payload, args, "\n".join(text))
    return EXIT_FULL_COUNT if any_full_count else EXIT_OK


def _state_checksum(payload: dict) -> str:
    body = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(body).hexdigest()


def _save_state(state: dict, path: str) -> None:
    document = {"checksum": _state_checksum(state), "state": state}
    Path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_state(path: str) -> dict:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ElectionDataError(f"cannot read audit state {path}: {exc}") from None
    state = document.get("state")
    if state is None or document.get("checksum") != _state_checksum(state):
        raise ElectionDataError(f"audit state {path} is missing or tampered (checksum mismatch)")
    return state


def cmd_audit_init(args: argparse.Namespace) -> int:
    spec = model.load_audit_spec(args.spec)
    cvrs = model.load_cvrs(args.cvrs)
    if spec.status == STATUS_FULL_COUNT:
        print("spec requires a full manual count; nothing to sample", file=sys.stderr)
        return EXIT_FULL_COUNT
    size = risk.estimate_audit_asn(spec)
    if math.isinf(size):
        print("expected sample size exceeds the ballot universe; full count", file=sys.stderr)
        return EXIT_FULL_COUNT
    seed = args.seed if args.seed is not None else spec.params.seed
    universe = [r.ballot_id for r in cvrs]
    draws = risk.draw_sample(seed, int(size), universe)
    risk.write_manifest(draws, args.manifest)
    state = {
        "schema_version": STATE_SCHEMA_VERSION,
        "seed": seed,
        "alpha": spec.params.alpha,
        "gamma": spec.params.gamma,
        "total_draws": 0,
        "rounds": [],
        "assertions": {},
    }
    _save_state(state, args.state)
    payload = {"manifest": args.manifest, "draws": len(draws), "seed": seed, "state": args.state}
    _emit(payload, args, f"first-round manifest: {len(draws)} draws -> {args.manifest} (seed {seed})")
    return EXIT_OK


def cmd_audit_round(args: argparse.Namespace) -> int:
    spec = model.load_audit_spec(args.spec)
    cvr_records = model.load_cvrs(args.cvrs)
    cvrs = {r.ballot_id: r.ranking for r in cvr_records}
    manifest = risk.read_manifest(args.manifest)
    interp_records = model.load_cvrs(args.interpretations)
    interpretations = {r.ballot_id: r.ranking for r in interp_records}
    state = _load_state(args.state)

    pairs = [(e.assertion, float(e.margin)) for e in spec.entries]
    prior: dict[str, RiskState] = {}
    for key, saved in state["assertions"].items():
        prior[key] = RiskState(
            margin=saved["margin"],
            gamma=state["gamma"],
            draws=saved["draws"],
            clean=saved["clean"],
            one_vote=saved["one_vote"],
            two_vote=saved["two_vote"],
            understatement=saved["understatement"],
        )
    states, status, suggestion = risk.run_audit_round(
        pairs, cvrs, manifest, interpretations, prior, state["alpha"], state["gamma"]
    )

    state["total_draws"] += len(manifest)
    state["rounds"].append(
        {
            "manifest": list(manifest),
            "interpretations": {b: "|".join(interpretations[b]) for b in manifest},
        }
    )
    state["assertions"] = {
        key: {
            "margin": s.margin,
            "draws": s.draws,
            "clean": s.clean,
            "one_vote": s.one_vote,
            "two_vote": s.two_vote,
            "understatement": s.understatement,
            "p_value": s.p_value,
        }
        for key, s in states.items()
    }
    _save_state(state, args.state)

    per_assertion = {
        assertion_key(e.assertion): {
            "margin": float(e.margin),
            "p_value": states[assertion_key(e.assertion)].p_value,
            "draws": states[assertion_key(e.assertion)].draws,
            "discrepancies": states[assertion_key(e.assertion)].discrepancies,
        }
        for e in spec.entries
    }
    payload = {
        "status": status,
        "total_draws": state["total_draws"],
        "suggested_additional_draws": None if status == "confirmed" else int(suggestion),
        "assertions": per_assertion,
    }
    lines = [f"status: {status}  cumulative draws: {state['total_draws']}"]
    for e in spec.entries:
        s = states[assertion_key(e.assertion)]
        lines.append(f"  p={s.p_value:.6f} draws={s.draws}  {describe(e.assertion)}")
    if status == "escalate":
        lines.append(f"suggested additional draws: {int(suggestion)}")
        if args.next_manifest:
            universe = [r.ballot_id for r in cvr_records]
            draws = risk.draw_sample(state["seed"], int(suggestion), universe, skip=state["total_draws"])
            risk.write_manifest(draws, args.next_manifest)
            lines.append(f"next manifest -> {args.next_manifest}")
            payload["next_manifest"] = args.next_manifest
    _emit(payload, args, "\n".join(lines))
    return EXIT_OK if status == "confirmed" else EXIT_ESCALATE


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "tabulate":
            return cmd_tabulate(args)
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "estimate":
            return cmd_estimate(args)
        if args.command == "audit":
            if args.phase == "init":
                return cmd_audit_init(args)
            return cmd_audit_round(args)
        parser.error(f"unknown command {args.command!r}")
    except ElectionDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UnsupportedOutcomeError as exc:
        print(f"unsupported outcome: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
