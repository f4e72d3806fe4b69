"""Domain types plus file ingestion and serialization.

Formats:

* Election JSON: ``{"candidates": [...], "threshold": "15/100",
  "delegates": 5, "style": "irv", "ballots": [{"ranking": [...],
  "count": 50000}, ...]}``.  The threshold may be a rational string
  ("3/20"), a decimal string ("0.15") or a JSON number.
* Cast-vote-record CSV: header ``ballot_id,ranking``; the ranking cell is
  ``|``-separated candidate labels, empty cell = blank ballot.
* Audit-spec JSON: metadata (risk parameters, seed, schema version) plus
  one object per assertion; exact rationals are serialized as strings so
  a save/load round trip is the identity.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from .assertions import (
    Assertion,
    IrvWins,
    NonViable,
    PairwiseDiff,
    Viable,
)
from .risk import RiskParams

PLURALITY = "plurality"
IRV = "irv"
STYLES = (PLURALITY, IRV)

SPEC_SCHEMA_VERSION = 1

STATUS_COMPLETE = "complete"
STATUS_FULL_COUNT = "requires-full-count"

Ranking = tuple[str, ...]


class ElectionDataError(ValueError):
    """Malformed or inconsistent input data."""


class UnsupportedOutcomeError(RuntimeError):
    """The election has no viable candidate; outside the supported rules."""


@dataclass(frozen=True)
class Candidate:
    index: int
    label: str


@dataclass(frozen=True)
class CvrRecord:
    ballot_id: str
    ranking: Ranking


@dataclass(frozen=True)
class ElectionProfile:
    """A contest: roster, aggregated ranking counts, threshold, delegates, style.

    Immutable after construction; safe to share.  ``rankings`` maps each
    distinct ranking (a tuple of labels, possibly empty = blank) to its
    ballot count, in first-seen order.
    """

    candidates: tuple[Candidate, ...]
    rankings: Mapping[Ranking, int]
    threshold: Fraction
    delegates: int
    style: str

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.candidates)

    @property
    def label_set(self) -> frozenset[str]:
        return frozenset(c.label for c in self.candidates)

    @property
    def total_ballots(self) -> int:
        return sum(self.rankings.values())

    @property
    def valid_ballots(self) -> int:
        """Ballots with at least one choice in the contest."""
        return sum(n for r, n in self.rankings.items() if r)

    def index(self, label: str) -> int:
        for cand in self.candidates:
            if cand.label == label:
                return cand.index
        raise KeyError(label)


@dataclass(frozen=True)
class Round:
    """One counting round: pile sizes for standing candidates, exhausted count,
    and the candidate removed after the count (None in the final round)."""

    piles: Mapping[str, int]
    exhausted: int
    eliminated: str | None


@dataclass(frozen=True)
class ReportedOutcome:
    """The full reported result: viable set, elimination order, tallies and
    the largest-remainder delegate allocation."""

    style: str
    threshold: Fraction
    delegates: int
    total_ballots: int
    valid_ballots: int
    viable: frozenset[str]
    elimination_order: tuple[str, ...]
    rounds: tuple[Round, ...]
    final_tally: Mapping[str, int]
    qualified_total: int
    proportions: Mapping[str, Fraction]
    quotas: Mapping[str, Fraction]
    floors: Mapping[str, int]
    leftover: int
    allocation: Mapping[str, int]
    remainder_rank: tuple[str, ...]
    tie_flag: bool
    viability_tie_warning: bool


@dataclass(frozen=True)
class SpecEntry:
    """One assertion with its exact assorter statistics and estimated effort.

    ``eae`` is an integer expected sample size, or ``math.inf`` when the
    assertion cannot be confirmed short of a full count.
    """

    assertion: Assertion
    upper_bound: Fraction
    mean: Fraction
    margin: Fraction
    eae: float


@dataclass(frozen=True)
class AuditSpec:
    entries: tuple[SpecEntry, ...]
    level: int
    status: str
    total_ballots: int
    params: RiskParams
    schema_version: int = SPEC_SCHEMA_VERSION

    @property
    def assertions(self) -> tuple[Assertion, ...]:
        return tuple(e.assertion for e in self.entries)


def parse_proportion(value: object) -> Fraction:
    """Parse a threshold/ratio given as "3/20", "0.15", or a JSON number."""
    try:
        if isinstance(value, bool):
            raise ValueError("boolean is not a proportion")
        if isinstance(value, str):
            return Fraction(value.strip())
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, float):
            return Fraction(str(value))
    except (ValueError, ZeroDivisionError) as exc:
        raise ElectionDataError(f"bad proportion {value!r}: {exc}") from None
    raise ElectionDataError(f"bad proportion {value!r}")


def build_profile(
    candidates: Sequence[str],
    ballots: Iterable[tuple[Sequence[str], int]],
    threshold: Fraction | str | float,
    delegates: int,
    style: str,
) -> ElectionProfile:
    """Validate and aggregate raw ballot data into a profile.

    Duplicate rankings are merged; validation is total — any malformed
    entry raises ElectionDataError naming the offender.
    """
    labels = list(candidates)
    if not labels:
        raise ElectionDataError("candidate roster is empty")
    if len(set(labels)) != len(labels):
        raise ElectionDataError("duplicate candidate label in roster")
    if style not in STYLES:
        raise ElectionDataError(f"unknown style {style!r} (expected one of {STYLES})")
    tau = threshold if isinstance(threshold, Fraction) else parse_proportion(threshold)
    if not 0 < tau <= 1:
        raise ElectionDataError(f"threshold {tau} outside (0, 1]")
    if not isinstance(delegates, int) or isinstance(delegates, bool) or delegates < 1:
        raise ElectionDataError(f"delegate count {delegates!r} must be a positive integer")

    roster = frozenset(labels)
    merged: dict[Ranking, int] = {}
    for ranking, count in ballots:
        if isinstance(count, bool) or not isinstance(count, int):
            raise ElectionDataError(f"non-integer ballot count {count!r}")
        if count < 0:
            raise ElectionDataError(f"negative ballot count {count}")
        prefs = tuple(ranking)
        seen: set[str] = set()
        for choice in prefs:
            if choice not in roster:
                raise ElectionDataError(f"unknown candidate {choice!r} in ranking {list(prefs)}")
            if choice in seen:
                raise ElectionDataError(f"candidate {choice!r} repeated in ranking {list(prefs)}")
            seen.add(choice)
        if style == PLURALITY and len(prefs) > 1:
            raise ElectionDataError(
                f"plurality contest cannot rank more than one candidate: {list(prefs)}"
            )
        if count == 0:
            continue
        merged[prefs] = merged.get(prefs, 0) + count

    cands = tuple(Candidate(i, label) for i, label in enumerate(labels))
    return ElectionProfile(cands, merged, tau, delegates, style)


def load_election(path: str | Path) -> ElectionProfile:
    """Load and validate an election JSON file."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ElectionDataError(f"cannot read election file {path}: {exc}") from None
    for field in ("candidates", "threshold", "delegates", "style", "ballots"):
        if field not in raw:
            raise ElectionDataError(f"election file missing {field!r}")
    ballots = []
    for i, entry in enumerate(raw["ballots"]):
        if not isinstance(entry, dict) or "ranking" not in entry or "count" not in entry:
            raise ElectionDataError(f"ballot entry {i} must have 'ranking' and 'count'")
        ballots.append((entry["ranking"], entry["count"]))
    return build_profile(raw["candidates"], ballots, raw["threshold"], raw["delegates"], raw["style"])


def save_election(profile: ElectionProfile, path: str | Path) -> None:
    payload = {
        "candidates": list(profile.labels),
        "threshold": str(profile.threshold),
        "delegates": profile.delegates,
        "style": profile.style,
        "ballots": [
            {"ranking": list(r), "count": n} for r, n in profile.rankings.items()
        ],
    }
    write_json(payload, path)


def load_cvrs(path: str | Path) -> list[CvrRecord]:
    """Load a cast-vote-record CSV (header ``ballot_id,ranking``)."""
    records: list[CvrRecord] = []
    seen: set[str] = set()
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ElectionDataError(f"cannot read CVR file {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames[:2]] != ["ballot_id", "ranking"]:
            raise ElectionDataError(f"CVR file {path} must start with header 'ballot_id,ranking'")
        for line_no, row in enumerate(reader, start=2):
            ballot_id = (row.get("ballot_id") or "").strip()
            if not ballot_id:
                raise ElectionDataError(f"{path}:{line_no}: empty ballot_id")
            if ballot_id in seen:
                raise ElectionDataError(f"{path}:{line_no}: duplicate ballot_id {ballot_id!r}")
            seen.add(ballot_id)
            records.append(CvrRecord(ballot_id, parse_ranking_cell(row.get("ranking") or "", f"{path}:{line_no}")))
    return records


def parse_ranking_cell(cell: str, where: str = "ranking") -> Ranking:
    """Parse a ``|``-separated ranking cell; empty cell means a blank ballot."""
    cell = cell.strip()
    if not cell:
        return ()
    parts = [p.strip() for p in cell.split("|")]
    if any(not p for p in parts):
        raise ElectionDataError(f"{where}: malformed ranking cell {cell!r}")
    if len(set(parts)) != len(parts):
        raise ElectionDataError(f"{where}: candidate repeated in ranking cell {cell!r}")
    return tuple(parts)


# ---------------------------------------------------------------------------
# Audit-spec serialization

_TYPE_TAGS = {Viable: "viable", NonViable: "nonviable", IrvWins: "irv_wins", PairwiseDiff: "pairwise_diff"}


def assertion_to_dict(assertion: Assertion) -> dict:
    tag = _TYPE_TAGS[type(assertion)]
    if isinstance(assertion, (Viable, NonViable)):
        return {
            "type": tag,
            "winner": assertion.candidate,
            "eliminated": sorted(assertion.eliminated),
            "t": str(assertion.threshold),
        }
    if isinstance(assertion, IrvWins):
        return {
            "type": tag,
            "winner": assertion.winner,
            "loser": assertion.loser,
            "eliminated": sorted(assertion.eliminated),
        }
    return {
        "type": tag,
        "winner": assertion.winner,
        "loser": assertion.loser,
        "d": str(assertion.offset),
        "viable": sorted(assertion.viable),
    }


def assertion_from_dict(data: dict) -> Assertion:
    try:
        tag = data["type"]
        if tag == "viable":
            return Viable(data["winner"], frozenset(data["eliminated"]), Fraction(data["t"]))
        if tag == "nonviable":
            return NonViable(data["winner"], frozenset(data["eliminated"]), Fraction(data["t"]))
        if tag == "irv_wins":
            return IrvWins(data["winner"], data["loser"], frozenset(data["eliminated"]))
        if tag == "pairwise_diff":
            return PairwiseDiff(data["winner"], data["loser"], Fraction(data["d"]), frozenset(data["viable"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise ElectionDataError(f"bad assertion object {data!r}: {exc}") from None
    raise ElectionDataError(f"unknown assertion type tag {data.get('type')!r}")


def _eae_to_json(eae: float) -> int | None:
    return None if math.isinf(eae) else int(eae)


def _eae_from_json(value: object) -> float:
    return math.inf if value is None else int(value)  # type: ignore[arg-type]


def audit_spec_to_dict(spec: AuditSpec) -> dict:
    return {
        "schema_version": spec.schema_version,
        "level": spec.level,
        "status": spec.status,
        "total_ballots": spec.total_ballots,
        "metadata": {
            "alpha": spec.params.alpha,
            "gamma": spec.params.gamma,
            "error_rate": spec.params.error_rate,
            "trials": spec.params.trials,
            "seed": spec.params.seed,
        },
        "assertions": [
            dict(
                assertion_to_dict(e.assertion),
                upper_bound=str(e.upper_bound),
                mean=str(e.mean),
                margin=str(e.margin),
                eae=_eae_to_json(e.eae),
            )
            for e in spec.entries
        ],
    }


def audit_spec_from_dict(data: dict) -> AuditSpec:
    version = data.get("schema_version")
    if version != SPEC_SCHEMA_VERSION:
        raise ElectionDataError(
            f"audit spec schema version {version!r} unsupported (expected {SPEC_SCHEMA_VERSION})"
        )
    meta = data.get("metadata", {})
    try:
        params = RiskParams(
            alpha=meta["alpha"],
            gamma=meta["gamma"],
            error_rate=meta["error_rate"],
            trials=meta["trials"],
            seed=meta["seed"],
        )
        entries = tuple(
            SpecEntry(
                assertion=assertion_from_dict(obj),
                upper_bound=Fraction(obj["upper_bound"]),
                mean=Fraction(obj["mean"]),
                margin=Fraction(obj["margin"]),
                eae=_eae_from_json(obj["eae"]),
            )
            for obj in data["assertions"]
        )
        return AuditSpec(
            entries=entries,
            level=int(data["level"]),
            status=str(data["status"]),
            total_ballots=int(data["total_ballots"]),
            params=params,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ElectionDataError(f"bad audit spec: {exc}") from None


def save_audit_spec(spec: AuditSpec, path: str | Path) -> None:
    write_json(audit_spec_to_dict(spec), path)


def load_audit_spec(path: str | Path) -> AuditSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ElectionDataError(f"cannot read audit spec {path}: {exc}") from None
    return audit_spec_from_dict(data)


# ---------------------------------------------------------------------------
# Outcome serialization

def outcome_to_dict(outcome: ReportedOutcome) -> dict:
    return {
        "style": outcome.style,
        "threshold": str(outcome.threshold),
        "delegates": outcome.delegates,
        "total_ballots": outcome.total_ballots,
        "valid_ballots": outcome.valid_ballots,
        "viable": sorted(outcome.viable),
        "elimination_order": list(outcome.elimination_order),
        "rounds": [
            {
                "piles": dict(r.piles),
                "exhausted": r.exhausted,
                "eliminated": r.eliminated,
            }
            for r in outcome.rounds
        ],
        "final_tally": dict(outcome.final_tally),
        "qualified_total": outcome.qualified_total,
        "proportions": {c: str(p) for c, p in outcome.proportions.items()},
        "quotas": {c: {"exact": str(q), "value": float(q)} for c, q in outcome.quotas.items()},
        "floors": dict(outcome.floors),
        "leftover": outcome.leftover,
        "allocation": dict(outcome.allocation),
        "remainder_rank": list(outcome.remainder_rank),
        "tie_flag": outcome.tie_flag,
        "viability_tie_warning": outcome.viability_tie_warning,
    }


def canonical_json(payload: dict) -> str:
    """Deterministic rendering: sorted keys, fixed separators, trailing newline."""
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_json(payload: dict, path: str | Path) -> None:
    Path(path).write_text(canonical_json(payload), encoding="utf-8")

