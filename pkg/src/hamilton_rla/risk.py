"""Risk measurement for ballot-level comparison audits with replacement.

The measured risk (p-value) for an assertion with assorter margin ``m``
is a product of per-draw factors in the Kaplan-Markov "super-simple"
comparison form with inflation factor ``gamma``:

* clean draw or understatement: ``max(0, 1 - m/(2*gamma))``
* one-vote overstatement:       clean factor / ``(1 - 1/(2*gamma))``
* two-vote overstatement:       clean factor / ``(1 - 1/gamma)``

An assertion is confirmed once its p-value falls to the risk limit
``alpha``.  With no errors the required number of draws is exactly
``ceil(ln(alpha) / ln(1 - m/(2*gamma)))``; a margin of ``2*gamma`` or
more confirms on the first draw.  Understatements are conservatively
given the clean factor, never less.

Expected sample sizes (ASN) are estimated by simulation: ballots are
drawn one at a time, each independently a one-vote overstatement with
probability ``error_rate``, until the p-value reaches ``alpha`` or every
ballot has been reviewed (the full-count sentinel).  The estimate is the
median trial length over ``trials`` runs.  Each trial's PRNG stream is
derived from (seed, stream label, trial index), so estimates do not
depend on evaluation order.
"""
from __future__ import annotations

import csv
import math
import random
import statistics
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from .assertions import Assertion, assertion_key, assorter_value, upper_bound

if TYPE_CHECKING:  # pragma: no cover
    from .model import AuditSpec, Ranking

FULL_COUNT = math.inf

CLEAN = "clean"
ONE_VOTE = "one_vote"
TWO_VOTE = "two_vote"
UNDERSTATEMENT = "understatement"
CATEGORIES = (CLEAN, ONE_VOTE, TWO_VOTE, UNDERSTATEMENT)


class CannotAuditError(ValueError):
    """Raised when asked to measure risk for a nonpositive margin."""


@dataclass(frozen=True)
class RiskParams:
    alpha: float = 0.05
    gamma: float = 1.1
    error_rate: float = 0.002
    trials: int = 20
    seed: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha {self.alpha} outside (0, 1)")
        if self.gamma <= 1:
            raise ValueError(f"gamma {self.gamma} must exceed 1")
        if not 0 <= self.error_rate < 1:
            raise ValueError(f"error rate {self.error_rate} outside [0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be positive")


@dataclass(frozen=True)
class RiskState:
    """Per-assertion audit progress: draw and discrepancy counts.

    The p-value is the (capped) product of per-draw factors; computing it
    from counts keeps it independent of the order in which ballots were
    processed.
    """

    margin: float
    gamma: float
    draws: int = 0
    clean: int = 0
    one_vote: int = 0
    two_vote: int = 0
    understatement: int = 0

    @property
    def p_value(self) -> float:
        f_clean = step_factor(self.margin, self.gamma, CLEAN)
        f_one = step_factor(self.margin, self.gamma, ONE_VOTE)
        f_two = step_factor(self.margin, self.gamma, TWO_VOTE)
        raw = f_clean ** (self.clean + self.understatement)
        if self.one_vote:
            raw *= f_one**self.one_vote
        if self.two_vote:
            raw *= f_two**self.two_vote
        return min(1.0, raw)

    @property
    def discrepancies(self) -> dict[str, int]:
        return {
            CLEAN: self.clean,
            ONE_VOTE: self.one_vote,
            TWO_VOTE: self.two_vote,
            UNDERSTATEMENT: self.understatement,
        }


def step_factor(margin: float, gamma: float, category: str) -> float:
    """Multiplicative p-value factor for one drawn ballot."""
    if margin <= 0:
        raise CannotAuditError(f"margin {margin} is not positive; assertion cannot be audited")
    clean = max(0.0, 1.0 - margin / (2.0 * gamma))
    if category in (CLEAN, UNDERSTATEMENT):
        return clean
    if category == ONE_VOTE:
        return clean / (1.0 - 1.0 / (2.0 * gamma))
    if category == TWO_VOTE:
        return clean / (1.0 - 1.0 / gamma)
    raise ValueError(f"unknown discrepancy category {category!r}")


def km_step(state: RiskState, category: str) -> RiskState:
    """Record one drawn ballot of the given discrepancy category."""
    step_factor(state.margin, state.gamma, category)  # validates margin and category
    field = {CLEAN: "clean", ONE_VOTE: "one_vote", TWO_VOTE: "two_vote", UNDERSTATEMENT: "understatement"}[category]
    return replace(state, draws=state.draws + 1, **{field: getattr(state, field) + 1})


def discrepancy(assertion: Assertion, cvr: "Ranking", paper: "Ranking") -> str:
    """Classify a CVR-vs-paper comparison in assorter units.

    The overstatement is ``assorter(cvr) - assorter(paper)``: zero is
    clean, negative an understatement; positive overstatements are
    one-vote up to half the assorter's upper bound and two-vote beyond.
    """
    omega = assorter_value(assertion, cvr) - assorter_value(assertion, paper)
    if omega == 0:
        return CLEAN
    if omega < 0:
        return UNDERSTATEMENT
    if omega <= upper_bound(assertion) / 2:
        return ONE_VOTE
    return TWO_VOTE


def _trial_draws(
    margin: float,
    params: RiskParams,
    population: int,
    rng: random.Random,
) -> float:
    """Length of one simulated audit: draws until p <= alpha or the ballots run out.

    Equivalent to drawing ballots one at a time with per-draw error
    probability ``error_rate``, but skips between error positions
    (geometric gaps), so a trial costs O(number of errors).
    """
    clean = max(0.0, 1.0 - margin / (2.0 * params.gamma))
    if clean <= 0.0:
        return 1 if population >= 1 else FULL_COUNT
    over = clean / (1.0 - 1.0 / (2.0 * params.gamma))
    log_clean = math.log(clean)
    log_over = math.log(over)
    log_target = math.log(params.alpha)
    log_p = 0.0
    draws = 0
    while draws < population:
        if params.error_rate > 0.0:
            # next overstatement is `gap` draws ahead (inclusive), geometric
            u = 1.0 - rng.random()
            gap = int(math.log(u) / math.log(1.0 - params.error_rate)) + 1
        else:
            gap = population - draws + 1
        clean_run = gap - 1
        need = math.ceil((log_target - log_p) / log_clean)
        if need <= clean_run:
            if draws + need <= population:
                return draws + need
            break
        take = min(clean_run, population - draws)
        log_p += take * log_clean
        draws += take
        if draws >= population:
            break
        draws += 1  # the overstatement draw itself
        log_p = min(0.0, log_p + log_over)
        if log_p <= log_target:
            return draws
    return FULL_COUNT


def estimate_asn(
    margin: float | Fraction,
    params: RiskParams,
    population: int,
    stream: str = "",
) -> float:
    """Median simulated sample size for one assertion; inf if unauditable.

    ``stream`` labels the PRNG stream (normally the assertion identity) so
    that concurrent or reordered estimation reproduces the same value.
    """
    if margin <= 0:
        return FULL_COUNT
    if population < 1:
        return FULL_COUNT
    m = float(margin)
    lengths = [
        _trial_draws(m, params, population, random.Random(f"{params.seed}|{stream}|{trial}"))
        for trial in range(params.trials)
    ]
    med = statistics.median(lengths)
    return med if math.isinf(med) else int(math.ceil(med))


def estimate_assertion_asn(assertion: Assertion, margin: float | Fraction, params: RiskParams, population: int) -> float:
    return estimate_asn(margin, params, population, stream=assertion_key(assertion))


def estimate_audit_asn(spec: "AuditSpec", params: RiskParams | None = None) -> float:
    """Overall expected draws: the max over assertions, since every drawn
    ballot is scored against every assertion."""
    params = params or spec.params
    if not spec.entries:
        return 0
    worst = 0.0
    for entry in spec.entries:
        est = estimate_asn(entry.margin, params, spec.total_ballots, stream=assertion_key(entry.assertion))
        worst = max(worst, est)
        if math.isinf(worst):
            return FULL_COUNT
    return int(worst)


def draw_sample(seed: int, count: int, universe: Sequence[str], skip: int = 0) -> list[str]:
    """Deterministic uniform sample with replacement from ``universe``.

    ``skip`` discards that many leading draws, so successive audit rounds
    continue a single stream: round two's manifest is
    ``draw_sample(seed, n2, universe, skip=n1)``.
    """
    if not universe:
        raise ValueError("cannot sample from an empty universe")
    if count < 0 or skip < 0:
        raise ValueError("count and skip must be nonnegative")
    rng = random.Random(f"{seed}|sample")
    size = len(universe)
    for _ in range(skip):
        rng.randrange(size)
    return [universe[rng.randrange(size)] for _ in range(count)]


def write_manifest(draws: Sequence[str], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["draw_index", "ballot_id"])
        for i, ballot_id in enumerate(draws, start=1):
            writer.writerow([i, ballot_id])


def read_manifest(path: str | Path) -> list[str]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "ballot_id" not in reader.fieldnames:
            raise ValueError(f"manifest {path} must have a ballot_id column")
        return [row["ballot_id"] for row in reader]


def run_audit_round(
    assertions: Sequence[tuple[Assertion, float]],
    cvrs: Mapping[str, "Ranking"],
    manifest: Iterable[str],
    interpretations: Mapping[str, "Ranking"],
    prior: Mapping[str, RiskState] | None,
    alpha: float,
    gamma: float,
) -> tuple[dict[str, RiskState], str, float]:
    """Apply one round of drawn ballots to every assertion.

    ``assertions`` pairs each assertion with its margin.  Returns the
    updated per-assertion states (keyed by assertion identity), the round
    status (``confirmed`` or ``escalate``), and, when escalating, the
    suggested number of additional draws assuming clean ballots.
    """
    states: dict[str, RiskState] = {}
    for assertion, m in assertions:
        key = assertion_key(assertion)
        if prior and key in prior:
            states[key] = prior[key]
        else:
            states[key] = RiskState(margin=float(m), gamma=gamma)

    from .model import ElectionDataError  # local import to keep risk model-free at module load

    for ballot_id in manifest:
        if ballot_id not in cvrs:
            raise ElectionDataError(f"drawn ballot {ballot_id!r} is not in the CVR file")
        if ballot_id not in interpretations:
            raise ElectionDataError(f"no manual interpretation for drawn ballot {ballot_id!r}")
        cvr = cvrs[ballot_id]
        paper = interpretations[ballot_id]
        for assertion, _ in assertions:
            key = assertion_key(assertion)
            states[key] = km_step(states[key], discrepancy(assertion, cvr, paper))

    unconfirmed = {k: s for k, s in states.items() if s.p_value > alpha}
    if not unconfirmed:
        return states, "confirmed", 0
    suggestion = 0.0
    for state in unconfirmed.values():
        f_clean = step_factor(state.margin, state.gamma, CLEAN)
        if f_clean <= 0.0:
            extra = 1.0
        else:
            extra = math.ceil((math.log(alpha) - math.log(state.p_value)) / math.log(f_clean))
        suggestion = max(suggestion, extra)
    return states, "escalate", suggestion
