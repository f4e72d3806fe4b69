"""Audit assertions and their ballot-scoring assorters.

Every assertion is an inequality over ballot proportions.  It is scored by
an *assorter*: a function assigning each ballot a nonnegative rational
bounded by ``upper_bound``.  The assertion holds on a profile exactly when
the assorter's mean over all cast ballots exceeds 1/2, i.e. when the
margin ``2 * mean - 1`` is positive.

Four assertion forms are supported:

``Viable(c, E, t)``
    Candidate ``c`` holds more than proportion ``t`` of the valid vote
    once the candidates in ``E`` are eliminated.  Ballots whose top
    remaining choice is ``c`` score ``1/(2t)``; other non-blank ballots
    score 0 (including ballots exhausted after ``E``); blank ballots
    score 1/2.

``NonViable(c, E, t)``
    Candidate ``c`` holds less than proportion ``t`` after eliminating
    ``E``.  Non-blank ballots not currently for ``c`` score
    ``1/(2(1-t))`` (exhausted ballots included); ballots for ``c`` score
    0; blanks score 1/2.

``IrvWins(w, l, E)``
    ``w`` out-tallies ``l`` after eliminating ``E``: 1 for ``w``'s pile,
    0 for ``l``'s, 1/2 for everything else.

``PairwiseDiff(m, n, d, V)``
    Among ballots qualified for the viable set ``V`` (top choice within
    ``V`` exists), ``m``'s share beats ``n``'s share by more than ``d``:
    ``1/(1+d)`` for class ``m``, 0 for class ``n``, ``1/(2(1+d))`` for a
    vote for another viable candidate, 1/2 for unqualified or blank
    ballots.

All arithmetic is exact (`fractions.Fraction`); convert to float only for
display.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Union

if TYPE_CHECKING:  # pragma: no cover
    from .model import ElectionProfile, Ranking

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class Viable:
    candidate: str
    eliminated: frozenset[str]
    threshold: Fraction

    def __post_init__(self) -> None:
        if self.candidate in self.eliminated:
            raise ValueError(f"candidate {self.candidate!r} cannot be in its own elimination set")
        if not 0 < self.threshold <= 1:
            raise ValueError(f"threshold {self.threshold} outside (0, 1]")


@dataclass(frozen=True)
class NonViable:
    candidate: str
    eliminated: frozenset[str]
    threshold: Fraction

    def __post_init__(self) -> None:
        if self.candidate in self.eliminated:
            raise ValueError(f"candidate {self.candidate!r} cannot be in its own elimination set")
        if not 0 < self.threshold < 1:
            raise ValueError(f"non-viability threshold {self.threshold} outside (0, 1)")


@dataclass(frozen=True)
class IrvWins:
    winner: str
    loser: str
    eliminated: frozenset[str]

    def __post_init__(self) -> None:
        if self.winner == self.loser:
            raise ValueError("winner and loser must differ")
        if self.winner in self.eliminated or self.loser in self.eliminated:
            raise ValueError("winner/loser cannot be in the elimination set")


@dataclass(frozen=True)
class PairwiseDiff:
    winner: str
    loser: str
    offset: Fraction
    viable: frozenset[str]

    def __post_init__(self) -> None:
        if self.winner == self.loser:
            raise ValueError("winner and loser must differ")
        if self.winner not in self.viable or self.loser not in self.viable:
            raise ValueError("both compared candidates must be in the viable set")
        if not -1 < self.offset < 1:
            raise ValueError(f"offset {self.offset} outside (-1, 1)")


Assertion = Union[Viable, NonViable, IrvWins, PairwiseDiff]


@dataclass(frozen=True)
class AssorterSummary:
    """Exact assorter statistics over one profile."""

    upper_bound: Fraction
    mean: Fraction
    margin: Fraction


def upper_bound(assertion: Assertion) -> Fraction:
    if isinstance(assertion, Viable):
        return 1 / (2 * assertion.threshold)
    if isinstance(assertion, NonViable):
        return 1 / (2 * (1 - assertion.threshold))
    if isinstance(assertion, IrvWins):
        return Fraction(1)
    if isinstance(assertion, PairwiseDiff):
        return 1 / (1 + assertion.offset)
    raise TypeError(f"not an assertion: {assertion!r}")


def _top_remaining(ranking: "Ranking", eliminated: frozenset[str]) -> str | None:
    for choice in ranking:
        if choice not in eliminated:
            return choice
    return None


def _first_choice_in(ranking: "Ranking", allowed: frozenset[str]) -> str | None:
    for choice in ranking:
        if choice in allowed:
            return choice
    return None


def assorter_value(assertion: Assertion, ranking: "Ranking") -> Fraction:
    """Score one ballot ranking under the assertion's assorter."""
    if not ranking:  # blank for the contest
        return HALF
    if isinstance(assertion, Viable):
        top = _top_remaining(ranking, assertion.eliminated)
        return upper_bound(assertion) if top == assertion.candidate else Fraction(0)
    if isinstance(assertion, NonViable):
        top = _top_remaining(ranking, assertion.eliminated)
        return Fraction(0) if top == assertion.candidate else upper_bound(assertion)
    if isinstance(assertion, IrvWins):
        top = _top_remaining(ranking, assertion.eliminated)
        if top == assertion.winner:
            return Fraction(1)
        if top == assertion.loser:
            return Fraction(0)
        return HALF
    if isinstance(assertion, PairwiseDiff):
        choice = _first_choice_in(ranking, assertion.viable)
        if choice is None:  # unqualified: no viable candidate ranked
            return HALF
        if choice == assertion.winner:
            return upper_bound(assertion)
        if choice == assertion.loser:
            return Fraction(0)
        return upper_bound(assertion) / 2
    raise TypeError(f"not an assertion: {assertion!r}")


def margin(assertion: Assertion, profile: "ElectionProfile") -> AssorterSummary:
    """Exact assorter mean and margin over every cast ballot (blanks included)."""
    total = profile.total_ballots
    if total == 0:
        raise ValueError("cannot score an empty profile")
    acc = Fraction(0)
    for ranking, count in profile.rankings.items():
        acc += count * assorter_value(assertion, ranking)
    mean = acc / total
    return AssorterSummary(upper_bound(assertion), mean, 2 * mean - 1)


def holds_on(assertion: Assertion, profile: "ElectionProfile") -> bool:
    """True iff the assertion's margin is (exactly) positive on the profile."""
    return margin(assertion, profile).margin > 0


def assertion_key(assertion: Assertion) -> str:
    """Canonical identity string: used for deduplication, ordering and PRNG streams."""
    if isinstance(assertion, Viable):
        return f"viable:{assertion.candidate}:E={','.join(sorted(assertion.eliminated))}:t={assertion.threshold}"
    if isinstance(assertion, NonViable):
        return f"nonviable:{assertion.candidate}:E={','.join(sorted(assertion.eliminated))}:t={assertion.threshold}"
    if isinstance(assertion, IrvWins):
        return f"irv_wins:{assertion.winner}>{assertion.loser}:E={','.join(sorted(assertion.eliminated))}"
    if isinstance(assertion, PairwiseDiff):
        return (
            f"pairwise_diff:{assertion.winner}>{assertion.loser}"
            f":d={assertion.offset}:V={','.join(sorted(assertion.viable))}"
        )
    raise TypeError(f"not an assertion: {assertion!r}")


def describe(assertion: Assertion) -> str:
    """Short human-readable rendering for tables and proof logs."""
    if isinstance(assertion, Viable):
        return f"Viable({assertion.candidate} | out {_set_repr(assertion.eliminated)} | t={assertion.threshold})"
    if isinstance(assertion, NonViable):
        return f"NonViable({assertion.candidate} | out {_set_repr(assertion.eliminated)} | t={assertion.threshold})"
    if isinstance(assertion, IrvWins):
        return f"IrvWins({assertion.winner} > {assertion.loser} | out {_set_repr(assertion.eliminated)})"
    if isinstance(assertion, PairwiseDiff):
        return (
            f"PairwiseDiff({assertion.winner} > {assertion.loser} + {assertion.offset}"
            f" | viable {_set_repr(assertion.viable)})"
        )
    raise TypeError(f"not an assertion: {assertion!r}")


def _set_repr(labels: frozenset[str]) -> str:
    return "{" + ",".join(sorted(labels)) + "}"
