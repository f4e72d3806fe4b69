"""Assertion-set generation certifying the reported viable set.

Plurality contests are direct: one ``Viable`` assertion per reported
viable candidate and one ``NonViable`` per reported non-viable candidate
rules out every other outcome.

Instant-runoff contests need more work.  First the alternative-outcome
space is reduced: ``W`` collects candidates whose first-preference pile
already clears the threshold (they are viable in every outcome, since a
pile never shrinks and the cutoff denominator is fixed), and ``L``
collects candidates who stay short of the threshold even with every
other non-``W`` candidate eliminated (they can never be viable).  Their
reduction assertions are always part of the emitted set.  Only viable
sets containing ``W``, avoiding ``L`` and no larger than
``floor(1/threshold)`` remain possible.

Each remaining alternative set roots a tree of outcomes.  A node pins
the final segment of an elimination sequence (everything unmentioned is
assumed already eliminated, in some order).  Expanding a node prepends
one more elimination; a node is invalidated by an assertion showing that
elimination impossible at that point (the candidate still cleared the
threshold, or out-tallied someone standing), and a root is invalidated
by an assertion contradicting the final state (a member below threshold
with everyone else gone, or an outsider whose first preferences alone
make them viable).  A branch-and-bound search over these trees picks a
cheap assertion per branch, pruning whole subtrees and any frontier node
whose best assertion costs no more than the current lower bound on audit
effort.  If some complete branch admits no assertion at all, no audit
short of a full manual count certifies the outcome.

When ``W`` is empty one more alternative is reachable: every candidate
eliminated and nobody viable.  That outcome is enumerated as an extra
tree (empty viable set) so a complete specification excludes it too.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

from .assertions import (
    Assertion,
    AssorterSummary,
    IrvWins,
    NonViable,
    PairwiseDiff,
    Viable,
    assertion_key,
    describe,
    upper_bound,
)
from .delegates import gen_delegate_assertions, pairwise_diff_margin, qualified_tallies
from .model import (
    IRV,
    PLURALITY,
    STATUS_COMPLETE,
    STATUS_FULL_COUNT,
    AuditSpec,
    ElectionProfile,
    ReportedOutcome,
    SpecEntry,
)
from .risk import RiskParams, estimate_assertion_asn
from .tabulation import count_piles


def max_viable(threshold: Fraction) -> int:
    """Largest number of candidates that can all hold the threshold share."""
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold {threshold} outside (0, 1]")
    return threshold.denominator // threshold.numerator


class AuditContext:
    """Per-profile caches: piles by elimination set, margins and effort by assertion."""

    def __init__(self, profile: ElectionProfile, params: RiskParams | None = None):
        self.profile = profile
        self.params = params or RiskParams()
        self.total = profile.total_ballots
        self.valid = profile.valid_ballots
        self.blank = self.total - self.valid
        self.threshold = profile.threshold
        self.labels = profile.labels
        self.index = {c: i for i, c in enumerate(self.labels)}
        self._piles: dict[frozenset[str], dict[str, int]] = {}
        self._qualified: dict[frozenset[str], dict[str, int]] = {}
        self._summaries: dict[str, AssorterSummary] = {}
        self._eae: dict[str, float] = {}

    def piles(self, eliminated: frozenset[str]) -> dict[str, int]:
        cached = self._piles.get(eliminated)
        if cached is None:
            cached, _ = count_piles(self.profile, eliminated)
            self._piles[eliminated] = cached
        return cached

    def pile(self, candidate: str, eliminated: frozenset[str]) -> int:
        return self.piles(eliminated)[candidate]

    def qualified(self, viable: frozenset[str]) -> dict[str, int]:
        cached = self._qualified.get(viable)
        if cached is None:
            cached = qualified_tallies(self.profile, viable)
            self._qualified[viable] = cached
        return cached

    def holds(self, assertion: Assertion) -> bool:
        """Exact margin-positivity test via integer tallies."""
        if isinstance(assertion, Viable):
            tally = self.pile(assertion.candidate, assertion.eliminated)
            return tally * assertion.threshold.denominator > assertion.threshold.numerator * self.valid
        if isinstance(assertion, NonViable):
            tally = self.pile(assertion.candidate, assertion.eliminated)
            return tally * assertion.threshold.denominator < assertion.threshold.numerator * self.valid
        if isinstance(assertion, IrvWins):
            piles = self.piles(assertion.eliminated)
            return piles[assertion.winner] > piles[assertion.loser]
        if isinstance(assertion, PairwiseDiff):
            tallies = self.qualified(assertion.viable)
            q = sum(tallies.values())
            d = assertion.offset
            return (tallies[assertion.winner] - tallies[assertion.loser]) * d.denominator > d.numerator * q
        raise TypeError(f"not an assertion: {assertion!r}")

    def summary(self, assertion: Assertion) -> AssorterSummary:
        """Exact assorter summary computed from cached tallies."""
        key = assertion_key(assertion)
        cached = self._summaries.get(key)
        if cached is not None:
            return cached
        u = upper_bound(assertion)
        half_blank = Fraction(self.blank, 2)
        if isinstance(assertion, Viable):
            tally = self.pile(assertion.candidate, assertion.eliminated)
            mean = (tally * u + half_blank) / self.total
        elif isinstance(assertion, NonViable):
            tally = self.pile(assertion.candidate, assertion.eliminated)
            mean = ((self.valid - tally) * u + half_blank) / self.total
        elif isinstance(assertion, IrvWins):
            piles = self.piles(assertion.eliminated)
            w, l = piles[assertion.winner], piles[assertion.loser]
            mean = (w + Fraction(self.total - w - l, 2)) / self.total
        elif isinstance(assertion, PairwiseDiff):
            tallies = self.qualified(assertion.viable)
            q = sum(tallies.values())
            margin = pairwise_diff_margin(
                tallies[assertion.winner], tallies[assertion.loser], q, self.total, assertion.offset
            )
            mean = (margin + 1) / 2
        else:
            raise TypeError(f"not an assertion: {assertion!r}")
        result = AssorterSummary(u, mean, 2 * mean - 1)
        self._summaries[key] = result
        return result

    def eae(self, assertion: Assertion) -> float:
        key = assertion_key(assertion)
        cached = self._eae.get(key)
        if cached is None:
            cached = estimate_assertion_asn(assertion, self.summary(assertion).margin, self.params, self.total)
            self._eae[key] = cached
        return cached

    def entry(self, assertion: Assertion) -> SpecEntry:
        s = self.summary(assertion)
        return SpecEntry(assertion, s.upper_bound, s.mean, s.margin, self.eae(assertion))


def compute_W_L(
    profile: ElectionProfile,
    params: RiskParams | None = None,
    ctx: AuditContext | None = None,
) -> tuple[frozenset[str], frozenset[str], tuple[SpecEntry, ...]]:
    """Definite-viable and never-viable candidates plus their reduction assertions.

    Membership requires the assertion to hold with a *finite* estimated
    sample size; a positive but microscopic margin buys nothing, since
    confirming it would already take a full count.
    """
    ctx = ctx or AuditContext(profile, params)
    tau = ctx.threshold
    winners: list[str] = []
    entries: list[SpecEntry] = []
    for c in ctx.labels:
        assertion = Viable(c, frozenset(), tau)
        if ctx.holds(assertion) and not math.isinf(ctx.eae(assertion)):
            winners.append(c)
            entries.append(ctx.entry(assertion))
    w_set = frozenset(winners)
    losers: list[str] = []
    if tau < 1:
        for c in ctx.labels:
            if c in w_set:
                continue
            eliminated = frozenset(ctx.labels) - w_set - {c}
            assertion = NonViable(c, eliminated, tau)
            if ctx.holds(assertion) and not math.isinf(ctx.eae(assertion)):
                losers.append(c)
                entries.append(ctx.entry(assertion))
    return w_set, frozenset(losers), tuple(entries)


def enumerate_alt_sets(
    labels: Sequence[str],
    winners: frozenset[str],
    losers: frozenset[str],
    cap: int,
    reported: frozenset[str],
) -> list[frozenset[str]]:
    """Alternative viable sets: contain all of ``winners``, avoid ``losers``,
    hold 1..cap candidates, and differ from the reported set."""
    free = [c for c in labels if c not in winners and c not in losers]
    out: list[frozenset[str]] = []
    for extra in range(0, max(0, cap - len(winners)) + 1):
        for combo in combinations(free, extra):
            vset = frozenset(winners | set(combo))
            if not 1 <= len(vset) <= cap:
                continue
            if vset == reported:
                continue
            out.append(vset)
    return out


@dataclass
class AltOutcomeNode:
    """A class of alternative outcomes: ``eliminated_suffix`` is the pinned
    tail of the elimination sequence in chronological order (its last entry
    is the final elimination) and ``viable`` the resulting viable set; every
    unmentioned candidate is assumed eliminated, in some order, beforehand."""

    eliminated_suffix: tuple[str, ...]
    viable: frozenset[str]
    assertion: Assertion | None = None
    eae: float = math.inf
    parent: "AltOutcomeNode | None" = None
    children: list["AltOutcomeNode"] = field(default_factory=list, repr=False)
    pruned: bool = False
    expanded: bool = False

    @property
    def depth(self) -> int:
        return len(self.eliminated_suffix)

    def unmentioned(self, labels: Sequence[str]) -> list[str]:
        pinned = set(self.eliminated_suffix) | self.viable
        return [c for c in labels if c not in pinned]

    def is_leaf(self, labels: Sequence[str]) -> bool:
        return not self.unmentioned(labels)

    def describe(self) -> str:
        tail = " -> ".join(self.eliminated_suffix) if self.eliminated_suffix else "(any order)"
        v = "{" + ",".join(sorted(self.viable)) + "}" if self.viable else "{}"
        return f"[... {tail} | viable {v}]"


def _cheapest(options: Iterable[Assertion], ctx: AuditContext) -> tuple[Assertion | None, float]:
    best: Assertion | None = None
    best_eae = math.inf
    for assertion in options:
        eae = ctx.eae(assertion)
        if best is None or eae < best_eae:
            best, best_eae = assertion, eae
    return best, best_eae if best is not None else math.inf


def best_root_assertion(vset: frozenset[str], ctx: AuditContext) -> tuple[Assertion | None, float]:
    """Cheapest assertion contradicting ``vset`` as the final viable set.

    Either an outsider is viable on first preferences alone (so belongs in
    every viable set), or a member's pile stays below the threshold even
    with every non-member eliminated.  Both contradict the final state no
    matter how the eliminations were ordered.
    """
    tau = ctx.threshold
    options: list[Assertion] = []
    for c in ctx.labels:
        if c not in vset:
            a = Viable(c, frozenset(), tau)
            if ctx.holds(a):
                options.append(a)
    if tau < 1:
        others = frozenset(ctx.labels) - vset
        for c in ctx.labels:
            if c in vset:
                a = NonViable(c, others, tau)
                if ctx.holds(a):
                    options.append(a)
    return _cheapest(options, ctx)


def expand_node(node: AltOutcomeNode, ctx: AuditContext) -> list[AltOutcomeNode]:
    """One child per unmentioned candidate, pinning it as the next elimination.

    The child's assertion must show that elimination impossible with
    exactly the remaining unmentioned candidates gone: either the
    candidate still clears the threshold there, or it out-tallies someone
    who is still standing (a pinned or viable candidate).
    """
    tau = ctx.threshold
    unmentioned = node.unmentioned(ctx.labels)
    standing_later = list(node.eliminated_suffix) + [c for c in ctx.labels if c in node.viable]
    children: list[AltOutcomeNode] = []
    for cand in unmentioned:
        rest = frozenset(u for u in unmentioned if u != cand)
        options: list[Assertion] = []
        viable_a = Viable(cand, rest, tau)
        if ctx.holds(viable_a):
            options.append(viable_a)
        for other in standing_later:
            beats = IrvWins(cand, other, rest)
            if ctx.holds(beats):
                options.append(beats)
        assertion, eae = _cheapest(options, ctx)
        child = AltOutcomeNode(
            eliminated_suffix=(cand,) + node.eliminated_suffix,
            viable=node.viable,
            assertion=assertion,
            eae=eae,
            parent=node,
        )
        node.children.append(child)
        children.append(child)
    node.expanded = True
    return children


@dataclass
class GenerationResult:
    entries: tuple[SpecEntry, ...]
    status: str
    proof_log: tuple[str, ...]


def _prune(node: AltOutcomeNode) -> None:
    node.pruned = True
    for child in node.children:
        if not child.pruned:
            _prune(child)


def _sort_key(node: AltOutcomeNode, ctx: AuditContext) -> tuple:
    return (
        tuple(ctx.index[c] for c in node.eliminated_suffix),
        tuple(sorted(ctx.index[c] for c in node.viable)),
    )


def _pop_next(frontier: list[AltOutcomeNode], ctx: AuditContext) -> AltOutcomeNode | None:
    """Highest finite estimated effort first; unresolved (infinite) nodes
    last; ties toward deeper nodes, then roster order."""
    live = [n for n in frontier if not n.pruned]
    frontier[:] = live
    if not live:
        return None
    best = min(
        live,
        key=lambda n: (
            (0, -n.eae) if not math.isinf(n.eae) else (1, 0.0),
            -n.depth,
            _sort_key(n, ctx),
        ),
    )
    frontier.remove(best)
    return best


def branch_and_bound(
    profile: ElectionProfile,
    outcome: ReportedOutcome,
    params: RiskParams | None = None,
) -> GenerationResult:
    """Viability assertion set for an instant-runoff contest.

    Returns the reduction assertions plus one invalidating assertion per
    pruned branch of the alternative-outcome forest; status is
    ``requires-full-count`` when some branch admits no assertion.
    """
    if profile.style != IRV:
        raise ValueError("branch and bound applies to instant-runoff contests")
    ctx = AuditContext(profile, params)
    winners, losers, reductions = compute_W_L(profile, ctx=ctx)
    log: list[str] = [
        f"definite viable W = {sorted(winners)}; never viable L = {sorted(losers)}"
    ]
    entries: dict[str, SpecEntry] = {}
    for entry in reductions:
        entries[assertion_key(entry.assertion)] = entry
        log.append(f"reduction: {describe(entry.assertion)} margin {float(entry.margin):.4f} eae {entry.eae}")

    cap = max_viable(ctx.threshold)
    alt_sets = enumerate_alt_sets(ctx.labels, winners, losers, cap, outcome.viable)
    if not winners:
        # with no first-preference lock, total collapse (nobody viable) is
        # also a reachable outcome and needs ruling out
        alt_sets.append(frozenset())

    lower_bound = 0.0
    status = STATUS_COMPLETE

    def add_assertion(node: AltOutcomeNode, why: str) -> None:
        assert node.assertion is not None
        key = assertion_key(node.assertion)
        if key not in entries:
            entries[key] = ctx.entry(node.assertion)
        log.append(f"{why}: prune {node.describe()} with {describe(node.assertion)} (eae {node.eae})")

    def sweep(frontier: list[AltOutcomeNode]) -> None:
        for waiting in frontier:
            if not waiting.pruned and waiting.eae <= lower_bound:
                add_assertion(waiting, f"bound {lower_bound}")
                _prune(waiting)

    def process_leaf(leaf: AltOutcomeNode, frontier: list[AltOutcomeNode]) -> bool:
        nonlocal lower_bound
        branch: list[AltOutcomeNode] = []
        walk: AltOutcomeNode | None = leaf
        while walk is not None:
            branch.append(walk)
            walk = walk.parent
        best = min(branch, key=lambda n: (n.eae, n.depth))
        if math.isinf(best.eae):
            log.append(f"FAIL: no assertion invalidates branch {leaf.describe()}")
            return False
        add_assertion(best, "branch")
        lower_bound = max(lower_bound, best.eae)
        _prune(best)
        sweep(frontier)
        return True

    frontier: list[AltOutcomeNode] = []
    for vset in alt_sets:
        root = AltOutcomeNode((), vset)
        root.assertion, root.eae = best_root_assertion(vset, ctx)
        if root.is_leaf(ctx.labels):
            if not process_leaf(root, frontier):
                status = STATUS_FULL_COUNT
                break
        else:
            frontier.append(root)

    while status == STATUS_COMPLETE:
        node = _pop_next(frontier, ctx)
        if node is None:
            break
        for child in expand_node(node, ctx):
            if node.pruned:
                break
            if child.pruned:
                continue
            if child.is_leaf(ctx.labels):
                if not process_leaf(child, frontier):
                    status = STATUS_FULL_COUNT
                    break
            else:
                frontier.append(child)

    ordered = tuple(entries.values())
    if status == STATUS_COMPLETE and any(
        e.margin <= 0 or math.isinf(e.eae) for e in ordered
    ):
        status = STATUS_FULL_COUNT
    log.append(f"status: {status}; assertions: {len(ordered)}")
    return GenerationResult(ordered, status, tuple(log))


def gen_plurality_viability(
    profile: ElectionProfile,
    outcome: ReportedOutcome,
    params: RiskParams | None = None,
) -> GenerationResult:
    """One Viable per reported-viable candidate, one NonViable per other.

    Jointly these pin the viable set exactly, so no outcome search is
    needed.  Any nonpositive margin (a candidate sitting exactly on the
    threshold) makes the contest unauditable short of a full count.
    """
    if profile.style != PLURALITY:
        raise ValueError("plurality generation applies to plurality contests")
    ctx = AuditContext(profile, params)
    tau = ctx.threshold
    entries: list[SpecEntry] = []
    log: list[str] = []
    status = STATUS_COMPLETE
    for c in ctx.labels:
        if c in outcome.viable:
            assertion: Assertion = Viable(c, frozenset(), tau)
        else:
            if tau == 1:
                log.append(f"FAIL: no non-viability assertion exists for {c} at threshold 1")
                status = STATUS_FULL_COUNT
                continue
            assertion = NonViable(c, frozenset(), tau)
        entry = ctx.entry(assertion)
        entries.append(entry)
        log.append(f"{describe(assertion)} margin {float(entry.margin):.4f} eae {entry.eae}")
        if entry.margin <= 0 or math.isinf(entry.eae):
            # exactly on or too near the threshold: no affordable audit exists
            status = STATUS_FULL_COUNT
    log.append(f"status: {status}; assertions: {len(entries)}")
    return GenerationResult(tuple(entries), status, tuple(log))


def build_audit_spec(
    profile: ElectionProfile,
    outcome: ReportedOutcome,
    level: int,
    params: RiskParams | None = None,
) -> tuple[AuditSpec, tuple[str, ...]]:
    """Assemble the audit specification for one level.

    Level 1 certifies viability only; levels 2 and 3 add the delegate
    allocation assertions (slack 2 and 1 respectively).
    """
    if level not in (1, 2, 3):
        raise ValueError("audit level must be 1, 2 or 3")
    params = params or RiskParams()
    if profile.style == PLURALITY:
        result = gen_plurality_viability(profile, outcome, params)
    else:
        result = branch_and_bound(profile, outcome, params)
    entries = list(result.entries)
    log = list(result.proof_log)
    status = result.status

    if level >= 2:
        dset = gen_delegate_assertions(outcome, level)
        tallies = qualified_tallies(profile, outcome.viable)
        qualified = sum(tallies.values())
        for assertion in dset.assertions:
            margin = pairwise_diff_margin(
                tallies[assertion.winner],
                tallies[assertion.loser],
                qualified,
                profile.total_ballots,
                assertion.offset,
            )
            eae = estimate_assertion_asn(assertion, margin, params, profile.total_ballots)
            entries.append(
                SpecEntry(assertion, upper_bound(assertion), (margin + 1) / 2, margin, eae)
            )
            log.append(f"delegates: {describe(assertion)} margin {float(margin):.4f} eae {eae}")
            if margin <= 0 or math.isinf(eae):
                status = STATUS_FULL_COUNT
        for skip in dset.skipped:
            log.append(
                f"delegates: skip ({skip.winner}, {skip.loser}) d={skip.offset}: {skip.reason}"
            )
        if dset.tie_flag:
            log.append("delegates: exact remainder tie at the award boundary; full count required")
            status = STATUS_FULL_COUNT

    spec = AuditSpec(
        entries=tuple(entries),
        level=level,
        status=status,
        total_ballots=profile.total_ballots,
        params=params,
    )
    return spec, tuple(log)
