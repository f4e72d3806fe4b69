import math
import random
from collections import Counter
from fractions import Fraction

import pytest

from hamilton_rla import (
    CannotAuditError,
    RiskParams,
    RiskState,
    discrepancy,
    draw_sample,
    estimate_asn,
    estimate_audit_asn,
    km_step,
    run_audit_round,
    step_factor,
    tabulate,
)
from hamilton_rla.assertions import IrvWins, NonViable, Viable
from hamilton_rla.risk import (
    CLEAN,
    FULL_COUNT,
    ONE_VOTE,
    TWO_VOTE,
    UNDERSTATEMENT,
    read_manifest,
    write_manifest,
)
from hamilton_rla.viability import build_audit_spec

TAU = Fraction(3, 20)
BIG = 10**6


def closed_form(margin, alpha=0.05, gamma=1.1):
    if margin >= 2 * gamma:
        return 1
    return math.ceil(math.log(alpha) / math.log(1 - margin / (2 * gamma)))


def test_huge_margin_confirms_in_one_draw():
    # factor collapses to zero when margin >= 2*gamma
    state = RiskState(margin=4.073, gamma=1.1)
    assert step_factor(4.073, 1.1, CLEAN) == 0.0
    state = km_step(state, CLEAN)
    assert state.p_value == 0.0
    assert state.draws == 1
    assert estimate_asn(4.073, RiskParams(seed=3), BIG) == 1


def test_zero_error_closed_form_moderate_margin():
    params = RiskParams(error_rate=0.0, seed=5)
    assert estimate_asn(0.378, params, BIG) == closed_form(0.378) == 16
    # with the default error rate the median stays near the closed form
    assert abs(estimate_asn(0.378, RiskParams(seed=5), BIG) - 17) <= 5


def test_zero_error_closed_form_random_margins():
    rng = random.Random(99)
    params = RiskParams(error_rate=0.0, seed=8)
    for _ in range(50):
        m = rng.uniform(1e-4, 2.2 - 1e-9)
        assert estimate_asn(m, params, BIG) == closed_form(m), m
    for _ in range(10):
        m = rng.uniform(2.2, 10.0)
        assert estimate_asn(m, params, BIG) == 1


def test_overstatement_factors_exceed_clean():
    for m in (0.01, 0.12, 0.378, 1.1, 2.0):
        clean = step_factor(m, 1.1, CLEAN)
        assert step_factor(m, 1.1, UNDERSTATEMENT) == clean
        assert step_factor(m, 1.1, ONE_VOTE) > clean
        assert step_factor(m, 1.1, TWO_VOTE) > step_factor(m, 1.1, ONE_VOTE)
    # one-vote factor is clean / (1 - 1/(2*gamma))
    assert step_factor(0.12, 1.1, ONE_VOTE) == pytest.approx(
        step_factor(0.12, 1.1, CLEAN) / (1 - 1 / 2.2)
    )


def test_km_step_monotonicity_and_counts():
    state = RiskState(margin=0.3, gamma=1.1)
    p0 = state.p_value
    state = km_step(state, CLEAN)
    assert state.p_value < p0
    state = km_step(state, ONE_VOTE)
    assert state.one_vote == 1
    assert state.discrepancies == {CLEAN: 1, ONE_VOTE: 1, TWO_VOTE: 0, UNDERSTATEMENT: 0}
    assert state.draws == 2


def test_km_step_rejects_nonpositive_margin():
    with pytest.raises(CannotAuditError):
        step_factor(0.0, 1.1, CLEAN)
    with pytest.raises(CannotAuditError):
        km_step(RiskState(margin=-0.1, gamma=1.1), CLEAN)


def test_p_value_order_independent():
    """p is a function of category counts, not of processing order."""
    draws = [CLEAN] * 10 + [ONE_VOTE] * 2 + [TWO_VOTE] + [UNDERSTATEMENT] * 3
    rng = random.Random(1)
    results = set()
    for _ in range(10):
        rng.shuffle(draws)
        state = RiskState(margin=0.25, gamma=1.1)
        for cat in draws:
            state = km_step(state, cat)
        results.add(state.p_value)
    assert len(results) == 1


def test_discrepancy_categories():
    a = IrvWins("W", "L", frozenset())
    assert discrepancy(a, ("W",), ("W",)) == CLEAN
    assert discrepancy(a, ("W",), ("L",)) == TWO_VOTE  # full flip: omega = u
    assert discrepancy(a, ("W",), ()) == ONE_VOTE
    assert discrepancy(a, ("L",), ("W",)) == UNDERSTATEMENT
    v = Viable("C", frozenset(), TAU)
    # CVR says C, paper blank: omega = 1/(2t) - 1/2 > u/2
    assert discrepancy(v, ("C",), ()) == TWO_VOTE
    assert discrepancy(v, ("X",), ()) == UNDERSTATEMENT  # 0 - 1/2 < 0
    n = NonViable("C", frozenset(), TAU)
    # CVR not-C vs paper C: omega = u - 0 -> two-vote
    assert discrepancy(n, ("X",), ("C",)) == TWO_VOTE


def test_estimate_asn_nonpositive_margin_full_count():
    assert math.isinf(estimate_asn(0.0, RiskParams(seed=1), BIG))
    assert math.isinf(estimate_asn(-1, RiskParams(seed=1), BIG))


def test_estimate_asn_population_cap_sentinel():
    # margin too small to confirm within the universe
    params = RiskParams(error_rate=0.0, seed=2)
    assert math.isinf(estimate_asn(0.001, params, 100))
    assert estimate_asn(0.001, params, BIG) == closed_form(0.001)


def test_estimate_asn_reproducible_and_stream_keyed():
    params = RiskParams(seed=77)
    a = estimate_asn(0.2, params, BIG, stream="x")
    assert a == estimate_asn(0.2, params, BIG, stream="x")
    values = {estimate_asn(0.2, RiskParams(seed=s), BIG, stream="x") for s in range(5)}
    assert all(abs(v - closed_form(0.2)) < 0.5 * closed_form(0.2) for v in values)


def test_estimate_asn_monotone_in_margin_and_error():
    params = RiskParams(error_rate=0.0, seed=4)
    values = [estimate_asn(m, params, BIG) for m in (0.05, 0.1, 0.2, 0.4, 0.8, 1.6)]
    assert values == sorted(values, reverse=True)
    # statistically nondecreasing in the error rate
    lo = estimate_asn(0.05, RiskParams(error_rate=0.0, seed=6, trials=100), BIG)
    hi = estimate_asn(0.05, RiskParams(error_rate=0.02, seed=6, trials=100), BIG)
    assert hi >= lo


def test_estimate_audit_asn_is_max(plurality_profile):
    outcome = tabulate(plurality_profile)
    spec, _ = build_audit_spec(plurality_profile, outcome, 1, RiskParams(seed=42))
    per = [
        estimate_asn(e.margin, spec.params, spec.total_ballots, stream=_key(e))
        for e in spec.entries
    ]
    assert estimate_audit_asn(spec) == max(per)


def _key(entry):
    from hamilton_rla.assertions import assertion_key

    return assertion_key(entry.assertion)


def test_estimate_audit_asn_zero_margin_sentinel():
    from hamilton_rla import AuditSpec, SpecEntry

    entry = SpecEntry(
        Viable("Ann", frozenset(), TAU), Fraction(10, 3), Fraction(1, 2), Fraction(0), math.inf
    )
    spec = AuditSpec((entry,), 1, "requires-full-count", 1000, RiskParams(seed=1))
    assert math.isinf(estimate_audit_asn(spec))


def test_single_assertion_spec_asn_is_that_assertion():
    from hamilton_rla import AuditSpec, SpecEntry
    from hamilton_rla.assertions import assertion_key as ak

    a = Viable("Ann", frozenset(), TAU)
    entry = SpecEntry(a, Fraction(10, 3), Fraction(3, 4), Fraction(1, 2), 28)
    spec = AuditSpec((entry,), 1, "complete", 1000, RiskParams(seed=6))
    assert estimate_audit_asn(spec) == estimate_asn(
        Fraction(1, 2), spec.params, 1000, stream=ak(a)
    )


def test_clean_replay_confirms_at_estimated_size(plurality_profile):
    """Drawing the estimated sample with error-free paper ballots confirms."""
    outcome = tabulate(plurality_profile)
    spec, _ = build_audit_spec(plurality_profile, outcome, 1, RiskParams(seed=42))
    size = estimate_audit_asn(spec)
    assert abs(size - 46) <= 0.3 * 46
    # synthesize the full CVR universe for the contest
    cvrs = {}
    i = 0
    for ranking, count in plurality_profile.rankings.items():
        for _ in range(count):
            cvrs[f"b{i}"] = ranking
            i += 1
    manifest = draw_sample(42, int(size), list(cvrs))
    pairs = [(e.assertion, float(e.margin)) for e in spec.entries]
    states, status, _ = run_audit_round(
        pairs, cvrs, manifest, cvrs, None, alpha=0.05, gamma=1.1
    )
    assert status == "confirmed"
    assert all(s.draws == int(size) for s in states.values())


def test_draw_sample_deterministic_and_continuable():
    universe = [f"b{i}" for i in range(50)]
    first = draw_sample(123, 10, universe)
    assert first == draw_sample(123, 10, universe)
    assert draw_sample(123, 0, universe) == []
    combined = draw_sample(123, 25, universe)
    assert combined[:10] == first
    assert draw_sample(123, 15, universe, skip=10) == combined[10:]


def test_draw_sample_uniform_frequencies():
    universe = [str(i) for i in range(10)]
    counts = Counter(draw_sample(99, 1_000_000, universe))
    expect = 100_000
    sigma = math.sqrt(1_000_000 * 0.1 * 0.9)
    for label in universe:
        assert abs(counts[label] - expect) < 5 * sigma


def test_manifest_round_trip(tmp_path):
    draws = ["b3", "b1", "b3"]
    path = tmp_path / "manifest.csv"
    write_manifest(draws, path)
    assert read_manifest(path) == draws


def _toy_audit():
    a = IrvWins("W", "L", frozenset())
    cvrs = {f"b{i}": ("W",) if i % 3 else ("L",) for i in range(60)}
    return a, cvrs


def test_run_audit_round_clean_confirms():
    a, cvrs = _toy_audit()
    manifest = [f"b{i}" for i in range(1, 50) if i % 3]
    states, status, extra = run_audit_round(
        [(a, 0.5)], cvrs, manifest, cvrs, None, alpha=0.05, gamma=1.1
    )
    assert status == "confirmed"
    assert extra == 0
    (state,) = states.values()
    assert state.draws == len(manifest)
    assert state.p_value <= 0.05


def test_run_audit_round_overstatements_escalate():
    a, cvrs = _toy_audit()
    manifest = ["b1", "b2", "b4"]
    paper = {b: ("L",) for b in cvrs}  # every drawn CVR overstates maximally
    states, status, extra = run_audit_round(
        [(a, 0.5)], cvrs, manifest, paper, None, alpha=0.05, gamma=1.1
    )
    assert status == "escalate"
    assert extra > 0
    (state,) = states.values()
    assert state.two_vote == 3
    assert state.p_value == 1.0  # capped


def test_run_audit_round_missing_interpretation():
    from hamilton_rla import ElectionDataError

    a, cvrs = _toy_audit()
    with pytest.raises(ElectionDataError, match="interpretation"):
        run_audit_round([(a, 0.5)], cvrs, ["b1"], {}, None, alpha=0.05, gamma=1.1)
    with pytest.raises(ElectionDataError, match="not in the CVR"):
        run_audit_round([(a, 0.5)], cvrs, ["zz"], {"zz": ()}, None, alpha=0.05, gamma=1.1)


def test_risk_params_validation():
    with pytest.raises(ValueError):
        RiskParams(alpha=0)
    with pytest.raises(ValueError):
        RiskParams(gamma=1.0)
    with pytest.raises(ValueError):
        RiskParams(error_rate=1.0)
    with pytest.raises(ValueError):
        RiskParams(trials=0)
