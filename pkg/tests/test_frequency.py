import math

import numpy as np
import pytest

from oracles import replay_decay
from rlgrammar.core import ActionKind, CStats, SentenceState, TypeTable, apply_action
from rlgrammar.frequency import (ANCHOR_PENALTY, FrequencyTable, apply_anchor_penalty,
                                 estimate_counts)

M, AL, AR, SL, SR, PI = list(ActionKind)


def all_candidates(st):
    out = []
    for b in range(len(st.atoms) - 1):
        out += [(b, k) for k in (M, AL, AR, SL, SR)]
    for i in range(len(st.atoms)):
        if st.is_run_start(i):
            out.append((i, PI))
    return out


def test_no_competition_gives_ones():
    st = SentenceState("ab", TypeTable())
    stats = estimate_counts(st, 0, M, [(0, M)], lambda p, k: 1.0)
    assert stats.as_tuple() == (1.0, 1.0, 1.0, 1.0)


def test_full_overlap_non_matching_doubles():
    st = SentenceState("{a", TypeTable())
    probs = {(0, M): 0.3, (0, SL): 0.3}
    stats = estimate_counts(st, 0, M, all_candidates(st), lambda p, k: probs.get((p, k), 0.0))
    assert stats.as_tuple() == pytest.approx((2.0, 2.0, 2.0, 2.0), abs=1e-12)


def test_matching_candidate_counts_as_good():
    # two anchors over identical atoms form the same type; with an explicit
    # candidate list the chosen Merge has no match, so compare good/bad for
    # a merge whose competitor is a full-overlap subgram merge of weight 3p
    st = SentenceState("xy", TypeTable())
    stats = estimate_counts(st, 0, M, [(0, M), (0, SR)], lambda p, k: 3.0 if k == SR else 1.0)
    assert stats.c_outer == pytest.approx(4.0)


def test_single_overlap_extension_hits_outer_and_side():
    # atoms "a","b","c": chosen Merge(a,b); competitor Merge(b,c) extends right
    # and its result "bc" starts with the shared atom "b"
    st = SentenceState("abc", TypeTable())
    probs = {(0, M): 1.0, (1, M): 0.5}
    s = estimate_counts(st, 0, M, [(0, M), (1, M)], lambda p, k: probs[(p, k)])
    assert s.c_outer == pytest.approx(1.5)
    assert s.c_right == pytest.approx(1.5)
    assert s.c_left == pytest.approx(1.0)
    assert s.c_inner == pytest.approx(1.0)
    # the mirror case: chosen Merge(b,c) and competitor Merge(a,b)
    s = estimate_counts(st, 1, M, [(0, M), (1, M)], lambda p, k: {0: 0.5, 1: 1.0}[p])
    assert (s.c_outer, s.c_left, s.c_right, s.c_inner) == pytest.approx((1.5, 1.5, 1.0, 1.0))


def test_single_overlap_without_match_is_bad_everywhere():
    # competitor SubgramRight(b,c) -> "G c" does not start with "b"
    st = SentenceState("abc", TypeTable())
    s = estimate_counts(st, 0, M, [(0, M), (1, SR)], lambda p, k: 1.0)
    assert s.as_tuple() == pytest.approx((2.0, 2.0, 2.0, 2.0))


def test_equivalent_replacement_is_ignored():
    # AnchorLeft(b,c) keeps "b" itself, so it does not compete with Merge(a,b)
    st = SentenceState("abc", TypeTable())
    s = estimate_counts(st, 0, M, [(0, M), (1, AL)], lambda p, k: 1.0)
    assert s.as_tuple() == (1.0, 1.0, 1.0, 1.0)


def test_parse_integer_competitor_is_bad():
    st = SentenceState("a1", TypeTable())
    s = estimate_counts(st, 0, M, [(0, M), (1, PI)], lambda p, k: 1.0)
    assert s.as_tuple() == pytest.approx((2.0, 2.0, 2.0, 2.0))


def test_anchor_pass_through():
    table = TypeTable()
    st = SentenceState("ab", table)
    st.atoms[0].stats = CStats(2.0, 3.0, 4.0, 5.0)
    st.atoms[1].stats = CStats(7.0, 7.0, 7.0, 7.0)
    assert estimate_counts(st, 0, AL, all_candidates(st), lambda p, k: 1.0).as_tuple() == (2, 3, 4, 5)
    assert estimate_counts(st, 0, AR, all_candidates(st), lambda p, k: 1.0).as_tuple() == (7, 7, 7, 7)


def test_child_stats_propagate_by_side():
    st = SentenceState("ab", TypeTable())
    st.atoms[0].stats = CStats(9.0, 2.0, 9.0, 3.0)
    st.atoms[1].stats = CStats(9.0, 9.0, 5.0, 7.0)
    s = estimate_counts(st, 0, M, [(0, M)], lambda p, k: 1.0)
    assert s.c_outer == 2.0 * 5.0
    assert s.c_left == 2.0 * 7.0
    assert s.c_right == 3.0 * 5.0
    assert s.c_inner == 3.0 * 7.0


def test_subgram_uses_only_kept_constituent():
    st = SentenceState("ab", TypeTable())
    st.atoms[0].stats = CStats(1.0, 2.0, 1.0, 3.0)
    st.atoms[1].stats = CStats(1.0, 1.0, 5.0, 7.0)
    s = estimate_counts(st, 0, SL, [(0, SL)], lambda p, k: 1.0)
    assert s.as_tuple() == (2.0, 2.0, 3.0, 3.0)
    s = estimate_counts(st, 0, SR, [(0, SR)], lambda p, k: 1.0)
    assert s.as_tuple() == (5.0, 7.0, 5.0, 7.0)


def test_multiplier_monotone_in_competitors():
    rng = np.random.default_rng(0)
    for _ in range(200):
        st = SentenceState("".join(rng.choice(list("{}ab1"), size=6)), TypeTable())
        cands = all_candidates(st)
        probs = {c: float(rng.uniform(0.01, 1.0)) for c in cands}
        chosen = cands[int(rng.integers(len(cands)))]
        if chosen[1] == PI:
            continue
        base = estimate_counts(st, chosen[0], chosen[1], [chosen], lambda p, k: probs[(p, k)])
        full = estimate_counts(st, chosen[0], chosen[1], cands, lambda p, k: probs[(p, k)])
        assert all(f >= b - 1e-12 for f, b in zip(full.as_tuple(), base.as_tuple()))


def test_anchor_penalty_values():
    s = apply_anchor_penalty(CStats(), AL)
    assert s.as_tuple() == pytest.approx((0.6065306597,) * 4, abs=1e-10)
    twice = apply_anchor_penalty(s, SR)
    assert twice.c_outer == pytest.approx(math.exp(-1), abs=1e-15)
    assert apply_anchor_penalty(CStats(2, 2, 2, 2), M).as_tuple() == (2, 2, 2, 2)
    assert ANCHOR_PENALTY == math.exp(-0.5)


def test_observe_first():
    t = FrequencyTable(100, 20)
    t.observe(5, 1.0)
    e = t.entries[5]
    assert (e.corrected, e.uncorrected, e.snapshot) == (1.0, 1.0, 1.0)


def test_observe_two_one_period_apart():
    # the unclamped e^-1 decay only applies when e^-1 >= e^(-1/N), i.e. N <= 1
    t = FrequencyTable(1000, 1)
    t.observe(1, 1.0)
    t.advance(1000)
    t.observe(1, 1.0)
    assert t.entries[1].corrected == pytest.approx(1 + math.exp(-1), abs=1e-12)
    # with the default N = 20 the clamp takes over
    t = FrequencyTable(1000, 20)
    t.observe(1, 1.0)
    t.advance(1000)
    t.observe(1, 1.0)
    assert t.entries[1].corrected == pytest.approx(1 + math.exp(-1 / 20), abs=1e-12)


def test_clamp_after_long_silence():
    t = FrequencyTable(100, 5)
    t.observe(1, 2.0)
    t.advance(1000)
    t.observe(1, 0.0)
    assert t.entries[1].corrected == pytest.approx(2.0 * math.exp(-1 / 5), abs=1e-12)
    assert t.entries[1].uncorrected == pytest.approx(1 + math.exp(-1 / 5), abs=1e-12)


def test_decay_over_one_period_without_observations():
    t = FrequencyTable(500, 20)
    t.observe(3, 4.0)
    t.advance(500)
    c, u = t.current(3)
    assert c == pytest.approx(4.0 * math.exp(-1), abs=1e-9)
    assert u == pytest.approx(math.exp(-1), abs=1e-9)


def test_decay_law_matches_replay_oracle():
    rng = np.random.default_rng(3)
    for trial in range(50):
        T, N = float(rng.uniform(50, 500)), float(rng.uniform(0.5, 30))
        t = FrequencyTable(T, N)
        sched = []
        clock = 0
        for _ in range(int(rng.integers(1, 30))):
            clock += int(rng.integers(0, 800))
            sched.append((clock, float(rng.uniform(0, 5))))
        for c, v in sched:
            t.advance(c - t.char_clock)
            t.observe(0, v)
        corr, unc, snap = replay_decay(sched, T, N)
        e = t.entries[0]
        assert e.corrected == pytest.approx(corr, abs=1e-9)
        assert e.uncorrected == pytest.approx(unc, abs=1e-9)
        assert e.snapshot == pytest.approx(snap, abs=1e-9)


def test_corrected_at_least_uncorrected_for_merges():
    rng = np.random.default_rng(4)
    t = FrequencyTable(300, 10)
    for _ in range(500):
        t.advance(int(rng.integers(0, 100)))
        t.observe(int(rng.integers(5)), 1.0 + float(rng.exponential()))
        for e in t.entries.values():
            assert e.corrected >= e.uncorrected >= 0


def test_negative_count_rejected():
    with pytest.raises(ValueError):
        FrequencyTable().observe(0, -0.1)


def test_effective_frequency_rules():
    t = FrequencyTable(10000, 20)
    assert t.effective_frequency(42) == pytest.approx(1e-4)
    for _ in range(5):
        t.observe(7, 1.0)
    assert t.effective_frequency(7) == pytest.approx(1e-4)   # still in its first batch
    t.end_batch()
    assert t.effective_frequency(7) == pytest.approx(t.entries[7].snapshot)
    t.entries[7].snapshot = 5.0
    assert t.effective_frequency(7) == 5.0


def test_snapshot_tracks_uncorrected_peak():
    t = FrequencyTable(100, 1000)
    t.observe(0, 10.0)
    t.advance(10000)
    t.observe(0, 1.0)   # uncorrected 1 + e^-0.001 exceeds the first peak
    snap = t.entries[0].snapshot
    assert snap == pytest.approx(10 * math.exp(-1 / 1000) + 1)


def test_penalized_anchor_observation_replay():
    # an anchor chain multiplies the logged count by e^-1/2 per step
    table = TypeTable()
    st = SentenceState("{{{", table)
    t = FrequencyTable(1000, 20)
    for step in range(2):
        s = estimate_counts(st, 0, AL, all_candidates(st), lambda p, k: 1.0)
        s = apply_anchor_penalty(s, AL)
        formed = st.result_of(0, AL)
        apply_action(st, 0, AL, s)
        t.observe(formed, s.c_outer)
    corr, unc, _ = replay_decay([(0, math.exp(-0.5)), (0, math.exp(-1.0))], 1000, 20)
    assert t.entries[formed.type_id].corrected == pytest.approx(corr, abs=1e-12)
