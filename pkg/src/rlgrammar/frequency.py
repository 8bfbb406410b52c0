"""Policy-robust atom frequency estimation.

Each time an action forms an atom, the count logged for its representation is
corrected upward by the probability mass of nearby competing actions that would
have prevented it (``1 + sum(bad) / sum(good)``). Counts are exponentially
averaged on a character clock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

from .core import ActionKind, AtomType, CStats, SentenceState

ANCHOR_PENALTY = math.exp(-0.5)

_STATS = ("c_outer", "c_left", "c_right", "c_inner")


def apply_anchor_penalty(stats: CStats, kind: ActionKind = ActionKind.ANCHOR_LEFT) -> CStats:
    """Scale all four stats by e^(-1/2) for anchored and subgrammar merges."""
    kind = ActionKind(kind)
    if kind.is_anchor or kind.is_subgram:
        return stats.scaled(ANCHOR_PENALTY)
    return CStats(*stats.as_tuple())


def estimate_counts(state: SentenceState, position: int, kind: ActionKind,
                    candidates: Iterable[tuple[int, ActionKind]],
                    policy_prob: Callable[[int, ActionKind], float]) -> CStats:
    """Count statistics for the atom the chosen action would form.

    ``candidates`` are the currently valid actions as ``(position, kind)``;
    ParseInteger candidates use the index of their run's first atom. Only
    those whose consumed atoms intersect the chosen action's are considered.
    ``policy_prob`` returns a value proportional to the current policy
    probability of a candidate.
    """
    kind = ActionKind(kind)
    atoms = state.atoms
    if kind.is_anchor:
        kept = atoms[position] if kind == ActionKind.ANCHOR_LEFT else atoms[position + 1]
        return CStats(*kept.stats.as_tuple())

    lo, hi = state.affected(position, kind)
    result = state.result_of(position, kind)
    if kind == ActionKind.SUBGRAM_LEFT:
        members = [lo]
    elif kind == ActionKind.SUBGRAM_RIGHT:
        members = [hi]
    else:
        members = list(range(lo, hi + 1))

    stats = dict.fromkeys(_STATS, 1.0)
    # position within the representation, which for subgrammar merges also
    # holds the replacement token (never an atom of the sentence)
    rep_lo = lo
    rep_hi = hi
    for i in members:
        t = atoms[i].stats
        if i == rep_lo:
            stats["c_outer"] *= t.c_left
            stats["c_left"] *= t.c_left
            stats["c_right"] *= t.c_inner
            stats["c_inner"] *= t.c_inner
        elif i == rep_hi:
            stats["c_outer"] *= t.c_right
            stats["c_right"] *= t.c_right
            stats["c_left"] *= t.c_inner
            stats["c_inner"] *= t.c_inner

    good = policy_prob(position, kind)
    bad = dict.fromkeys(_STATS, 0.0)
    for zpos, zkind in candidates:
        zkind = ActionKind(zkind)
        if zpos == position and zkind == kind:
            continue
        zlo, zhi = state.affected(zpos, zkind)
        if zhi < lo or zlo > hi:
            continue
        p = policy_prob(zpos, zkind)
        zres = state.result_of(zpos, zkind)
        if (zlo, zhi) == (lo, hi):
            if zres is result:
                good += p
            else:
                for k in _STATS:
                    bad[k] += p
            continue
        if zkind == ActionKind.PARSE_INTEGER or (lo <= zlo and zhi <= hi):
            for k in _STATS:
                bad[k] += p
            continue
        # exactly one consumed atom is shared
        shared = atoms[hi] if zhi > hi else atoms[lo]
        if zres is shared.type:
            continue
        if zhi > hi and zres.tokens[:len(shared.type.tokens)] == shared.type.tokens:
            bad["c_outer"] += p
            bad["c_right"] += p
        elif zlo < lo and zres.tokens[-len(shared.type.tokens):] == shared.type.tokens:
            bad["c_outer"] += p
            bad["c_left"] += p
        else:
            for k in _STATS:
                bad[k] += p

    assert good > 0.0, "chosen action must have positive probability"
    return CStats(*(stats[k] * (1.0 + bad[k] / good) for k in _STATS))


@dataclass
class FrequencyEntry:
    corrected: float = 0.0
    uncorrected: float = 0.0
    high_water: float = 0.0
    snapshot: float = 0.0
    last_clock: int = 0
    established: bool = False


class FrequencyTable:
    """Exponentially averaged corrected/uncorrected counts per atom type.

    Averages decay by e^-1 every ``t_freq`` characters of input, but the decay
    applied between two observations of the same type is never stronger than
    e^(-1/n_freq). The value used for rewards is the corrected average captured
    when the uncorrected average last reached a new peak.
    """

    def __init__(self, t_freq: float = 10000, n_freq: float = 20) -> None:
        self.t_freq = float(t_freq)
        self.n_freq = float(n_freq)
        self.char_clock = 0
        self.entries: dict[int, FrequencyEntry] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def advance(self, n_chars: int) -> None:
        self.char_clock += int(n_chars)

    def _decay(self, elapsed: float) -> float:
        return max(math.exp(-elapsed / self.t_freq), math.exp(-1.0 / self.n_freq))

    def observe(self, atype: AtomType | int, c_outer: float) -> None:
        if c_outer < 0:
            raise ValueError("c_outer must be non-negative")
        key = atype if isinstance(atype, int) else atype.type_id
        e = self.entries.get(key)
        if e is None:
            e = self.entries[key] = FrequencyEntry(last_clock=self.char_clock)
        else:
            f = self._decay(self.char_clock - e.last_clock)
            e.corrected *= f
            e.uncorrected *= f
            e.last_clock = self.char_clock
        e.corrected += c_outer
        e.uncorrected += 1.0
        if e.uncorrected > e.high_water:
            e.high_water = e.uncorrected
            e.snapshot = e.corrected

    def end_batch(self) -> None:
        """Mark every type observed so far as usable for rewards."""
        for e in self.entries.values():
            e.established = True

    def effective_frequency(self, atype: AtomType | int) -> float:
        key = atype if isinstance(atype, int) else atype.type_id
        e = self.entries.get(key)
        floor = 1.0 / self.t_freq
        if e is None or not e.established:
            return floor
        return max(e.snapshot, floor)

    def current(self, atype: AtomType | int) -> tuple[float, float]:
        """(corrected, uncorrected) averages decayed to the present clock."""
        key = atype if isinstance(atype, int) else atype.type_id
        e = self.entries.get(key)
        if e is None:
            return 0.0, 0.0
        f = math.exp(-(self.char_clock - e.last_clock) / self.t_freq)
        return e.corrected * f, e.uncorrected * f

    def top(self, k: int = 10) -> list[tuple[int, float]]:
        ranked = sorted(self.entries.items(), key=lambda kv: (-kv[1].snapshot, kv[0]))
        return [(tid, e.snapshot) for tid, e in ranked[:k]]
