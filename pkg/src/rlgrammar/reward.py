"""Immediate action rewards and spatially discounted action values."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable

from .core import ActionKind, AtomType, ParseTree
from .frequency import FrequencyTable

_DIGIT_RUN = re.compile(r"[0-9]+")


@dataclass
class RewardConfig:
    alpha_anchor: float = 0.4
    alpha_subgrammar: float = 0.5
    lam: float = 0.8
    integer_reward: float = 0.0

    def __post_init__(self) -> None:
        for name in ("alpha_anchor", "alpha_subgrammar", "lam"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")


def immediate_reward(kind: ActionKind, result: AtomType, freq: FrequencyTable,
                     cfg: RewardConfig) -> float:
    """Log frequency of ``result`` plus the kind's log weight.

    ``result`` is the representation whose frequency is looked up: the formed
    atom for merges and subgrammar merges, and the concatenation of both
    constituents for anchored merges.
    """
    kind = ActionKind(kind)
    if kind == ActionKind.PARSE_INTEGER:
        return cfg.integer_reward
    base = math.log(freq.effective_frequency(result))
    if kind.is_anchor:
        return base + math.log(cfg.alpha_anchor)
    if kind.is_subgram:
        return base + math.log(cfg.alpha_subgrammar)
    return base


def integer_reward_constant(corpus: Iterable[str], t_freq: float, n_freq: float = 20) -> float:
    """Log of half the steady-state frequency of integers in ``corpus``.

    Every maximal digit run is replayed through a throwaway frequency table on
    the same character clock used in training, so the constant sits on the
    same scale as the learned frequencies.
    """
    table = FrequencyTable(t_freq, n_freq)
    n_runs = 0
    for sentence in corpus:
        table.advance(len(sentence))
        for _ in _DIGIT_RUN.finditer(sentence):
            table.observe(0, 1.0)
            n_runs += 1
    if n_runs == 0:
        return math.log(1.0 / t_freq)
    return math.log(max(0.5 * table.entries[0].corrected, 1.0 / t_freq))


def spatial_values(tree: ParseTree, lam: float) -> dict[int, float]:
    """Reward of every action averaged over all actions of its connected tree.

    Each action ``m`` is weighted by ``lam ** d`` where ``d`` counts parent/child
    edges between the two nodes. Runs in linear time: one pass accumulates
    subtree sums, a second rerooting pass adds everything outside the subtree.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError("lambda must lie in (0, 1]")
    nodes = tree.nodes
    acts = tree.actions
    kids: dict[int, list[int]] = {a: [c for c in nodes[a].children if not nodes[c].is_leaf]
                                  for a in acts}
    sub_s: dict[int, float] = {}
    sub_w: dict[int, float] = {}
    # children are always created before their parents
    for a in acts:
        s, w = nodes[a].reward, 1.0
        for c in kids[a]:
            s += lam * sub_s[c]
            w += lam * sub_w[c]
        sub_s[a], sub_w[a] = s, w
    full_s: dict[int, float] = {}
    full_w: dict[int, float] = {}
    for a in reversed(acts):
        p = nodes[a].parent
        if p is None:
            full_s[a], full_w[a] = sub_s[a], sub_w[a]
        else:
            full_s[a] = sub_s[a] + lam * (full_s[p] - lam * sub_s[a])
            full_w[a] = sub_w[a] + lam * (full_w[p] - lam * sub_w[a])
    return {a: full_s[a] / full_w[a] for a in acts}
