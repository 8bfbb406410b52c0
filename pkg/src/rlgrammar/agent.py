"""Sliding-window parsing agent.

Every boundary between two adjacent atoms is scored from a fixed window of
atom embeddings: the two atoms the action would consume plus ``context`` atoms
on either side (zeros past the sentence ends). A boundary is keyed by the
character offset where its right atom starts, which stays valid while atoms
around it merge. ParseInteger candidates live on the boundary to the left of
their run's first atom, so a run at the start of a sentence uses offset 0.

Scores are cached in sorted lists; after each action only the boundaries whose
windows touch the new atom are re-scored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np
from sortedcontainers import SortedList

from .core import (MERGE_KINDS, N_ACTIONS, ActionKind, AtomType, ParseTree,
                   SentenceState, TypeTable, apply_action)
from .embedding import Embedder
from .frequency import FrequencyTable, apply_anchor_penalty, estimate_counts
from .nn import DenseResNet
from .replay import Memory
from .reward import RewardConfig, immediate_reward, spatial_values

Window = tuple[AtomType | None, ...]


class Scorer(Protocol):
    def score(self, windows: Sequence[Window]) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(critic, actor)`` arrays of shape ``(len(windows), 6)``."""


class NetworkScorer:
    """Scores windows with a critic and an actor network in eval mode."""

    def __init__(self, critic: DenseResNet, actor: DenseResNet, embedder: Embedder) -> None:
        self.critic = critic
        self.actor = actor
        self.embedder = embedder
        self.rows_evaluated = 0

    def embed(self, windows: Sequence[Window]) -> np.ndarray:
        return np.stack([self.embedder.window(w, self.critic.dtype) for w in windows])

    def score(self, windows):
        x = self.embed(windows)
        self.rows_evaluated += len(windows)
        _, critic = self.critic.forward(x, train=False)
        _, actor = self.actor.forward(x, train=False)
        return critic.astype(np.float64), actor.astype(np.float64)


def evaluate_window(critic: DenseResNet, actor: DenseResNet, embedder: Embedder,
                    window: Window) -> tuple[np.ndarray, np.ndarray]:
    """Critic values and actor logits for all six kinds at one window."""
    critic_q, actor_q = NetworkScorer(critic, actor, embedder).score([window])
    return critic_q[0], actor_q[0]


class RuleScorer:
    """Scores windows with a plain function; useful for hand-built policies.

    ``rule(window, context)`` returns six actor logits; critic values equal
    the logits unless ``critic_rule`` is given.
    """

    def __init__(self, rule: Callable[[Window, int], Sequence[float]],
                 critic_rule: Callable[[Window, int], Sequence[float]] | None = None,
                 context: int = 0) -> None:
        self.rule = rule
        self.critic_rule = critic_rule or rule
        self.context = context
        self.rows_evaluated = 0

    def score(self, windows):
        self.rows_evaluated += len(windows)
        actor = np.array([self.rule(w, self.context) for w in windows], dtype=np.float64)
        critic = np.array([self.critic_rule(w, self.context) for w in windows], dtype=np.float64)
        return critic.reshape(-1, N_ACTIONS), actor.reshape(-1, N_ACTIONS)


@dataclass
class ActionCandidate:
    offset: int
    kind: ActionKind
    critic_value: float
    actor_logit: float
    window: Window


@dataclass
class _Slot:
    valid: tuple[ActionKind, ...]
    critic: np.ndarray
    actor: np.ndarray
    window: Window


class CandidateQueue:
    """Valid candidates ordered by actor logit and by critic value."""

    def __init__(self) -> None:
        self.slots: dict[int, _Slot] = {}
        self._by_policy = SortedList()
        self._by_value = SortedList()

    def __len__(self) -> int:
        return len(self._by_policy)

    def __bool__(self) -> bool:
        return len(self._by_policy) > 0

    def set(self, offset: int, valid, critic, actor, window) -> None:
        self.remove(offset)
        valid = tuple(ActionKind(k) for k in valid)
        self.slots[offset] = _Slot(valid, np.asarray(critic, dtype=np.float64),
                                   np.asarray(actor, dtype=np.float64), window)
        for k in valid:
            self._by_policy.add((-float(actor[k]), offset, int(k)))
            self._by_value.add((float(critic[k]), offset, int(k)))

    def remove(self, offset: int) -> None:
        slot = self.slots.pop(offset, None)
        if slot is None:
            return
        for k in slot.valid:
            self._by_policy.remove((-float(slot.actor[k]), offset, int(k)))
            self._by_value.remove((float(slot.critic[k]), offset, int(k)))

    def candidate(self, offset: int, kind: ActionKind) -> ActionCandidate:
        s = self.slots[offset]
        return ActionCandidate(offset, ActionKind(kind), float(s.critic[kind]),
                               float(s.actor[kind]), s.window)

    def best_policy(self) -> ActionCandidate:
        _, off, k = self._by_policy[0]
        return self.candidate(off, k)

    def policy_at(self, i: int) -> ActionCandidate:
        _, off, k = self._by_policy[i]
        return self.candidate(off, k)

    def max_critic(self) -> float:
        return self._by_value[-1][0]

    def count_better(self, critic_value: float) -> tuple[int, int]:
        """(first index, count) of entries with critic strictly above the value."""
        i = self._by_value.bisect_right((critic_value, math.inf, math.inf))
        return i, len(self._by_value) - i

    def value_at(self, i: int) -> ActionCandidate:
        _, off, k = self._by_value[i]
        return self.candidate(off, k)

    def entries(self):
        for off, s in self.slots.items():
            for k in s.valid:
                yield off, k


def select_action(queue: CandidateQueue, epsilon: float, rng: np.random.Generator):
    """Epsilon-greedy choice plus a uniformly sampled strictly better alternative."""
    if not queue:
        raise RuntimeError("no candidate actions to select from")
    if epsilon > 0 and rng.random() < epsilon:
        chosen = queue.policy_at(int(rng.integers(len(queue))))
    else:
        chosen = queue.best_policy()
    start, n = queue.count_better(chosen.critic_value)
    better = queue.value_at(start + int(rng.integers(n))) if n else None
    return chosen, better


@dataclass
class ParseResult:
    state: SentenceState
    memories: list[Memory] = field(default_factory=list)
    values: dict[int, float] = field(default_factory=dict)
    evaluations: int = 0

    @property
    def tree(self) -> ParseTree:
        return self.state.tree


class Parser:
    """Runs greedy or epsilon-greedy parses against a scorer.

    In ``explore`` mode one memory is emitted per applied action and atom
    observations are returned for the caller to commit to the frequency table.
    """

    def __init__(self, table: TypeTable, scorer: Scorer, freq: FrequencyTable,
                 reward_cfg: RewardConfig, context: int = 0,
                 embedder: Embedder | None = None, critic_floor: float | None = None) -> None:
        self.table = table
        self.scorer = scorer
        self.freq = freq
        self.reward_cfg = reward_cfg
        self.context = context
        self.embedder = embedder
        self.critic_floor = critic_floor

    def window_types(self, state: SentenceState, r: int) -> Window:
        atoms = state.atoms
        n = len(atoms)
        return tuple(atoms[i].type if 0 <= i < n else None
                     for i in range(r - 1 - self.context, r + 1 + self.context))

    def _valid_kinds(self, state: SentenceState, r: int) -> list[ActionKind]:
        kinds = list(MERGE_KINDS) if r >= 1 else []
        if state.is_run_start(r):
            kinds.append(ActionKind.PARSE_INTEGER)
        return kinds

    def refresh(self, state: SentenceState, queue: CandidateQueue, indices) -> int:
        """Re-score the boundaries whose right atom has one of ``indices``."""
        atoms = state.atoms
        windows, metas = [], []
        for r in indices:
            if not 0 <= r < len(atoms):
                continue
            off = atoms[r].start
            queue.remove(off)
            kinds = self._valid_kinds(state, r)
            if kinds:
                windows.append(self.window_types(state, r))
                metas.append((off, kinds))
        if windows:
            critic, actor = self.scorer.score(windows)
            for (off, kinds), w, c, a in zip(metas, windows, critic, actor):
                queue.set(off, kinds, c, a, w)
        return len(windows)

    def _comparison_set(self, state, queue, lo, hi):
        atoms = state.atoms
        rs = set(range(lo, hi + 2))
        for i in range(lo, hi + 1):
            if state.is_digit_atom(i):
                rs.add(state.digit_run(i)[0])
        out = []
        for r in sorted(rs):
            if not 0 <= r < len(atoms):
                continue
            slot = queue.slots.get(atoms[r].start)
            if slot is None:
                continue
            for k in slot.valid:
                pos = r if k == ActionKind.PARSE_INTEGER else r - 1
                out.append((pos, k, float(slot.actor[k])))
        return out

    def parse(self, sentence: str, mode: str = "greedy", epsilon: float = 0.0,
              rng: np.random.Generator | None = None, observations: list | None = None) -> ParseResult:
        if mode not in ("greedy", "explore"):
            raise ValueError(f"unknown parse mode {mode!r}")
        explore = mode == "explore"
        eps = epsilon if explore else 0.0
        rng = rng if rng is not None else np.random.default_rng(0)
        if explore and self.embedder is None:
            raise ValueError("explore mode needs an embedder for memory windows")
        state = SentenceState(sentence, self.table)
        queue = CandidateQueue()
        result = ParseResult(state)
        result.evaluations += self.refresh(state, queue, range(len(state.atoms)))
        while queue:
            if self.critic_floor is not None and queue.max_critic() <= self.critic_floor:
                break
            chosen, better = select_action(queue, eps, rng)
            r = state.index_at(chosen.offset)
            kind = chosen.kind
            position = r if kind == ActionKind.PARSE_INTEGER else r - 1
            lo, hi = state.affected(position, kind)

            cands = self._comparison_set(state, queue, lo, hi)
            top = max(l for _, _, l in cands)
            logits = {(p, k): l for p, k, l in cands}
            stats = estimate_counts(state, position, kind, [(p, k) for p, k, _ in cands],
                                    lambda p, k: math.exp(logits[(p, k)] - top))
            formed = state.result_of(position, kind)
            # an anchor's counted atom is the kept one, but its reward looks up
            # the plain concatenation of both constituents
            looked_up = state.result_of(position, ActionKind.MERGE) if kind.is_anchor else formed
            reward = immediate_reward(kind, looked_up, self.freq, self.reward_cfg)
            stats = apply_anchor_penalty(stats, kind)
            if observations is not None:
                observations.append((formed, stats.c_outer))

            if explore:
                mem = Memory(self.embedder.window(chosen.window), kind)
                if better is not None:
                    mem.better_window = self.embedder.window(better.window)
                    mem.better_kind = better.kind
                result.memories.append(mem)

            gone = [state.atoms[i].start for i in range(lo + 1, hi + 1)]
            node = apply_action(state, position, kind, stats, reward)
            if explore:
                result.memories[-1].node_id = node.node_id
            for off in gone:
                queue.remove(off)
            c = self.context
            result.evaluations += self.refresh(state, queue, range(lo - c, lo + c + 2))

        if state.tree.actions:
            result.values = spatial_values(state.tree, self.reward_cfg.lam)
            for mem in result.memories:
                mem.realized_value = result.values[mem.node_id]
        return result

    def full_rescore(self, state: SentenceState) -> CandidateQueue:
        """Score every boundary from scratch (reference for the cached queue)."""
        queue = CandidateQueue()
        self.refresh(state, queue, range(len(state.atoms)))
        return queue
