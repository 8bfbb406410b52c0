"""Atoms, atom types, parsing actions, sentence state and parse trees.

A sentence starts as one atom per character. Every parsing action replaces
adjacent atoms with a single new atom whose *type* is an interned token
sequence. Token ids are global: the two reserved tokens come first and every
character ``c`` maps to ``ord(c) + 2``, so ids never depend on corpus order.
"""

from __future__ import annotations

import bisect
import enum
import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

SUBGRAMMAR = 0
INTEGER = 1
_CHAR_OFFSET = 2

RESERVED_NAMES = {SUBGRAMMAR: "~G~", INTEGER: "~INT~"}

DIGIT_TOKENS = frozenset(ord(c) + _CHAR_OFFSET for c in "0123456789")


def char_token(ch: str) -> int:
    return ord(ch) + _CHAR_OFFSET


def token_text(token: int) -> str:
    if token in RESERVED_NAMES:
        return RESERVED_NAMES[token]
    return chr(token - _CHAR_OFFSET)


def tokenize(text: str) -> tuple[int, ...]:
    return tuple(ord(c) + _CHAR_OFFSET for c in text)


class ActionKind(enum.IntEnum):
    MERGE = 0
    ANCHOR_LEFT = 1
    ANCHOR_RIGHT = 2
    SUBGRAM_LEFT = 3
    SUBGRAM_RIGHT = 4
    PARSE_INTEGER = 5

    @property
    def is_anchor(self) -> bool:
        return self in (ActionKind.ANCHOR_LEFT, ActionKind.ANCHOR_RIGHT)

    @property
    def is_subgram(self) -> bool:
        return self in (ActionKind.SUBGRAM_LEFT, ActionKind.SUBGRAM_RIGHT)


N_ACTIONS = len(ActionKind)
MERGE_KINDS = tuple(k for k in ActionKind if k != ActionKind.PARSE_INTEGER)


@dataclass(eq=False)
class AtomType:
    """Interned token sequence. Identity is equality; compare with ``is``."""

    type_id: int
    tokens: tuple[int, ...]

    @property
    def symbolic_length(self) -> int:
        return len(self.tokens)

    @property
    def is_digits(self) -> bool:
        return all(t in DIGIT_TOKENS for t in self.tokens)

    @property
    def has_subgrammar(self) -> bool:
        return SUBGRAMMAR in self.tokens

    def __str__(self) -> str:
        return "".join(token_text(t) for t in self.tokens)

    def __repr__(self) -> str:
        return f"AtomType({self.type_id}, {str(self)!r})"


class TypeTable:
    """Interning registry for atom types; safe to share between threads."""

    def __init__(self) -> None:
        self._by_tokens: dict[tuple[int, ...], AtomType] = {}
        self._types: list[AtomType] = []
        self._lock = threading.Lock()
        self.subgrammar = self.intern((SUBGRAMMAR,))
        self.integer = self.intern((INTEGER,))

    def __len__(self) -> int:
        return len(self._types)

    def __getitem__(self, type_id: int) -> AtomType:
        return self._types[type_id]

    def __iter__(self):
        return iter(list(self._types))

    def get(self, tokens: Sequence[int]) -> AtomType | None:
        return self._by_tokens.get(tuple(tokens))

    def intern(self, tokens: Iterable[int]) -> AtomType:
        tokens = tuple(tokens)
        if not tokens:
            raise ValueError("cannot intern an empty token sequence")
        found = self._by_tokens.get(tokens)
        if found is not None:
            return found
        with self._lock:
            found = self._by_tokens.get(tokens)
            if found is None:
                found = AtomType(len(self._types), tokens)
                self._types.append(found)
                self._by_tokens[tokens] = found
            return found

    def intern_text(self, text: str) -> AtomType:
        return self.intern(tokenize(text))

    def result_type(self, kind: ActionKind, left: AtomType, right: AtomType) -> AtomType:
        """Type produced by a two-atom action."""
        kind = ActionKind(kind)
        if kind == ActionKind.MERGE:
            return self.intern(left.tokens + right.tokens)
        if kind == ActionKind.ANCHOR_LEFT:
            return left
        if kind == ActionKind.ANCHOR_RIGHT:
            return right
        if kind == ActionKind.SUBGRAM_LEFT:
            return self.intern(left.tokens + (SUBGRAMMAR,))
        if kind == ActionKind.SUBGRAM_RIGHT:
            return self.intern((SUBGRAMMAR,) + right.tokens)
        raise ValueError("ParseInteger has no two-atom result type")


@dataclass
class CStats:
    """Per-atom count statistics carried between frequency estimates."""

    c_outer: float = 1.0
    c_left: float = 1.0
    c_right: float = 1.0
    c_inner: float = 1.0

    def scaled(self, factor: float) -> "CStats":
        return CStats(self.c_outer * factor, self.c_left * factor,
                      self.c_right * factor, self.c_inner * factor)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.c_outer, self.c_left, self.c_right, self.c_inner)


@dataclass
class Node:
    node_id: int
    type: AtomType
    start: int
    end: int
    kind: ActionKind | None = None
    children: list[int] = field(default_factory=list)
    parent: int | None = None
    reward: float = 0.0
    # index of the left-most consumed atom at the time the action was applied
    position: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.kind is None


class ParseTree:
    """Forest of leaves (initial atoms) and action nodes."""

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self.actions: list[int] = []

    def add_leaf(self, atype: AtomType, start: int, end: int) -> Node:
        node = Node(len(self.nodes), atype, start, end)
        self.nodes.append(node)
        return node

    def add_action(self, kind: ActionKind, atype: AtomType, children: Sequence[int],
                   reward: float = 0.0, position: int | None = None) -> Node:
        kids = list(children)
        node = Node(len(self.nodes), atype, self.nodes[kids[0]].start,
                    self.nodes[kids[-1]].end, ActionKind(kind), kids,
                    reward=reward, position=position)
        self.nodes.append(node)
        for c in kids:
            self.nodes[c].parent = node.node_id
        self.actions.append(node.node_id)
        return node

    def roots(self) -> list[int]:
        """Parentless nodes in sentence order."""
        return sorted((n.node_id for n in self.nodes if n.parent is None),
                      key=lambda i: self.nodes[i].start)

    def depths(self) -> dict[int, int]:
        """Edge distance from each node to its root."""
        out: dict[int, int] = {}
        for n in reversed(self.nodes):  # parents are created after children
            out[n.node_id] = 0 if n.parent is None else out[n.parent] + 1
        return out

    def heights(self) -> dict[int, int]:
        memo: dict[int, int] = {}
        for n in self.nodes:
            memo[n.node_id] = 0 if n.is_leaf else 1 + max(memo[c] for c in n.children)
        return memo


@dataclass
class Atom:
    type: AtomType
    start: int
    end: int
    stats: CStats
    node: int


class SentenceState:
    """Mutable atom sequence of one sentence plus its parse forest."""

    def __init__(self, text: str, table: TypeTable) -> None:
        self.text = text
        self.table = table
        self.tree = ParseTree()
        self.atoms: list[Atom] = []
        for i, ch in enumerate(text):
            atype = table.intern((char_token(ch),))
            leaf = self.tree.add_leaf(atype, i, i + 1)
            self.atoms.append(Atom(atype, i, i + 1, CStats(), leaf.node_id))

    @property
    def char_length(self) -> int:
        return len(self.text)

    def __len__(self) -> int:
        return len(self.atoms)

    def index_at(self, offset: int) -> int:
        """Index of the atom starting exactly at character ``offset``."""
        i = bisect.bisect_left(self.atoms, offset, key=lambda a: a.start)
        if i == len(self.atoms) or self.atoms[i].start != offset:
            raise KeyError(offset)
        return i

    def is_digit_atom(self, i: int) -> bool:
        return 0 <= i < len(self.atoms) and self.atoms[i].type.is_digits

    def digit_run(self, i: int) -> tuple[int, int]:
        """Inclusive bounds of the maximal digit-only run containing atom ``i``."""
        if not self.is_digit_atom(i):
            raise ValueError(f"atom {i} is not digit-only")
        lo = i
        while self.is_digit_atom(lo - 1):
            lo -= 1
        hi = i
        while self.is_digit_atom(hi + 1):
            hi += 1
        return lo, hi

    def is_run_start(self, i: int) -> bool:
        return self.is_digit_atom(i) and not self.is_digit_atom(i - 1)

    def type_strings(self) -> list[str]:
        return [str(a.type) for a in self.atoms]

    def affected(self, position: int, kind: ActionKind) -> tuple[int, int]:
        """Inclusive atom index range consumed by an action."""
        if kind == ActionKind.PARSE_INTEGER:
            return self.digit_run(position)
        return position, position + 1

    def result_of(self, position: int, kind: ActionKind) -> AtomType:
        if kind == ActionKind.PARSE_INTEGER:
            return self.table.integer
        return self.table.result_type(kind, self.atoms[position].type,
                                      self.atoms[position + 1].type)


def apply_action(state: SentenceState, position: int, kind: ActionKind,
                 stats: CStats | None = None, reward: float = 0.0) -> Node:
    """Apply one action in place and return the new tree node.

    For the two-atom kinds ``position`` is the boundary index, i.e. atoms
    ``position`` and ``position + 1`` are combined. For ``PARSE_INTEGER`` it
    is any atom inside a digit-only run; the whole maximal run is replaced.
    """
    kind = ActionKind(kind)
    n = len(state.atoms)
    if kind == ActionKind.PARSE_INTEGER:
        if not 0 <= position < n:
            raise ValueError(f"position {position} out of range for {n} atoms")
        if not state.is_digit_atom(position):
            raise ValueError(f"ParseInteger on non-digit atom {position}")
        lo, hi = state.digit_run(position)
    else:
        if not 0 <= position < n - 1:
            raise ValueError(f"boundary {position} out of range for {n} atoms")
        lo, hi = position, position + 1
    consumed = state.atoms[lo:hi + 1]
    result = state.result_of(lo, kind)
    node = state.tree.add_action(kind, result, [a.node for a in consumed],
                                 reward=reward, position=lo)
    merged = Atom(result, consumed[0].start, consumed[-1].end,
                  stats if stats is not None else CStats(), node.node_id)
    state.atoms[lo:hi + 1] = [merged]
    return node
