"""Evaluation report for a trained (or hand-built) parser."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .agent import Parser
from .core import ParseTree


def recursion_pairs(tree: ParseTree) -> list[tuple[int, int]]:
    """Nested realizations of the same composite atom type.

    Returns ``(outer, inner)`` action-node pairs where both nodes share an
    atom type of symbolic length >= 2, ``inner`` is a proper descendant of
    ``outer`` (so the two sit at different depths) and some node of a
    different type lies strictly between them. The last condition rules out
    plain anchor chains, which repeat a type without nesting it.
    """
    nodes = tree.nodes
    pairs = []
    for nid in tree.actions:
        node = nodes[nid]
        if node.type.symbolic_length < 2:
            continue
        seen_other = False
        p = node.parent
        while p is not None:
            anc = nodes[p]
            if anc.type is node.type:
                if seen_other:
                    pairs.append((p, nid))
                    break
            else:
                seen_other = True
            p = anc.parent
    return pairs


def has_recursion(tree: ParseTree) -> bool:
    return bool(recursion_pairs(tree))


@dataclass
class SentenceReport:
    sentence: str
    roots: int
    actions: int
    recursion: bool
    recursive_types: list[str]
    mean_value: float


@dataclass
class EvalReport:
    sentences: list[SentenceReport] = field(default_factory=list)
    top_types: list[tuple[str, float]] = field(default_factory=list)

    @property
    def recursion_rate(self) -> float:
        if not self.sentences:
            return 0.0
        return sum(s.recursion for s in self.sentences) / len(self.sentences)

    @property
    def mean_roots(self) -> float:
        return float(np.mean([s.roots for s in self.sentences])) if self.sentences else 0.0

    def to_dict(self) -> dict:
        return {"recursion_rate": self.recursion_rate, "mean_roots": self.mean_roots,
                "sentences": [asdict(s) for s in self.sentences],
                "top_types": [list(t) for t in self.top_types]}

    def text(self) -> str:
        lines = [f"{'roots':>5} {'rec':>3} {'value':>9}  sentence"]
        for s in self.sentences:
            shown = s.sentence if len(s.sentence) <= 60 else s.sentence[:57] + "..."
            lines.append(f"{s.roots:5d} {'yes' if s.recursion else 'no':>3} "
                         f"{s.mean_value:9.4f}  {shown!r}")
        lines.append(f"recursion evidence: {self.recursion_rate:.1%} of {len(self.sentences)}")
        lines.append(f"mean roots: {self.mean_roots:.3f}")
        lines.append("top atom types by effective frequency:")
        for name, f in self.top_types:
            lines.append(f"  {f:12.4f}  {name}")
        return "\n".join(lines)


def evaluate(parser: Parser, sentences: Sequence[str], top_k: int = 10) -> EvalReport:
    """Greedy-parse each sentence and summarise the resulting trees."""
    report = EvalReport()
    for s in sentences:
        res = parser.parse(s, "greedy")
        tree = res.tree
        pairs = recursion_pairs(tree)
        values = list(res.values.values())
        report.sentences.append(SentenceReport(
            sentence=s,
            roots=len(tree.roots()),
            actions=len(tree.actions),
            recursion=bool(pairs),
            recursive_types=sorted({str(tree.nodes[o].type) for o, _ in pairs}),
            mean_value=float(np.mean(values)) if values else 0.0,
        ))
    freq = parser.freq
    ranked = sorted(((freq.effective_frequency(tid), tid) for tid in freq.entries),
                    key=lambda t: (-t[0], t[1]))
    report.top_types = [(str(parser.table[tid]), f) for f, tid in ranked[:top_k]]
    return report
