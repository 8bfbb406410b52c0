"""Parse renderings: ASCII bars, SVG diagrams and a JSON action trace.

Bars are stacked by node height (leaves are height 0, so the first bar row
holds actions over raw characters). Nodes of equal height are never nested,
so the bars in one row never overlap.

Bar styles:

* merge: solid blue (``=`` in ASCII)
* subgrammar merge: blue, with the replaced constituent's half red (``~``)
* anchored merge: blue, with the omitted constituent's half gray (``.``)
* integer parse: fuchsia (``#``)
"""

from __future__ import annotations

import json

from .core import ActionKind, Node, ParseTree, SentenceState, TypeTable, apply_action

BLUE = "#1f5fbf"
RED = "#d62728"
GRAY = "#a0a0a0"
FUCHSIA = "#ff00ff"

KIND_NAMES = {
    ActionKind.MERGE: "Merge",
    ActionKind.ANCHOR_LEFT: "AnchorLeft",
    ActionKind.ANCHOR_RIGHT: "AnchorRight",
    ActionKind.SUBGRAM_LEFT: "SubgramLeft",
    ActionKind.SUBGRAM_RIGHT: "SubgramRight",
    ActionKind.PARSE_INTEGER: "ParseInteger",
}
KIND_BY_NAME = {v: k for k, v in KIND_NAMES.items()}


def display_char(ch: str) -> str:
    """One printable ASCII character standing in for ``ch``."""
    if ch == "\n":
        return "$"
    if " " <= ch <= "~":
        return ch
    return "?"


def bar_segments(tree: ParseTree, node: Node) -> list[tuple[int, int, str]]:
    """``(start, end, role)`` pieces of a node's bar; role is a style name."""
    if node.kind == ActionKind.PARSE_INTEGER:
        return [(node.start, node.end, "integer")]
    left, right = (tree.nodes[c] for c in node.children)
    if node.kind == ActionKind.MERGE:
        return [(node.start, node.end, "merge")]
    if node.kind.is_subgram:
        replaced_left = node.kind == ActionKind.SUBGRAM_RIGHT
        return [(left.start, left.end, "replaced" if replaced_left else "merge"),
                (right.start, right.end, "merge" if replaced_left else "replaced")]
    omitted_left = node.kind == ActionKind.ANCHOR_RIGHT
    return [(left.start, left.end, "omitted" if omitted_left else "merge"),
            (right.start, right.end, "merge" if omitted_left else "omitted")]


def bar_rows(tree: ParseTree) -> list[list[Node]]:
    """Action nodes grouped by height, lowest first."""
    heights = tree.heights()
    top = max((heights[a] for a in tree.actions), default=0)
    rows: list[list[Node]] = [[] for _ in range(top)]
    for a in tree.actions:
        rows[heights[a] - 1].append(tree.nodes[a])
    return rows


_ASCII = {"merge": "=", "replaced": "~", "omitted": ".", "integer": "#"}


def render_ascii(text: str, tree: ParseTree) -> str:
    lines = ["".join(display_char(c) for c in text)]
    for row in bar_rows(tree):
        buf = [" "] * len(text)
        for node in row:
            for s, e, role in bar_segments(tree, node):
                buf[s:e] = _ASCII[role] * (e - s)
        lines.append("".join(buf).rstrip())
    return "\n".join(lines) + "\n"


_SVG_COLORS = {"merge": BLUE, "replaced": RED, "omitted": GRAY, "integer": FUCHSIA}


def _xml(text: str) -> str:
    text = "".join(display_char(c) if c < " " or c == "\x7f" else c for c in text)
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


def render_svg(text: str, tree: ParseTree, cell: int = 12, bar: int = 6, gap: int = 3) -> str:
    rows = bar_rows(tree)
    width = max(1, len(text)) * cell + 2 * cell
    height = 2 * cell + len(rows) * (bar + gap) + cell
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="{cell}">']
    for i, ch in enumerate(text):
        x = cell + i * cell + cell / 2
        out.append(f'<text x="{x:g}" y="{cell * 1.5:g}" text-anchor="middle">{_xml(ch)}</text>')
    for level, row in enumerate(rows):
        y = 2 * cell + level * (bar + gap)
        for node in row:
            label = f"{KIND_NAMES[node.kind]} -> {node.type} (reward {node.reward:.4g})"
            out.append(f"<g><title>{_xml(label)}</title>")
            for s, e, role in bar_segments(tree, node):
                out.append(f'<rect x="{cell + s * cell + 1}" y="{y}" width="{(e - s) * cell - 2}" '
                           f'height="{bar}" fill="{_SVG_COLORS[role]}" class="{role}"/>')
            out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def action_trace(text: str, tree: ParseTree, values: dict[int, float] | None = None) -> dict:
    """Actions in application order, enough to replay the parse exactly."""
    actions = []
    for a in tree.actions:
        n = tree.nodes[a]
        entry = {"kind": KIND_NAMES[n.kind], "position": n.position, "span": [n.start, n.end],
                 "result": str(n.type), "tokens": list(n.type.tokens), "reward": n.reward}
        if values is not None and a in values:
            entry["value"] = values[a]
        actions.append(entry)
    return {"sentence": text, "actions": actions,
            "roots": [str(tree.nodes[r].type) for r in tree.roots()]}


def trace_json(text: str, tree: ParseTree, values=None) -> str:
    return json.dumps(action_trace(text, tree, values), ensure_ascii=True)


def replay_trace(trace: dict, table: TypeTable | None = None) -> SentenceState:
    """Re-apply a trace through the core action semantics.

    Raises ``ValueError`` if any recorded span or result type disagrees with
    what the replay produces.
    """
    state = SentenceState(trace["sentence"], table or TypeTable())
    for i, step in enumerate(trace["actions"]):
        node = apply_action(state, step["position"], KIND_BY_NAME[step["kind"]],
                            reward=step.get("reward", 0.0))
        if [node.start, node.end] != list(step["span"]):
            raise ValueError(f"action {i}: span {[node.start, node.end]} != {step['span']}")
        if list(node.type.tokens) != list(step["tokens"]):
            raise ValueError(f"action {i}: result {str(node.type)!r} != {step['result']!r}")
    return state


def trees_equal(a: ParseTree, b: ParseTree) -> bool:
    if len(a.nodes) != len(b.nodes) or a.actions != b.actions:
        return False
    return all(x.type.tokens == y.type.tokens and x.kind == y.kind and x.children == y.children
               and (x.start, x.end) == (y.start, y.end) for x, y in zip(a.nodes, b.nodes))
