"""A hand-written policy that parses nested braces recursively.

The parser is driven by fixed logits instead of trained networks. The rule
turns "{x}" into "{~G~}": it replaces the letter with the subgrammar token
and then closes the brace. Sibling blocks collapse with an anchored merge,
and an outer brace around a finished block repeats the same two steps. The
same "{~G~}" type therefore shows up at several depths of one tree.

    python3 demos/oracle_recursion.py
"""

from rlgrammar.agent import Parser, RuleScorer
from rlgrammar.core import TypeTable
from rlgrammar.evaluate import recursion_pairs
from rlgrammar.frequency import FrequencyTable
from rlgrammar.render import KIND_NAMES, render_ascii
from rlgrammar.reward import RewardConfig

LETTERS = ("a", "b", "c")


def rule(window, context=0):
    left, right = (str(t) if t is not None else None for t in window[context:context + 2])
    logits = [-10.0] * 6
    if (left, right) == ("{~G~}", "{~G~}"):
        logits[1] = 4.0          # AnchorLeft: keep one copy of the block
    elif (left, right) == ("{~G~", "}"):
        logits[0] = 3.0          # Merge: close the block
    elif left == "{" and right in LETTERS:
        logits[3] = 2.0          # SubgramLeft: the letter becomes ~G~
    elif left == "{" and right == "{~G~}":
        logits[3] = 1.0          # SubgramLeft: an inner block becomes ~G~
    return logits


parser = Parser(TypeTable(), RuleScorer(rule), FrequencyTable(), RewardConfig())
for sentence in ["{a}", "{{a}}", "{{a}{b}}", "{{{c}}{a}}"]:
    res = parser.parse(sentence)
    print(render_ascii(sentence, res.tree), end="")
    steps = [f"{KIND_NAMES[res.tree.nodes[a].kind]}->{res.tree.nodes[a].type}"
             for a in res.tree.actions]
    print("  actions:", ", ".join(steps))
    nested = sorted({str(res.tree.nodes[o].type) for o, _ in recursion_pairs(res.tree)})
    print("  root:", res.state.type_strings(), " nested types:", nested or "none", "\n")
print("legend: '=' merged, '~' replaced by ~G~, '.' dropped by an anchored merge")
