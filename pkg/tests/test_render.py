import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from oracles import figure_rule
from rlgrammar.agent import Parser, RuleScorer
from rlgrammar.core import MERGE_KINDS, ActionKind, SentenceState, TypeTable, apply_action
from rlgrammar.evaluate import evaluate, has_recursion, recursion_pairs
from rlgrammar.frequency import FrequencyTable
from rlgrammar.render import (BLUE, GRAY, RED, action_trace, bar_rows, render_ascii, render_svg,
                              replay_trace, trace_json, trees_equal)
from rlgrammar.reward import RewardConfig

SVG = "{http://www.w3.org/2000/svg}"


def oracle_parser():
    return Parser(TypeTable(), RuleScorer(figure_rule), FrequencyTable(), RewardConfig())


def random_tree(text, seed):
    rng = np.random.default_rng(seed)
    st = SentenceState(text, TypeTable())
    while True:
        n = len(st.atoms)
        options = [(p, k) for p in range(n - 1) for k in MERGE_KINDS]
        options += [(p, ActionKind.PARSE_INTEGER) for p in range(n) if st.is_run_start(p)]
        if not options or rng.random() < 0.05:
            return st
        p, k = options[rng.integers(len(options))]
        apply_action(st, p, k)


def test_oracle_svg_has_red_half_and_solid_bar():
    res = oracle_parser().parse("{a}")
    svg = render_svg("{a}", res.tree)
    root = ET.fromstring(svg)
    rects = root.findall(f".//{SVG}rect")
    fills = [r.get("fill") for r in rects]
    assert fills.count(RED) == 1 and fills.count(BLUE) == 2
    titles = [t.text for t in root.iter(f"{SVG}title")]
    assert titles[0].startswith("SubgramLeft") and titles[1].startswith("Merge")


def test_ascii_oracle():
    res = oracle_parser().parse("{a}")
    assert render_ascii("{a}", res.tree) == "{a}\n=~\n===\n"


def test_anchor_bar_is_gray():
    st = SentenceState("ab", TypeTable())
    apply_action(st, 0, ActionKind.ANCHOR_RIGHT)
    svg = render_svg("ab", st.tree)
    fills = [r.get("fill") for r in ET.fromstring(svg).iter(f"{SVG}rect")]
    assert fills == [GRAY, BLUE]
    assert render_ascii("ab", st.tree) == "ab\n.=\n"


def test_single_character_is_leaf_only():
    st = SentenceState("x", TypeTable())
    assert render_ascii("x", st.tree) == "x\n"
    assert ET.fromstring(render_svg("x", st.tree)).find(f".//{SVG}rect") is None
    assert action_trace("x", st.tree) == {"sentence": "x", "actions": [], "roots": ["x"]}


@pytest.mark.parametrize("seed", range(30))
def test_random_trees_render_and_replay(seed):
    rng = np.random.default_rng(seed + 100)
    text = "".join(rng.choice(list("{}ab12<>&\n\x01 "), size=int(rng.integers(1, 30))))
    st = random_tree(text, seed)
    tree = st.tree
    ET.fromstring(render_svg(text, tree))
    lines = render_ascii(text, tree).split("\n")[:-1]
    assert len(lines[0]) == len(text)
    assert len(lines) == 1 + len(bar_rows(tree))
    for row in bar_rows(tree):
        covered = np.zeros(len(text), int)
        for node in row:
            covered[node.start:node.end] += 1
        assert covered.max(initial=0) <= 1
    for line, row in zip(lines[1:], bar_rows(tree)):
        assert len(line) <= len(text)
        assert sum(c != " " for c in line) == sum(n.end - n.start for n in row)
    trace = json.loads(trace_json(text, tree))
    replayed = replay_trace(trace)
    assert trees_equal(replayed.tree, tree)
    assert [str(a.type) for a in replayed.atoms] == trace["roots"]


def test_replay_detects_tampering():
    res = oracle_parser().parse("{a}")
    trace = action_trace("{a}", res.tree)
    trace["actions"][0]["span"] = [0, 3]
    with pytest.raises(ValueError, match="span"):
        replay_trace(trace)
    trace = action_trace("{a}", res.tree)
    trace["actions"][1]["tokens"] = [1]
    with pytest.raises(ValueError, match="result"):
        replay_trace(trace)


def test_oracle_recursion_evidence():
    p = oracle_parser()
    for s in ("{{a}}", "{{a}{b}}", "{{{a}}}"):
        res = p.parse(s)
        assert has_recursion(res.tree), s
        assert res.state.type_strings() == ["{~G~}"]
        assert "{~G~}" in {str(res.tree.nodes[o].type) for o, _ in recursion_pairs(res.tree)}
    assert not has_recursion(p.parse("{a}").tree)


def test_anchor_chain_is_not_recursion():
    st = SentenceState("aaaa", TypeTable())
    apply_action(st, 0, ActionKind.MERGE)          # aa
    apply_action(st, 0, ActionKind.ANCHOR_LEFT)    # (aa)a keeps aa
    apply_action(st, 0, ActionKind.ANCHOR_LEFT)    # keeps aa again
    assert st.atoms[0].type is st.tree.nodes[st.tree.actions[0]].type
    assert not has_recursion(st.tree)


def test_eval_report_fields():
    p = oracle_parser()
    sentences = ["{{a}}", "{a}", "{{a}{b}}", "x"]
    report = evaluate(p, sentences, top_k=3)
    assert [s.sentence for s in report.sentences] == sentences
    assert [s.recursion for s in report.sentences] == [True, False, True, False]
    assert report.recursion_rate == 0.5
    d = report.to_dict()
    assert set(d) == {"recursion_rate", "mean_roots", "sentences", "top_types"}
    for row in d["sentences"]:
        assert set(row) == {"sentence", "roots", "actions", "recursion", "recursive_types",
                            "mean_value"}
    assert d["sentences"][3]["roots"] == 1 and d["sentences"][3]["actions"] == 0
    assert "recursion evidence: 50.0% of 4" in report.text()


def test_untrained_parser_shows_little_recursion():
    from rlgrammar.config import preset
    from rlgrammar.data import gen_simple_json
    from rlgrammar.trainer import Trainer
    corpus = gen_simple_json(128, seed=0)
    for seed in range(3):
        report = evaluate(Trainer(preset("simple-json", seed=seed), corpus.train).parser(),
                          corpus.sentences)
        assert report.recursion_rate <= 0.2
