import itertools
import math

import numpy as np
import pytest

from oracles import bracketings, rotation_2d
from rlgrammar.core import SUBGRAMMAR, ActionKind, TypeTable, char_token
from rlgrammar.embedding import (Embedder, RotationOperator, TypeEmbedding, base_embedding,
                                 compose, generate_rotation)


def test_rotation_orthogonal_special():
    rot = generate_rotation(3, 16)
    phi = rot.matrix()
    assert np.allclose(phi.T @ phi, np.eye(16), atol=1e-10)
    assert abs(np.linalg.det(phi) - 1.0) < 1e-10


def test_rotation_odd_dimension_still_special():
    phi = generate_rotation(1, 7).matrix()
    assert np.allclose(phi.T @ phi, np.eye(7), atol=1e-10)
    assert abs(np.linalg.det(phi) - 1.0) < 1e-10


def test_rotation_deterministic():
    a, b = generate_rotation(5, 8), generate_rotation(5, 8)
    assert np.array_equal(a.basis, b.basis)
    assert np.array_equal(a.block_angles, b.block_angles)
    assert not np.array_equal(a.basis, generate_rotation(6, 8).basis)


def test_rotation_powers_add():
    rot = generate_rotation(0, 10, theta=0.7)
    for p, q in [(0.5, 1.25), (2, 3), (0.0, 4.5)]:
        assert np.allclose(rot.matrix(p) @ rot.matrix(q), rot.matrix(p + q), atol=1e-9)


def test_power_zero_identity_and_norm():
    rot = generate_rotation(2, 12)
    v = np.random.default_rng(0).standard_normal(12)
    assert np.allclose(rot.power_apply(v, 0), v, atol=1e-15)
    assert abs(np.linalg.norm(rot.power_apply(v, 3)) - np.linalg.norm(v)) < 1e-10
    assert np.allclose(rot.power_apply(v, 3), rot.matrix(3) @ v, atol=1e-12)


def test_rotation_argument_errors():
    with pytest.raises(ValueError):
        generate_rotation(0, 0)
    with pytest.raises(ValueError):
        generate_rotation(0, 4, theta=0.0)
    with pytest.raises(ValueError):
        generate_rotation(0, 4, theta=1.5)


def test_base_embedding_unit_and_distinct():
    vecs = {c: base_embedding(char_token(c), 0, 64).raw for c in "abc{}"}
    for v in vecs.values():
        assert abs(np.linalg.norm(v) - 1.0) < 1e-12
    for x, y in itertools.combinations(vecs.values(), 2):
        assert np.linalg.norm(x - y) > 1e-3
    g1 = base_embedding(SUBGRAMMAR, 9, 32).raw
    assert np.array_equal(g1, base_embedding(SUBGRAMMAR, 9, 32).raw)
    assert base_embedding(SUBGRAMMAR, 9, 32).symbolic_length == 1


def test_compose_quarter_turn_oracle():
    rot = RotationOperator(2, np.array([math.pi / 2]), np.eye(2))
    assert np.allclose(rot.matrix(1), rotation_2d(math.pi / 2), atol=1e-15)
    out = compose(TypeEmbedding(np.array([1.0, 0.0]), 1), TypeEmbedding(np.array([0.0, 1.0]), 1), rot)
    assert np.allclose(out.raw, [0.0, 2.0], atol=1e-12)
    assert np.allclose(out.normalized, [0.0, 2 / math.sqrt(2)], atol=1e-12)
    assert out.symbolic_length == 2


def test_compose_uses_right_length_as_power():
    rot = generate_rotation(4, 6)
    rng = np.random.default_rng(1)
    left = TypeEmbedding(rng.standard_normal(6), 2)
    right = TypeEmbedding(rng.standard_normal(6), 3)
    out = compose(left, right, rot)
    assert np.allclose(out.raw, rot.matrix(3) @ left.raw + right.raw, atol=1e-12)


def test_compose_dimension_mismatch():
    rot = generate_rotation(0, 4)
    with pytest.raises(ValueError):
        compose(TypeEmbedding(np.ones(4), 1), TypeEmbedding(np.ones(3), 1), rot)


def test_compose_associative_and_order_sensitive():
    rot = generate_rotation(0, 16)
    rng = np.random.default_rng(2)
    dists = []
    for _ in range(100):
        a, b, c = (TypeEmbedding(rng.standard_normal(16), int(rng.integers(1, 4))) for _ in range(3))
        lhs = compose(compose(a, b, rot), c, rot).raw
        rhs = compose(a, compose(b, c, rot), rot).raw
        assert np.allclose(lhs, rhs, atol=1e-9)
        dists.append(np.linalg.norm(compose(a, b, rot).raw - compose(b, a, rot).raw))
    assert min(dists) > 1e-6


def _fold(tree, leaf, rot):
    if isinstance(tree, tuple):
        return compose(_fold(tree[0], leaf, rot), _fold(tree[1], leaf, rot), rot)
    return leaf(tree)


def test_embedding_of_path_independent():
    emb = Embedder(0, 16)
    table = TypeTable()
    leaf = lambda c: TypeEmbedding(base_embedding(char_token(c), 0, 16).raw, 1)
    for s in ["ab", "abc", "{a}b", "{{a}}c"]:
        closed = emb.raw(table.intern_text(s))
        for br in bracketings(list(s)):
            assert np.allclose(_fold(br, leaf, emb.rotation).raw, closed, atol=1e-9)


def test_embedding_of_single_and_subgrammar():
    emb = Embedder(3, 32)
    table = TypeTable()
    brace = base_embedding(char_token("{"), 3, 32)
    assert np.allclose(emb.embedding_of(table.intern_text("{")), brace.raw)
    g = table.result_type(ActionKind.SUBGRAM_LEFT, table.intern_text("{"), table.intern_text("a"))
    expected = compose(brace, base_embedding(SUBGRAMMAR, 3, 32), emb.rotation)
    assert np.allclose(emb.embedding_of(g), expected.normalized, atol=1e-12)
    # anchored results reuse the kept type's cached vector by identity
    kept = table.result_type(ActionKind.ANCHOR_LEFT, g, table.intern_text("}"))
    assert emb.embedding_of(kept) is emb.embedding_of(g)


def test_norm_discipline():
    emb = Embedder(0, 64)
    table = TypeTable()
    rng = np.random.default_rng(5)
    for _ in range(200):
        L = int(rng.integers(1, 65))
        t = table.intern(rng.integers(0, 30, size=L))
        n = np.linalg.norm(emb.embedding_of(t))
        assert 0.05 <= n <= 20


def test_window_zero_padding():
    emb = Embedder(0, 8)
    table = TypeTable()
    w = emb.window((None, table.intern_text("a"), table.intern_text("b"), None))
    assert w.shape == (32,) and w.dtype == np.float32
    assert not w[:8].any() and not w[24:].any()
    assert np.allclose(w[8:16], emb.embedding_of(table.intern_text("a")), atol=1e-7)
