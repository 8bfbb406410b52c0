"""Compositional atom embeddings.

An atom's embedding depends only on its token sequence, never on the order in
which the parser happened to merge its pieces. This script shows that
property, then shows that swapping two pieces does change the embedding.

    python3 demos/embeddings.py
"""

import numpy as np

from rlgrammar.core import TypeTable
from rlgrammar.embedding import Embedder, compose

emb = Embedder(seed=0, n_emb=64)
table = TypeTable()


def piece(text):
    return emb.type_embedding(table.intern_text(text))


# "{a}" built two different ways
left_first = compose(compose(piece("{"), piece("a"), emb.rotation), piece("}"), emb.rotation)
right_first = compose(piece("{"), compose(piece("a"), piece("}"), emb.rotation), emb.rotation)
closed = emb.raw(table.intern_text("{a}"))
print("({a)} vs {(a}):", np.abs(left_first.raw - right_first.raw).max())
print("either vs closed form:", np.abs(left_first.raw - closed).max())

# order matters: "ab" and "ba" land far apart
ab = emb.raw(table.intern_text("ab"))
ba = emb.raw(table.intern_text("ba"))
print("|e(ab) - e(ba)| =", np.linalg.norm(ab - ba))

# normalized embeddings keep roughly unit length at every symbolic length
for text in ["a", "{a}", "{{a}{b}}", "{{{a}}{b}{c}}"]:
    v = emb.embedding_of(table.intern_text(text))
    print(f"{text!r:>18}: norm {np.linalg.norm(v):.3f}")
