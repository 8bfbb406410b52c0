"""Deterministic compositional embeddings for atom types.

Combining a left and a right atom rotates the left embedding by the rotation
operator raised to the right atom's symbolic length and adds the right one.
Raw (unnormalized) vectors are what compose; the exposed embedding divides by
the square root of the symbolic length. Because the rotation is stored as
angles in a fixed orthonormal basis, real powers are exact angle scalings and
the embedding of a token sequence has the closed form

    raw(t_0 .. t_{L-1}) = sum_i rot^(L-1-i) base(t_i)

which does not depend on how the sequence was assembled.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .core import AtomType


@dataclass(frozen=True)
class RotationOperator:
    """Special orthogonal operator ``Q blockdiag(R(theta * a_k)) Q^T``."""

    dimension: int
    block_angles: np.ndarray
    basis: np.ndarray
    exponent_scale: float = 1.0

    def _rotate(self, coords: np.ndarray, power) -> np.ndarray:
        # coords: (..., dimension) expressed in the eigenbasis
        power = np.asarray(power, dtype=np.float64)
        ang = (power[..., None] * self.exponent_scale) * self.block_angles
        c, s = np.cos(ang), np.sin(ang)
        out = coords.copy()
        k = len(self.block_angles)
        x = coords[..., 0:2 * k:2]
        y = coords[..., 1:2 * k:2]
        out[..., 0:2 * k:2] = c * x - s * y
        out[..., 1:2 * k:2] = s * x + c * y
        return out

    def power_apply(self, v: np.ndarray, power: float = 1.0) -> np.ndarray:
        """Return ``Phi**power @ v`` for a vector ``v``."""
        v = np.asarray(v, dtype=np.float64)
        return self.basis @ self._rotate(self.basis.T @ v, power)

    def matrix(self, power: float = 1.0) -> np.ndarray:
        eye = np.eye(self.dimension)
        # rows of the rotated identity in eigen coordinates give B(p)^T
        b = self._rotate(eye, np.full(self.dimension, power)).T
        return self.basis @ b @ self.basis.T


def generate_rotation(seed: int, n_emb: int, theta: float = 1.0) -> RotationOperator:
    if n_emb < 1:
        raise ValueError("n_emb must be >= 1")
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    q, r = np.linalg.qr(rng.standard_normal((n_emb, n_emb)))
    q = q * np.sign(np.diag(r))
    angles = rng.uniform(0.0, np.pi, size=n_emb // 2)
    return RotationOperator(n_emb, angles, q, float(theta))


@dataclass
class TypeEmbedding:
    raw: np.ndarray
    symbolic_length: int

    @property
    def normalized(self) -> np.ndarray:
        return self.raw / np.sqrt(self.symbolic_length)


def base_embedding(token: int, seed: int, n_emb: int) -> TypeEmbedding:
    """Unit-norm random vector for a single vocabulary token."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2, token]))
    v = rng.standard_normal(n_emb)
    return TypeEmbedding(v / np.linalg.norm(v), 1)


def compose(left: TypeEmbedding, right: TypeEmbedding, rot: RotationOperator) -> TypeEmbedding:
    if left.raw.shape != right.raw.shape or left.raw.shape[-1] != rot.dimension:
        raise ValueError("embedding dimensions do not match")
    raw = rot.power_apply(left.raw, right.symbolic_length) + right.raw
    return TypeEmbedding(raw, left.symbolic_length + right.symbolic_length)


class Embedder:
    """Caches raw and normalized embeddings per atom type id.

    Base embeddings are frozen; the cache only ever grows.
    """

    def __init__(self, seed: int, n_emb: int, theta: float = 1.0) -> None:
        self.seed = seed
        self.n_emb = n_emb
        self.theta = theta
        self.rotation = generate_rotation(seed, n_emb, theta)
        self._token_coords: dict[int, np.ndarray] = {}
        self._raw: dict[int, np.ndarray] = {}
        self._norm: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    def _coords(self, token: int) -> np.ndarray:
        c = self._token_coords.get(token)
        if c is None:
            c = self.rotation.basis.T @ base_embedding(token, self.seed, self.n_emb).raw
            self._token_coords[token] = c
        return c

    def raw_tokens(self, tokens) -> np.ndarray:
        coords = np.stack([self._coords(t) for t in tokens])
        powers = np.arange(len(tokens) - 1, -1, -1, dtype=np.float64)
        rotated = self.rotation._rotate(coords, powers)
        return self.rotation.basis @ rotated.sum(axis=0)

    def raw(self, atype: AtomType) -> np.ndarray:
        v = self._raw.get(atype.type_id)
        if v is None:
            v = self.raw_tokens(atype.tokens)
            with self._lock:
                self._raw.setdefault(atype.type_id, v)
        return v

    def embedding_of(self, atype: AtomType) -> np.ndarray:
        v = self._norm.get(atype.type_id)
        if v is None:
            v = self.raw(atype) / np.sqrt(atype.symbolic_length)
            with self._lock:
                self._norm.setdefault(atype.type_id, v)
        return v

    def type_embedding(self, atype: AtomType) -> TypeEmbedding:
        return TypeEmbedding(self.raw(atype), atype.symbolic_length)

    def window(self, types, dtype=np.float32) -> np.ndarray:
        """Concatenate normalized embeddings; ``None`` slots become zeros."""
        out = np.zeros(len(types) * self.n_emb, dtype=dtype)
        for i, t in enumerate(types):
            if t is not None:
                out[i * self.n_emb:(i + 1) * self.n_emb] = self.embedding_of(t)
        return out
