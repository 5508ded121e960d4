"""Projection encoders from content-embedding space into knowledge-embedding space.

A target's content embedding is projected through two independent affine heads
(one per relation type) to produce its agree and disagree relation embeddings;
tweet content embeddings go through a third affine head to produce entity
embeddings.  Content encoders themselves are frozen inputs: vectors come from
an EmbeddingStore, or from the deterministic n-gram hash encoder for tests and
synthetic runs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ShapeError
from .graph import RelationType
from .scoring import (EntityEmbedding, RelationEmbedding, ScoringModel,
                      entity_width, relation_width)


@dataclass
class EmbeddingStore:
    """Keyed content-embedding vectors, all sharing one dimension."""

    dim: int
    records: dict = field(default_factory=dict)

    def add(self, key: str, vector: np.ndarray):
        vector = np.asarray(vector)
        if vector.shape != (self.dim,):
            raise ShapeError(f"vector for {key!r} has shape {vector.shape}, store dim is {self.dim}")
        if key in self.records:
            raise DataError(f"duplicate embedding key {key!r}")
        self.records[key] = vector

    def get(self, key: str) -> np.ndarray:
        try:
            return self.records[key]
        except KeyError:
            raise DataError(f"no content embedding for key {key!r}") from None

    def __contains__(self, key: str) -> bool:
        return key in self.records

    def __len__(self) -> int:
        return len(self.records)

    def matrix(self, keys) -> np.ndarray:
        """Stack vectors for `keys` into a (len(keys), dim) float64 matrix."""
        if not keys:
            return np.zeros((0, self.dim))
        return np.stack([np.asarray(self.get(k), dtype=float) for k in keys])

    @classmethod
    def from_texts(cls, texts: dict, dim: int) -> "EmbeddingStore":
        store = cls(dim=dim)
        for key, text in texts.items():
            store.add(key, hash_encode(text or "", dim))
        return store


@dataclass
class ProjectionWeights:
    """Affine maps from content space (dim_in) to knowledge space (dim_k latent size).

    w_agree/w_disagree encode a target's text into its two relation embeddings;
    w_tweet encodes tweet text into entity embeddings.  Output widths depend on
    the scoring model (TransD carries projection halves, RotatE interleaved
    complex parts / angle vectors).
    """

    kind: ScoringModel
    dim_in: int
    dim_k: int
    w_agree: np.ndarray
    b_agree: np.ndarray
    w_disagree: np.ndarray
    b_disagree: np.ndarray
    w_tweet: np.ndarray
    b_tweet: np.ndarray

    def relation_head(self, relation: RelationType):
        if relation is RelationType.AGREE:
            return self.w_agree, self.b_agree
        return self.w_disagree, self.b_disagree


def init_projection_weights(kind: ScoringModel, dim_in: int, dim_k: int,
                            rng: np.random.Generator) -> ProjectionWeights:
    """Fan-in scaled uniform init, zero biases."""
    bound = 1.0 / np.sqrt(dim_in)
    r_out = relation_width(kind, dim_k)
    e_out = entity_width(kind, dim_k)

    def w(n_out):
        return rng.uniform(-bound, bound, size=(n_out, dim_in))

    return ProjectionWeights(
        kind=kind, dim_in=dim_in, dim_k=dim_k,
        w_agree=w(r_out), b_agree=np.zeros(r_out),
        w_disagree=w(r_out), b_disagree=np.zeros(r_out),
        w_tweet=w(e_out), b_tweet=np.zeros(e_out),
    )


def _check_content(weights: ProjectionWeights, vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (weights.dim_in,):
        raise ShapeError(f"content embedding has shape {vec.shape}, encoder expects ({weights.dim_in},)")
    return vec


def _as_relation(weights: ProjectionWeights, raw: np.ndarray, mist_id: str,
                 relation: RelationType) -> RelationEmbedding:
    if weights.kind is ScoringModel.TRANSD:
        d = weights.dim_k
        return RelationEmbedding(vector=raw[:d], projection=raw[d:],
                                 mist_id=mist_id, relation=relation)
    phases = weights.kind is ScoringModel.ROTATE
    return RelationEmbedding(vector=raw, phases=phases, mist_id=mist_id, relation=relation)


def encode_mist(weights: ProjectionWeights, content: np.ndarray, mist_id: str = ""):
    """Project a target's content embedding into its (agree, disagree) relation embeddings."""
    vec = _check_content(weights, content)
    agree_raw = weights.w_agree @ vec + weights.b_agree
    disagree_raw = weights.w_disagree @ vec + weights.b_disagree
    return (_as_relation(weights, agree_raw, mist_id, RelationType.AGREE),
            _as_relation(weights, disagree_raw, mist_id, RelationType.DISAGREE))


def encode_tweet(weights: ProjectionWeights, content: np.ndarray) -> EntityEmbedding:
    """Project a tweet's content embedding into an entity embedding."""
    vec = _check_content(weights, content)
    raw = weights.w_tweet @ vec + weights.b_tweet
    if weights.kind is ScoringModel.TRANSD:
        d = weights.dim_k
        return EntityEmbedding(vector=raw[:d], projection=raw[d:])
    return EntityEmbedding(vector=raw)


def hash_encode(text: str, dim: int) -> np.ndarray:
    """Deterministic bag-of-ngrams content encoder.

    Whitespace tokens and their bigrams are hashed into `dim` signed buckets;
    the count vector is L2-normalized.  Empty text yields the zero vector.
    Stand-in for a frozen language-model encoder in tests and synthetic data.
    """
    if dim < 1:
        raise ShapeError(f"hash encoder dimension must be >= 1, got {dim}")
    vec = np.zeros(dim)
    tokens = text.lower().split()
    grams = tokens + [" ".join(p) for p in zip(tokens, tokens[1:])]
    for gram in grams:
        h = int.from_bytes(hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest(), "little")
        sign = 1.0 if h & 1 else -1.0
        vec[(h >> 1) % dim] += sign
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec
