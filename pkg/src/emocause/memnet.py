"""Basic multi-hop memory network over one clause.

One hop scores every clause word against the query by inner product,
normalizes the scores with a softmax, and reads the memory as the
attention-weighted sum of word embeddings plus the query. Hops chain by
using the previous read as the next query. The head maps the final read
plus the signed clause-distance feature through a sigmoid to the yes/no
probability. Forward and backward are pure given their inputs; parameter
updates need exclusive access.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .corpus import Instance
from .embeddings import EmbeddingMatrix


@dataclass
class MemnetParams:
    """Trainable state of the basic model: shared embeddings + linear head."""

    embedding: EmbeddingMatrix
    head_weights: np.ndarray  # (d + 1,): d read weights + 1 distance weight
    bias: float
    hops: int

    KIND = "basic"

    def __post_init__(self):
        self.head_weights = np.ascontiguousarray(self.head_weights, dtype=np.float64)
        d = self.embedding.dim
        if self.head_weights.shape != (d + 1,):
            raise ValueError(f"head must have shape ({d + 1},), got {self.head_weights.shape}")
        if self.hops < 1:
            raise ValueError(f"hops must be >= 1, got {self.hops}")
        if not np.isfinite(self.head_weights).all() or not np.isfinite(self.bias):
            raise ValueError("head parameters contain non-finite values")

    @property
    def kind(self) -> str:
        return self.KIND

    @classmethod
    def zero_head(cls, embedding: EmbeddingMatrix, hops: int) -> "MemnetParams":
        return cls(embedding=embedding, head_weights=np.zeros(embedding.dim + 1),
                   bias=0.0, hops=hops)


@dataclass
class AttentionTrace:
    """Per-hop scores, attention weights, queries and read outputs.

    For the basic model outputs/queries have shape (hops, d); for the
    multi-slot model they have shape (hops, 3, d) with slot order
    (previous, current, following).
    """

    model_kind: str
    scores: np.ndarray     # (hops, k)
    attention: np.ndarray  # (hops, k)
    queries: np.ndarray
    outputs: np.ndarray

    @property
    def hops(self) -> int:
        return self.scores.shape[0]

    @property
    def clause_length(self) -> int:
        return self.scores.shape[1]


@dataclass
class Gradients:
    """Loss gradients keyed the way sgd_step consumes them.

    ``embedding`` maps vocabulary id to the summed (d,) column gradient;
    columns not touched by the instance are simply absent.
    """

    head_weights: np.ndarray
    bias: float
    embedding: dict[int, np.ndarray] = field(default_factory=dict)

    def scale(self, factor: float) -> "Gradients":
        self.head_weights *= factor
        self.bias *= factor
        for g in self.embedding.values():
            g *= factor
        return self


def _as_matrix(clause_embeddings, dim: int | None = None) -> np.ndarray:
    emb = np.ascontiguousarray(clause_embeddings, dtype=np.float64)
    if emb.ndim == 1:
        emb = emb.reshape(1, -1)
    if emb.ndim != 2 or emb.shape[0] < 1:
        raise ValueError("clause embeddings must form a (k, d) matrix with k >= 1")
    if dim is not None and emb.shape[1] != dim:
        raise ValueError(f"clause embeddings have dimension {emb.shape[1]}, expected {dim}")
    return emb


def attention_scores(clause_embeddings, query) -> np.ndarray:
    """Inner product of each clause word embedding with the query."""
    query = np.asarray(query, dtype=np.float64)
    emb = _as_matrix(clause_embeddings, dim=query.shape[0])
    return emb @ query


def softmax_norm(scores) -> np.ndarray:
    """Stable softmax; entries in [0, 1] and summing to 1."""
    m = np.asarray(scores, dtype=np.float64)
    if not np.isfinite(m).all():
        raise ValueError("scores contain non-finite values")
    e = np.exp(m - m.max())
    return e / e.sum()


def memory_read(clause_embeddings, attention, query) -> np.ndarray:
    """Attention-weighted sum of word embeddings plus the query."""
    query = np.asarray(query, dtype=np.float64)
    emb = _as_matrix(clause_embeddings, dim=query.shape[0])
    a = np.asarray(attention, dtype=np.float64)
    if a.shape != (emb.shape[0],):
        raise ValueError(f"attention has shape {a.shape}, expected ({emb.shape[0]},)")
    if abs(a.sum() - 1.0) > 1e-6:
        raise ValueError("attention weights are not normalized")
    return a @ emb + query


def gather_clause(params, instance: Instance) -> tuple[np.ndarray, np.ndarray]:
    """Clause embedding matrix (k, d) and query vector for an instance."""
    if len(instance.token_ids) == 0:
        raise ValueError(f"instance for doc '{instance.doc_id}' has an empty clause")
    values = params.embedding.values
    v = values.shape[1]
    for tok in (*instance.token_ids, instance.emotion_word_id):
        if not 0 <= tok < v:
            raise ValueError(f"token id {tok} outside vocabulary of size {v}")
    ids = np.asarray(instance.token_ids, dtype=np.intp)
    emb = np.ascontiguousarray(values[:, ids].T)
    query = values[:, instance.emotion_word_id].copy()
    return emb, query


def accumulate_embedding_grads(instance: Instance, d_emb: np.ndarray,
                               d_query: np.ndarray) -> dict[int, np.ndarray]:
    """Fold per-position gradients into per-vocabulary-id column gradients."""
    grads: dict[int, np.ndarray] = {}
    for i, tok in enumerate(instance.token_ids):
        if tok in grads:
            grads[tok] += d_emb[i]
        else:
            grads[tok] = d_emb[i].copy()
    eid = instance.emotion_word_id
    if eid in grads:
        grads[eid] += d_query
    else:
        grads[eid] = d_query.copy()
    return grads


def memnet_forward(instance: Instance, params: MemnetParams) -> tuple[float, AttentionTrace]:
    """Probability that the clause causes the queried emotion, plus the trace."""
    emb, query = gather_clause(params, instance)
    p, scores, attn, queries, outputs = kernels.basic_forward(
        emb, query, float(instance.distance), params.head_weights, params.bias, params.hops)
    trace = AttentionTrace(model_kind=params.kind, scores=scores, attention=attn,
                           queries=queries, outputs=outputs)
    return p, trace


def memnet_backward(instance: Instance, params: MemnetParams, label: bool | int,
                    freeze_embeddings: bool = False) -> Gradients:
    """Exact log-loss gradients for every trainable parameter of the model."""
    emb, query = gather_clause(params, instance)
    p, scores, attn, queries, outputs = kernels.basic_forward(
        emb, query, float(instance.distance), params.head_weights, params.bias, params.hops)
    d_w, d_bias, d_emb, d_query = kernels.basic_backward(
        emb, float(instance.distance), params.head_weights, p, float(label),
        attn, queries, outputs)
    if freeze_embeddings:
        d_emb = np.zeros_like(d_emb)
        d_query = np.zeros_like(d_query)
    return Gradients(head_weights=d_w, bias=d_bias,
                     embedding=accumulate_embedding_grads(instance, d_emb, d_query))
