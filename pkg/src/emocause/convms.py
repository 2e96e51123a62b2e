"""Convolutional multiple-slot memory network.

Scoring slides a width-3 window over the clause with zero padding at both
ends: position i scores e_{i-1}, e_i and e_{i+1} against the slot queries
and the softmax runs over positions, not words. Three slot reads share the
position attention with index shifts (previous / current / following) and
the head consumes their concatenation plus the distance feature. At hop 1
all three slot queries are the emotion-word embedding; at deeper hops each
slot feeds its own previous output back as its query.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .corpus import Instance
from .embeddings import EmbeddingMatrix
from .memnet import (AttentionTrace, Gradients, _as_matrix, accumulate_embedding_grads,
                     gather_clause)


class SlotOutputs(NamedTuple):
    previous: np.ndarray
    current: np.ndarray
    following: np.ndarray


@dataclass
class ConvMSParams:
    """Trainable state of the multi-slot model: shared embeddings + 3d+1 head."""

    embedding: EmbeddingMatrix
    head_weights: np.ndarray  # (3d + 1,): slot blocks + 1 distance weight
    bias: float
    hops: int

    KIND = "convms"

    def __post_init__(self):
        self.head_weights = np.ascontiguousarray(self.head_weights, dtype=np.float64)
        d = self.embedding.dim
        if self.head_weights.shape != (3 * d + 1,):
            raise ValueError(f"head must have shape ({3 * d + 1},), got {self.head_weights.shape}")
        if self.hops < 1:
            raise ValueError(f"hops must be >= 1, got {self.hops}")
        if not np.isfinite(self.head_weights).all() or not np.isfinite(self.bias):
            raise ValueError("head parameters contain non-finite values")

    @property
    def kind(self) -> str:
        return self.KIND

    @classmethod
    def zero_head(cls, embedding: EmbeddingMatrix, hops: int) -> "ConvMSParams":
        return cls(embedding=embedding, head_weights=np.zeros(3 * embedding.dim + 1),
                   bias=0.0, hops=hops)


def _shifted(emb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k, d = emb.shape
    pad = np.zeros((k + 2, d))
    pad[1:-1] = emb
    return pad[:-2], pad[1:-1], pad[2:]


def conv_scores_multi_query(clause_embeddings, slots: SlotOutputs) -> np.ndarray:
    """Windowed position scores against one query per slot (zero padding)."""
    qp = np.asarray(slots.previous, dtype=np.float64)
    qc = np.asarray(slots.current, dtype=np.float64)
    qf = np.asarray(slots.following, dtype=np.float64)
    if not qp.shape == qc.shape == qf.shape:
        raise ValueError("slot queries must share one dimension")
    emb = _as_matrix(clause_embeddings, dim=qc.shape[0])
    prev_e, curr_e, foll_e = _shifted(emb)
    return prev_e @ qp + curr_e @ qc + foll_e @ qf


def conv_scores_first_hop(clause_embeddings, emotion_embedding) -> np.ndarray:
    """First-hop windowed scores: every slot queried by the emotion embedding."""
    q = np.asarray(emotion_embedding, dtype=np.float64)
    return conv_scores_multi_query(clause_embeddings, SlotOutputs(q, q, q))


def slot_read(clause_embeddings, attention, slot_queries) -> SlotOutputs:
    """Three shifted attention-weighted reads, each plus its slot query.

    ``slot_queries`` is a SlotOutputs triple, or a single (d,) vector used
    for all three slots (the first-hop case).
    """
    if isinstance(slot_queries, SlotOutputs):
        qp, qc, qf = (np.asarray(q, dtype=np.float64) for q in slot_queries)
    else:
        qp = qc = qf = np.asarray(slot_queries, dtype=np.float64)
    emb = _as_matrix(clause_embeddings, dim=qc.shape[0])
    a = np.asarray(attention, dtype=np.float64)
    if a.shape != (emb.shape[0],):
        raise ValueError(f"attention has shape {a.shape}, expected ({emb.shape[0]},)")
    if abs(a.sum() - 1.0) > 1e-6:
        raise ValueError("attention weights are not normalized")
    prev_e, curr_e, foll_e = _shifted(emb)
    return SlotOutputs(a @ prev_e + qp, a @ curr_e + qc, a @ foll_e + qf)


def convms_forward(instance: Instance, params: ConvMSParams) -> tuple[float, AttentionTrace]:
    """Probability that the clause causes the queried emotion, plus the trace."""
    emb, query = gather_clause(params, instance)
    p, scores, attn, queries, outputs = kernels.convms_forward(
        emb, query, float(instance.distance), params.head_weights, params.bias, params.hops)
    trace = AttentionTrace(model_kind=params.kind, scores=scores, attention=attn,
                           queries=queries, outputs=outputs)
    return p, trace


def convms_backward(instance: Instance, params: ConvMSParams, label: bool | int,
                    freeze_embeddings: bool = False) -> Gradients:
    """Exact log-loss gradients through concatenation, slots, attention and hops."""
    emb, query = gather_clause(params, instance)
    p, scores, attn, queries, outputs = kernels.convms_forward(
        emb, query, float(instance.distance), params.head_weights, params.bias, params.hops)
    d_w, d_bias, d_emb, d_query = kernels.convms_backward(
        emb, float(instance.distance), params.head_weights, p, float(label),
        attn, queries, outputs)
    if freeze_embeddings:
        d_emb = np.zeros_like(d_emb)
        d_query = np.zeros_like(d_query)
    return Gradients(head_weights=d_w, bias=d_bias,
                     embedding=accumulate_embedding_grads(instance, d_emb, d_query))


def final_slots(trace: AttentionTrace) -> SlotOutputs:
    """Slot outputs of the last hop of a multi-slot trace."""
    if trace.model_kind != ConvMSParams.KIND:
        raise ValueError(f"trace comes from a {trace.model_kind!r} model")
    last = trace.outputs[-1]
    return SlotOutputs(last[0], last[1], last[2])
