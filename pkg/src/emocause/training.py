"""Deterministic training: per-instance SGD, dropout, gradient checking.

One training run is single-threaded and fully determined by (config, data,
seed): instances are reshuffled each epoch from a seeded generator, dropout
masks come from the same stream, and updates are applied instance by
instance. Independent runs parallelize at a higher level with distinct
seeds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import kernels
from .convms import ConvMSParams, convms_backward
from .corpus import Instance
from .embeddings import EmbeddingMatrix
from .memnet import (Gradients, MemnetParams, accumulate_embedding_grads,
                     gather_clause, memnet_backward)

MODEL_KINDS = ("basic", "convms")

PROB_CLAMP = 1e-12


@dataclass
class TrainConfig:
    model_kind: str = "convms"
    hops: int = 3
    dim: int = 20
    dropout: float = 0.4
    epochs: int = 20
    learning_rate: float = 0.01
    seed: int = 0
    freeze_embeddings: bool = False
    use_bias: bool = True
    positive_weight: float = 1.0

    def validate(self) -> None:
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        if self.hops < 1:
            raise ValueError(f"hops must be >= 1, got {self.hops}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.positive_weight <= 0:
            raise ValueError(f"positive_weight must be > 0, got {self.positive_weight}")

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind, "hops": self.hops, "dim": self.dim,
            "dropout": self.dropout, "epochs": self.epochs,
            "learning_rate": self.learning_rate, "seed": self.seed,
            "freeze_embeddings": self.freeze_embeddings, "use_bias": self.use_bias,
            "positive_weight": self.positive_weight,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


@dataclass
class WatchRecord:
    epoch: int
    doc_id: str
    annotation_index: int
    clause_index: int
    probability: float


@dataclass
class TrainHistory:
    epoch_losses: list[float] = field(default_factory=list)
    watched: list[WatchRecord] = field(default_factory=list)

    def epochs_run(self) -> int:
        return len(self.epoch_losses)

    def to_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for epoch, loss in enumerate(self.epoch_losses, start=1):
                fh.write(json.dumps({"type": "loss", "epoch": epoch, "mean_loss": loss}) + "\n")
            for w in self.watched:
                fh.write(json.dumps({
                    "type": "watch", "epoch": w.epoch, "doc_id": w.doc_id,
                    "annotation_index": w.annotation_index,
                    "clause_index": w.clause_index, "probability": w.probability,
                }) + "\n")

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "TrainHistory":
        history = cls()
        losses: dict[int, float] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                if rec["type"] == "loss":
                    losses[rec["epoch"]] = rec["mean_loss"]
                elif rec["type"] == "watch":
                    history.watched.append(WatchRecord(
                        epoch=rec["epoch"], doc_id=rec["doc_id"],
                        annotation_index=rec["annotation_index"],
                        clause_index=rec["clause_index"],
                        probability=rec["probability"]))
        history.epoch_losses = [losses[e] for e in sorted(losses)]
        return history


def bce_loss(probability: float, label: bool | int) -> float:
    """Binary cross-entropy with the probability clamped away from {0, 1}."""
    p = min(max(float(probability), PROB_CLAMP), 1.0 - PROB_CLAMP)
    y = float(label)
    return -(y * math.log(p) + (1.0 - y) * math.log(1.0 - p))


def apply_dropout(vector, rate: float, rng: np.random.Generator):
    """Inverted dropout: zero entries with probability rate, scale survivors.

    Returns (dropped array, boolean keep mask); multiply upstream gradients
    by mask / (1 - rate) on the way back. Disabled at inference by simply
    not calling it.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    arr = np.asarray(vector, dtype=np.float64)
    mask = rng.random(arr.shape) >= rate
    return arr * mask / (1.0 - rate), mask


def new_params(kind: str, embedding: EmbeddingMatrix, hops: int):
    """Fresh parameters with a zero head over a caller-owned embedding copy."""
    if kind == "basic":
        return MemnetParams.zero_head(embedding, hops)
    if kind == "convms":
        return ConvMSParams.zero_head(embedding, hops)
    raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {kind!r}")


def forward(instance: Instance, params):
    """Model-kind dispatching forward pass (probability, trace)."""
    from .convms import convms_forward
    from .memnet import memnet_forward
    if params.kind == "basic":
        return memnet_forward(instance, params)
    return convms_forward(instance, params)


def backward(instance: Instance, params, label, freeze_embeddings: bool = False) -> Gradients:
    if params.kind == "basic":
        return memnet_backward(instance, params, label, freeze_embeddings)
    return convms_backward(instance, params, label, freeze_embeddings)


def sgd_step(params, grads: Gradients, lr: float):
    """In-place p <- p - lr * g for the head, bias and touched embedding columns."""
    if grads.head_weights.shape != params.head_weights.shape:
        raise ValueError(f"head gradient shape {grads.head_weights.shape} does not match "
                         f"parameters {params.head_weights.shape}")
    params.head_weights -= lr * grads.head_weights
    params.bias -= lr * grads.bias
    values = params.embedding.values
    for tok, g in grads.embedding.items():
        if g.shape != (values.shape[0],):
            raise ValueError(f"embedding gradient for id {tok} has shape {g.shape}, "
                             f"expected ({values.shape[0]},)")
        values[:, tok] -= lr * g
    return params


def _kernel_fns(kind: str):
    if kind == "basic":
        return kernels.basic_forward, kernels.basic_backward
    return kernels.convms_forward, kernels.convms_backward


def train(instances: list[Instance], config: TrainConfig, embedding: EmbeddingMatrix,
          watch_instances: Iterable[Instance] = (),
          checkpoint_hook: Callable[[int, object], None] | None = None):
    """Seeded SGD over instances; returns (trained params, history).

    The caller's embedding matrix is copied, never mutated. Watched
    instances are evaluated after every epoch with dropout off, feeding the
    per-epoch probability history. ``checkpoint_hook(epoch, params)`` fires
    after each epoch when given.
    """
    config.validate()
    if not instances:
        raise ValueError("cannot train on an empty instance list")
    if embedding.dim != config.dim:
        raise ValueError(f"embedding dimension {embedding.dim} does not match config dim {config.dim}")
    params = new_params(config.model_kind, embedding.copy(), config.hops)
    fwd, bwd = _kernel_fns(config.model_kind)
    rng = np.random.default_rng(config.seed)
    history = TrainHistory()
    watch = list(watch_instances)
    rate = config.dropout
    keep_scale = 1.0 / (1.0 - rate) if rate > 0.0 else 1.0
    lr = config.learning_rate
    values = params.embedding.values
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(instances))
        total_loss = 0.0
        for idx in order:
            inst = instances[idx]
            emb, query = gather_clause(params, inst)
            if rate > 0.0:
                mask = rng.random(emb.shape) >= rate
                net_in = emb * mask * keep_scale
            else:
                mask = None
                net_in = emb
            dist = float(inst.distance)
            label = float(inst.label)
            p, scores, attn, queries, outputs = fwd(
                net_in, query, dist, params.head_weights, params.bias, params.hops)
            total_loss += bce_loss(p, label)
            d_w, d_bias, d_emb, d_query = bwd(
                net_in, dist, params.head_weights, p, label, attn, queries, outputs)
            if inst.label and config.positive_weight != 1.0:
                w = config.positive_weight
                d_w *= w
                d_bias *= w
                d_emb *= w
                d_query *= w
            params.head_weights -= lr * d_w
            if config.use_bias:
                params.bias -= lr * d_bias
            if not config.freeze_embeddings:
                if mask is not None:
                    d_emb = d_emb * mask * keep_scale
                for tok, g in accumulate_embedding_grads(inst, d_emb, d_query).items():
                    values[:, tok] -= lr * g
        history.epoch_losses.append(total_loss / len(instances))
        for winst in watch:
            wp, _, _, _, _ = fwd(*gather_clause(params, winst), float(winst.distance),
                                 params.head_weights, params.bias, params.hops)
            history.watched.append(WatchRecord(
                epoch=epoch, doc_id=winst.doc_id, annotation_index=winst.annotation_index,
                clause_index=winst.clause_index, probability=wp))
        if checkpoint_hook is not None:
            checkpoint_hook(epoch, params)
    return params, history


@dataclass
class GradCheckReport:
    eps: float
    tolerance: float
    block_errors: dict[str, float]
    passed: bool
    failed_blocks: list[str]

    def lines(self) -> list[str]:
        out = []
        for name, err in self.block_errors.items():
            status = "ok" if err < self.tolerance else "FAIL"
            out.append(f"{name:<14} max_rel_err={err:.3e}  {status}")
        return out


def _loss_at(instance: Instance, params, label: float) -> float:
    fwd, _ = _kernel_fns(params.kind)
    emb, query = gather_clause(params, instance)
    p, _, _, _, _ = fwd(emb, query, float(instance.distance),
                        params.head_weights, params.bias, params.hops)
    return bce_loss(p, label)


def _rel_err(a: float, b: float) -> float:
    # guarded relative error: near-zero gradients compare absolutely at 1e-5
    return abs(a - b) / max(abs(a), abs(b), 1e-5)


def gradient_check(model_kind: str, instance: Instance, params, eps: float = 1e-5,
                   tolerance: float = 1e-4, inject_fault: bool = False) -> GradCheckReport:
    """Central-difference check of every analytic gradient, dropout off.

    Perturbs the head, the bias, and every embedding column the instance
    touches; reports the worst relative error per parameter block.
    ``inject_fault`` adds 1.0 to one analytic head entry to demonstrate
    the check trips on a wrong gradient.
    """
    if model_kind != params.kind:
        raise ValueError(f"model_kind {model_kind!r} does not match params kind {params.kind!r}")
    label = float(instance.label)
    grads = backward(instance, params, label)
    if inject_fault:
        grads.head_weights[0] += 1.0

    def central(arr: np.ndarray, flat_index: int) -> float:
        flat = arr.reshape(-1)
        orig = flat[flat_index]
        flat[flat_index] = orig + eps
        hi = _loss_at(instance, params, label)
        flat[flat_index] = orig - eps
        lo = _loss_at(instance, params, label)
        flat[flat_index] = orig
        return (hi - lo) / (2.0 * eps)

    block_errors: dict[str, float] = {}
    worst = 0.0
    for i in range(params.head_weights.shape[0]):
        fd = central(params.head_weights, i)
        worst = max(worst, _rel_err(grads.head_weights[i], fd))
    block_errors["head_weights"] = worst

    orig_bias = params.bias
    params.bias = orig_bias + eps
    hi = _loss_at(instance, params, label)
    params.bias = orig_bias - eps
    lo = _loss_at(instance, params, label)
    params.bias = orig_bias
    block_errors["bias"] = _rel_err(grads.bias, (hi - lo) / (2.0 * eps))

    worst = 0.0
    values = params.embedding.values
    d = values.shape[0]
    touched = sorted(set(instance.token_ids) | {instance.emotion_word_id})
    for tok in touched:
        analytic = grads.embedding.get(tok, np.zeros(d))
        for j in range(d):
            flat_index = j * values.shape[1] + tok
            fd = central(values, flat_index)
            worst = max(worst, _rel_err(analytic[j], fd))
    block_errors["embeddings"] = worst

    failed = [name for name, err in block_errors.items() if err >= tolerance]
    return GradCheckReport(eps=eps, tolerance=tolerance, block_errors=block_errors,
                           passed=not failed, failed_blocks=failed)
