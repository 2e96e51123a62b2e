"""Versioned binary persistence for trained models.

Layout (little endian): magic, u32 version, u8 kind tag, u32 dim,
u32 hops, u64 vocab size, u64 oov id, float64 bias, u32 head length,
head float64s, embedding float64s (dim-major), then the vocabulary table
as (u32 byte length, utf-8 surface) per id. Floats round-trip exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .convms import ConvMSParams
from .corpus import Vocabulary
from .embeddings import EmbeddingMatrix
from .memnet import MemnetParams

MAGIC = b"ECMN\x00"
VERSION = 1
_KIND_TAGS = {"basic": 0, "convms": 1}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}


class ModelFormatError(ValueError):
    pass


def save_model(params: MemnetParams | ConvMSParams, path: str | Path) -> None:
    emb = params.embedding
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IBIIQQd", VERSION, _KIND_TAGS[params.kind], emb.dim,
                             params.hops, emb.vocab_size, emb.vocab.oov_id, params.bias))
        fh.write(struct.pack("<I", params.head_weights.shape[0]))
        fh.write(np.ascontiguousarray(params.head_weights).tobytes())
        fh.write(np.ascontiguousarray(emb.values).tobytes())
        for surface in emb.vocab.surfaces():
            raw = surface.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)


def _read_exact(fh, n: int, what: str) -> bytes:
    raw = fh.read(n)
    if len(raw) != n:
        raise ModelFormatError(f"truncated model file while reading {what}")
    return raw


def load_model(path: str | Path) -> MemnetParams | ConvMSParams:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, len(MAGIC), "magic")
        if magic != MAGIC:
            raise ModelFormatError(f"{path}: not a model file (bad magic)")
        version, tag, dim, hops, vsize, oov_id, bias = struct.unpack(
            "<IBIIQQd", _read_exact(fh, 37, "header"))
        if version != VERSION:
            raise ModelFormatError(f"{path}: unsupported model file version {version}")
        if tag not in _TAG_KINDS:
            raise ModelFormatError(f"{path}: unknown model kind tag {tag}")
        kind = _TAG_KINDS[tag]
        (head_len,) = struct.unpack("<I", _read_exact(fh, 4, "head length"))
        head = np.frombuffer(_read_exact(fh, 8 * head_len, "head"), dtype=np.float64).copy()
        raw = _read_exact(fh, 8 * dim * vsize, "embedding matrix")
        values = np.frombuffer(raw, dtype=np.float64).reshape(dim, vsize).copy()
        surfaces = []
        for i in range(vsize):
            (n,) = struct.unpack("<I", _read_exact(fh, 4, f"vocab entry {i}"))
            surfaces.append(_read_exact(fh, n, f"vocab entry {i}").decode("utf-8"))
    vocab = Vocabulary(surfaces, oov_id=oov_id)
    emb = EmbeddingMatrix(values, dim, vocab)
    cls = MemnetParams if kind == "basic" else ConvMSParams
    return cls(embedding=emb, head_weights=head, bias=bias, hops=hops)
