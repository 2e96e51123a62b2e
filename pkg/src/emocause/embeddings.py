"""Word vectors: skip-gram training, file loading, random init, lookup.

The embedding matrix is stored dim-major, shape (dim, vocab_size), one
column per vocabulary id. Both network kinds share a single matrix: the
query word and the memory words live in the same space.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .corpus import Vocabulary


@dataclass
class EmbeddingMatrix:
    values: np.ndarray  # (dim, vocab_size) float64
    dim: int
    vocab: Vocabulary

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("embedding values must be a 2-d matrix")
        if self.values.shape[0] != self.dim:
            raise ValueError(f"matrix has {self.values.shape[0]} rows, expected dim={self.dim}")
        if self.values.shape[1] != len(self.vocab):
            raise ValueError(f"matrix has {self.values.shape[1]} columns, "
                             f"expected vocabulary size {len(self.vocab)}")
        if not np.isfinite(self.values).all():
            raise ValueError("embedding matrix contains non-finite values")

    @property
    def vocab_size(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "EmbeddingMatrix":
        return EmbeddingMatrix(self.values.copy(), self.dim, self.vocab)


def lookup(matrix: EmbeddingMatrix, token_id: int) -> np.ndarray:
    """Column view for a vocabulary id; reflects later in-place updates."""
    if not 0 <= token_id < matrix.vocab_size:
        raise ValueError(f"token id {token_id} outside vocabulary of size {matrix.vocab_size}")
    return matrix.values[:, token_id]


def random_init(vocab: Vocabulary, dim: int, seed: int = 0, scale: float = 0.1) -> EmbeddingMatrix:
    """Uniform [-scale, scale] matrix, reproducible from the seed."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if scale < 0:
        raise ValueError(f"scale must be >= 0, got {scale}")
    rng = np.random.default_rng(seed)
    values = rng.uniform(-scale, scale, size=(dim, len(vocab)))
    return EmbeddingMatrix(values, dim, vocab)


@dataclass
class SkipgramConfig:
    dim: int = 20
    window: int = 2
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    seed: int = 0

    def validate(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.negatives < 1:
            raise ValueError(f"negatives must be >= 1, got {self.negatives}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")


def _collect_pairs(sequences: list[list[int]], window: int) -> tuple[np.ndarray, np.ndarray]:
    centers: list[int] = []
    contexts: list[int] = []
    for seq in sequences:
        n = len(seq)
        for i in range(n):
            lo = max(0, i - window)
            hi = min(n, i + window + 1)
            for j in range(lo, hi):
                if j != i:
                    centers.append(seq[i])
                    contexts.append(seq[j])
    return (np.asarray(centers, dtype=np.int64), np.asarray(contexts, dtype=np.int64))


def train_skipgram(sequences: list[list[int]], vocab: Vocabulary,
                   config: SkipgramConfig | None = None) -> EmbeddingMatrix:
    """Skip-gram with negative sampling over token-id sequences.

    Negatives are drawn from the unigram distribution raised to 0.75,
    the learning rate decays linearly over all (epoch, pair) steps, and the
    whole run is deterministic for a fixed seed. Raises if any epoch leaves
    a non-finite value behind.
    """
    if config is None:
        config = SkipgramConfig()
    config.validate()
    if not sequences or all(len(s) == 0 for s in sequences):
        raise ValueError("cannot train embeddings on an empty corpus")
    v = len(vocab)
    counts = np.zeros(v, dtype=np.float64)
    for seq in sequences:
        for tok in seq:
            if not 0 <= tok < v:
                raise ValueError(f"token id {tok} outside vocabulary of size {v}")
            counts[tok] += 1.0
    centers, contexts = _collect_pairs(sequences, config.window)
    if centers.size == 0:
        raise ValueError("corpus has no co-occurring token pairs; sequences are too short")

    noise = counts ** 0.75
    noise /= noise.sum()

    rng = np.random.default_rng(config.seed)
    d = config.dim
    w_in = rng.uniform(-0.5 / d, 0.5 / d, size=(v, d))
    w_out = np.zeros((v, d))

    total_pairs = config.epochs * centers.size
    lr_min = config.learning_rate * 1e-4
    done = 0
    for _ in range(config.epochs):
        negatives = rng.choice(v, size=(centers.size, config.negatives), p=noise).astype(np.int64)
        done = kernels.skipgram_pairs(w_in, w_out, centers, contexts, negatives,
                                      config.learning_rate, lr_min, done, total_pairs)
        if not np.isfinite(w_in).all() or not np.isfinite(w_out).all():
            raise FloatingPointError("skip-gram training produced non-finite values")
    return EmbeddingMatrix(np.ascontiguousarray(w_in.T), d, vocab)


def save_embeddings_text(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Text vector format: header '|V| d', then 'word v1 ... vd' per line.

    Values are printed with enough digits to round-trip float64 exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{matrix.vocab_size} {matrix.dim}\n")
        for i, surface in enumerate(matrix.vocab.surfaces()):
            vec = " ".join(f"{x:.17g}" for x in matrix.values[:, i])
            fh.write(f"{surface} {vec}\n")


def load_embeddings(path: str | Path, vocab: Vocabulary, dim: int,
                    seed: int = 0, scale: float = 0.1) -> EmbeddingMatrix:
    """Load text vectors for a vocabulary; absent words get seeded random init.

    The file header must declare the requested dimension. Words in the file
    that are not in the vocabulary are ignored.
    """
    matrix = random_init(vocab, dim, seed=seed, scale=scale)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: line 1: header must be '<count> <dim>'")
        try:
            file_count, file_dim = int(header[0]), int(header[1])
        except ValueError:
            raise ValueError(f"{path}: line 1: header must hold two integers") from None
        if file_dim != dim:
            raise ValueError(f"{path}: file declares dimension {file_dim}, requested {dim}")
        n_rows = 0
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != dim + 1:
                raise ValueError(f"{path}: line {line_no}: expected word + {dim} values, "
                                 f"got {len(parts)} fields")
            word = parts[0]
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError:
                raise ValueError(f"{path}: line {line_no}: non-numeric vector value") from None
            n_rows += 1
            if word in vocab:
                matrix.values[:, vocab.id_for(word)] = vec
        if n_rows != file_count:
            raise ValueError(f"{path}: header declares {file_count} words, file has {n_rows}")
    if not np.isfinite(matrix.values).all():
        raise ValueError(f"{path}: loaded matrix contains non-finite values")
    return matrix


_BIN_MAGIC = b"ECEMB\x00"
_BIN_VERSION = 1


def save_embeddings_binary(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Exact binary round-trip format: magic, version, |V|, d, floats, vocab."""
    with open(path, "wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(struct.pack("<IQQQ", _BIN_VERSION, matrix.vocab_size, matrix.dim,
                             matrix.vocab.oov_id))
        fh.write(np.ascontiguousarray(matrix.values).tobytes())
        for surface in matrix.vocab.surfaces():
            raw = surface.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)


def load_embeddings_binary(path: str | Path) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        magic = fh.read(len(_BIN_MAGIC))
        if magic != _BIN_MAGIC:
            raise ValueError(f"{path}: not an embedding file (bad magic)")
        version, vsize, dim, oov_id = struct.unpack("<IQQQ", fh.read(28))
        if version != _BIN_VERSION:
            raise ValueError(f"{path}: unsupported embedding file version {version}")
        raw = fh.read(8 * vsize * dim)
        if len(raw) != 8 * vsize * dim:
            raise ValueError(f"{path}: truncated embedding matrix")
        values = np.frombuffer(raw, dtype=np.float64).reshape(dim, vsize).copy()
        surfaces = []
        for _ in range(vsize):
            (n,) = struct.unpack("<I", fh.read(4))
            surfaces.append(fh.read(n).decode("utf-8"))
    vocab = Vocabulary(surfaces, oov_id=oov_id)
    return EmbeddingMatrix(values, dim, vocab)
