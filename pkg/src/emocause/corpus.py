"""Annotated corpus handling: parsing, vocabulary, instances, splits.

Corpus files are UTF-8 with one JSON record per line:

    {"doc_id": "...",
     "clauses": [["tok", ...], ...],
     "annotations": [{"emotion_word": "...",
                      "emotion_clause": 0,
                      "emotion_token": 0,
                      "cause_clauses": [0, ...],
                      "keyword_spans": [[clause, start, end], ...]}]}

Token order is significant and whitespace inside tokens is forbidden.
Every document carries at least one clause and one annotation; a document
with several annotations yields one independent instance group per
annotation. All functions here are pure transformations and safe to call
concurrently.
"""

from __future__ import annotations

import io
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable

import numpy as np


class CorpusError(ValueError):
    """Raised for malformed corpus records or invariant violations."""


@dataclass(frozen=True)
class Token:
    surface: str
    id: int | None = None


@dataclass(frozen=True)
class Clause:
    tokens: tuple[Token, ...]
    index_in_document: int

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.tokens)

    @property
    def token_ids(self) -> tuple[int, ...]:
        ids = tuple(t.id for t in self.tokens)
        if any(i is None for i in ids):
            raise CorpusError("clause tokens have no vocabulary ids; encode the document first")
        return ids  # type: ignore[return-value]


@dataclass(frozen=True)
class EmotionAnnotation:
    emotion_word: Token
    emotion_clause_index: int
    emotion_token_index: int
    cause_clause_indices: frozenset[int]
    cause_keyword_spans: tuple[tuple[int, int, int], ...]


@dataclass(frozen=True)
class Document:
    doc_id: str
    clauses: tuple[Clause, ...]
    annotations: tuple[EmotionAnnotation, ...]


@dataclass(frozen=True)
class Instance:
    """One (annotation, clause) question: does this clause cause the emotion?"""

    doc_id: str
    clause_index: int
    token_ids: tuple[int, ...]
    emotion_word_id: int
    distance: int
    label: bool
    annotation_index: int = 0


class Vocabulary:
    """Bijective surface <-> id map with a reserved id for unknown tokens."""

    OOV_SURFACE = "<OOV>"

    def __init__(self, id_to_surface: list[str], oov_id: int):
        if not 0 <= oov_id < len(id_to_surface):
            raise CorpusError(f"oov_id {oov_id} outside vocabulary of size {len(id_to_surface)}")
        self._id_to_surface = list(id_to_surface)
        self._surface_to_id = {s: i for i, s in enumerate(id_to_surface)}
        if len(self._surface_to_id) != len(id_to_surface):
            raise CorpusError("vocabulary surfaces are not unique")
        self.oov_id = oov_id

    def __len__(self) -> int:
        return len(self._id_to_surface)

    @property
    def size(self) -> int:
        return len(self._id_to_surface)

    def __contains__(self, surface: str) -> bool:
        return surface in self._surface_to_id

    def id_for(self, surface: str) -> int:
        return self._surface_to_id.get(surface, self.oov_id)

    def surface_for(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._id_to_surface):
            raise CorpusError(f"token id {token_id} outside vocabulary of size {len(self)}")
        return self._id_to_surface[token_id]

    def surfaces(self) -> list[str]:
        return list(self._id_to_surface)

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, Vocabulary)
                and self._id_to_surface == other._id_to_surface
                and self.oov_id == other.oov_id)

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self)}, oov_id={self.oov_id})"


def _check_token_surface(surface, line_no: int, field: str) -> str:
    if not isinstance(surface, str) or not surface:
        raise CorpusError(f"line {line_no}: field '{field}' must contain non-empty strings")
    if any(ch.isspace() for ch in surface):
        raise CorpusError(f"line {line_no}: field '{field}' token {surface!r} contains whitespace")
    return surface


def _parse_record(record: dict, line_no: int) -> Document:
    if not isinstance(record, dict):
        raise CorpusError(f"line {line_no}: field '<record>' must be a JSON object")
    for required in ("doc_id", "clauses", "annotations"):
        if required not in record:
            raise CorpusError(f"line {line_no}: field '{required}' is missing")
    doc_id = record["doc_id"]
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError(f"line {line_no}: field 'doc_id' must be a non-empty string")

    raw_clauses = record["clauses"]
    if not isinstance(raw_clauses, list) or not raw_clauses:
        raise CorpusError(f"line {line_no}: field 'clauses' must be a non-empty array")
    clauses = []
    for ci, raw in enumerate(raw_clauses):
        if not isinstance(raw, list) or not raw:
            raise CorpusError(f"line {line_no}: field 'clauses' clause {ci} must be a non-empty array")
        tokens = tuple(Token(_check_token_surface(s, line_no, "clauses")) for s in raw)
        clauses.append(Clause(tokens=tokens, index_in_document=ci))
    n_clauses = len(clauses)

    raw_anns = record["annotations"]
    if not isinstance(raw_anns, list) or not raw_anns:
        raise CorpusError(f"line {line_no}: field 'annotations' must be a non-empty array")
    annotations = []
    for ai, raw in enumerate(raw_anns):
        if not isinstance(raw, dict):
            raise CorpusError(f"line {line_no}: field 'annotations' entry {ai} must be an object")
        for required in ("emotion_word", "emotion_clause", "emotion_token", "cause_clauses"):
            if required not in raw:
                raise CorpusError(f"line {line_no}: field 'annotations[{ai}].{required}' is missing")
        surface = _check_token_surface(raw["emotion_word"], line_no, f"annotations[{ai}].emotion_word")
        eci = raw["emotion_clause"]
        eti = raw["emotion_token"]
        if not isinstance(eci, int) or not 0 <= eci < n_clauses:
            raise CorpusError(
                f"invalid clause index in doc '{doc_id}': emotion_clause {eci!r} "
                f"(document has {n_clauses} clauses)")
        if not isinstance(eti, int) or not 0 <= eti < len(clauses[eci]):
            raise CorpusError(f"invalid token index in doc '{doc_id}': emotion_token {eti!r}")
        if clauses[eci].tokens[eti].surface != surface:
            raise CorpusError(
                f"line {line_no}: field 'annotations[{ai}].emotion_word' {surface!r} does not match "
                f"token {eti} of clause {eci} in doc '{doc_id}'")
        causes = raw["cause_clauses"]
        if not isinstance(causes, list) or not causes:
            raise CorpusError(f"line {line_no}: field 'annotations[{ai}].cause_clauses' must be non-empty")
        for c in causes:
            if not isinstance(c, int) or not 0 <= c < n_clauses:
                raise CorpusError(
                    f"invalid clause index in doc '{doc_id}': cause clause {c!r} "
                    f"(document has {n_clauses} clauses)")
        cause_set = frozenset(causes)
        spans = []
        for span in raw.get("keyword_spans", []):
            if (not isinstance(span, list) or len(span) != 3
                    or not all(isinstance(v, int) for v in span)):
                raise CorpusError(f"line {line_no}: field 'annotations[{ai}].keyword_spans' "
                                  f"entries must be [clause, start, end] integer triples")
            sc, start, end = span
            if sc not in cause_set:
                raise CorpusError(f"invalid clause index in doc '{doc_id}': keyword span clause {sc} "
                                  f"is not a cause clause")
            if not 0 <= start <= end < len(clauses[sc]):
                raise CorpusError(f"invalid token span in doc '{doc_id}': "
                                  f"[{sc}, {start}, {end}] outside clause of length {len(clauses[sc])}")
            spans.append((sc, start, end))
        annotations.append(EmotionAnnotation(
            emotion_word=Token(surface),
            emotion_clause_index=eci,
            emotion_token_index=eti,
            cause_clause_indices=cause_set,
            cause_keyword_spans=tuple(spans),
        ))
    return Document(doc_id=doc_id, clauses=tuple(clauses), annotations=tuple(annotations))


def parse_corpus(source: str | Path | bytes | BinaryIO) -> list[Document]:
    """Parse the line-oriented corpus format into Documents (order preserved).

    ``source`` may be a path, raw bytes, or a binary stream. Blank lines are
    ignored. Errors name the offending line and field, or the doc_id for
    index violations.
    """
    if isinstance(source, (str, Path)):
        stream: BinaryIO = open(source, "rb")
        close = True
    elif isinstance(source, bytes):
        stream = io.BytesIO(source)
        close = True
    else:
        stream = source
        close = False
    docs = []
    try:
        for line_no, raw_line in enumerate(stream, start=1):
            try:
                line = raw_line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorpusError(f"line {line_no}: not valid UTF-8 ({exc})") from exc
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: field '<json>' malformed: {exc.msg}") from exc
            docs.append(_parse_record(record, line_no))
    finally:
        if close:
            stream.close()
    return docs


def document_to_record(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "clauses": [list(c.surfaces) for c in doc.clauses],
        "annotations": [
            {
                "emotion_word": a.emotion_word.surface,
                "emotion_clause": a.emotion_clause_index,
                "emotion_token": a.emotion_token_index,
                "cause_clauses": sorted(a.cause_clause_indices),
                "keyword_spans": [list(s) for s in a.cause_keyword_spans],
            }
            for a in doc.annotations
        ],
    }


def write_corpus(docs: Iterable[Document], dest: str | Path | BinaryIO) -> None:
    """Serialize documents to the canonical line format (round-trips parse_corpus)."""
    if isinstance(dest, (str, Path)):
        stream: BinaryIO = open(dest, "wb")
        close = True
    else:
        stream = dest
        close = False
    try:
        for doc in docs:
            line = json.dumps(document_to_record(doc), ensure_ascii=False, separators=(",", ":"))
            stream.write(line.encode("utf-8"))
            stream.write(b"\n")
    finally:
        if close:
            stream.close()


def build_vocabulary(docs: list[Document], min_count: int = 1) -> Vocabulary:
    """Id map over all clause tokens with corpus frequency >= min_count.

    Ids follow first occurrence order, after the reserved OOV id 0. Emotion
    words are always included regardless of frequency. Rarer tokens map to
    the OOV id, which gets its own trainable embedding downstream.
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    if not docs:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    for doc in docs:
        for clause in doc.clauses:
            counts.update(clause.surfaces)
    surfaces = [Vocabulary.OOV_SURFACE]
    seen = {Vocabulary.OOV_SURFACE}
    for doc in docs:
        for clause in doc.clauses:
            for s in clause.surfaces:
                if s == Vocabulary.OOV_SURFACE:
                    raise CorpusError(f"doc '{doc.doc_id}' uses the reserved token "
                                      f"{Vocabulary.OOV_SURFACE!r}")
                if s not in seen and counts[s] >= min_count:
                    surfaces.append(s)
                    seen.add(s)
    for doc in docs:
        for ann in doc.annotations:
            s = ann.emotion_word.surface
            if s not in seen:
                surfaces.append(s)
                seen.add(s)
    return Vocabulary(surfaces, oov_id=0)


def encode_documents(docs: list[Document], vocab: Vocabulary) -> list[Document]:
    """Return copies of the documents with token ids filled in from vocab."""
    encoded = []
    for doc in docs:
        clauses = tuple(
            Clause(tokens=tuple(Token(t.surface, vocab.id_for(t.surface)) for t in c.tokens),
                   index_in_document=c.index_in_document)
            for c in doc.clauses)
        anns = tuple(
            EmotionAnnotation(
                emotion_word=Token(a.emotion_word.surface, vocab.id_for(a.emotion_word.surface)),
                emotion_clause_index=a.emotion_clause_index,
                emotion_token_index=a.emotion_token_index,
                cause_clause_indices=a.cause_clause_indices,
                cause_keyword_spans=a.cause_keyword_spans,
            )
            for a in doc.annotations)
        encoded.append(Document(doc_id=doc.doc_id, clauses=clauses, annotations=anns))
    return encoded


def instances_for_annotation(doc: Document, annotation_index: int) -> list[Instance]:
    """One instance per clause for a single annotation of an encoded document."""
    ann = doc.annotations[annotation_index]
    if ann.emotion_word.id is None:
        raise CorpusError(f"doc '{doc.doc_id}' is not encoded; call encode_documents first")
    out = []
    for clause in doc.clauses:
        ci = clause.index_in_document
        out.append(Instance(
            doc_id=doc.doc_id,
            clause_index=ci,
            token_ids=clause.token_ids,
            emotion_word_id=ann.emotion_word.id,
            distance=ci - ann.emotion_clause_index,
            label=ci in ann.cause_clause_indices,
            annotation_index=annotation_index,
        ))
    return out


def build_instances(doc: Document) -> list[Instance]:
    """All (annotation, clause) instances of an encoded document.

    Yields exactly len(annotations) * len(clauses) instances; the distance
    feature is the signed clause offset from the annotation's emotion clause.
    """
    out = []
    for ai in range(len(doc.annotations)):
        out.extend(instances_for_annotation(doc, ai))
    return out


def token_sequences(docs: list[Document]) -> list[list[int]]:
    """Clause token-id sequences of encoded documents (skip-gram input)."""
    return [list(clause.token_ids) for doc in docs for clause in doc.clauses]


def split_documents(docs: list[Document], train_fraction: float,
                    seed: int) -> tuple[list[Document], list[Document]]:
    """Seeded document-level split; round-half-up train size, both sides non-empty."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if len(docs) < 2:
        raise ValueError(f"need at least 2 documents to split, got {len(docs)}")
    n = len(docs)
    n_train = int(math.floor(train_fraction * n + 0.5))
    if not 0 < n_train < n:
        raise ValueError(f"split of {n} documents at fraction {train_fraction} "
                         f"leaves an empty side")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    train_idx = sorted(perm[:n_train].tolist())
    test_idx = sorted(perm[n_train:].tolist())
    return [docs[i] for i in train_idx], [docs[i] for i in test_idx]
