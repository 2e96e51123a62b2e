import json

import numpy as np
import pytest

from emocause.corpus import (Clause, Document, EmotionAnnotation, Token, Vocabulary,
                             build_vocabulary, encode_documents, parse_corpus)


def record(doc_id="d0", clauses=None, annotations=None) -> dict:
    if clauses is None:
        clauses = [["i", "lost", "my", "phone", "yesterday"], ["i", "feel", "sad", "now"]]
    if annotations is None:
        annotations = [{"emotion_word": "sad", "emotion_clause": 1, "emotion_token": 2,
                        "cause_clauses": [0], "keyword_spans": [[0, 1, 3]]}]
    return {"doc_id": doc_id, "clauses": clauses, "annotations": annotations}


def corpus_bytes(*records) -> bytes:
    return b"".join(json.dumps(r, ensure_ascii=False).encode("utf-8") + b"\n" for r in records)


def make_doc(doc_id="d0", clauses=None, annotations=None) -> Document:
    return parse_corpus(corpus_bytes(record(doc_id, clauses, annotations)))[0]


def encoded_doc(doc_id="d0", clauses=None, annotations=None, min_count=1):
    doc = make_doc(doc_id, clauses, annotations)
    vocab = build_vocabulary([doc], min_count)
    return encode_documents([doc], vocab)[0], vocab


@pytest.fixture
def two_clause_doc():
    doc, _ = encoded_doc()
    return doc


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
