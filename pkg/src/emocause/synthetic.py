"""Synthetic trigger-token corpus for overfit and end-to-end checks.

Every document has one annotation whose cause clause contains a unique
trigger token; all other clauses hold filler tokens only. Cause and
emotion positions are drawn independently, so the distance feature carries
no signal and a model can only solve the corpus by attending to the
trigger. The construction is linearly separable in attention space.
"""

from __future__ import annotations

import numpy as np

from .corpus import Clause, Document, EmotionAnnotation, Token

TRIGGER = "trigger"
EMOTION = "sadness"


def make_trigger_corpus(n_docs: int = 20, seed: int = 0, n_fillers: int = 12,
                        min_clauses: int = 3, max_clauses: int = 5,
                        min_tokens: int = 3, max_tokens: int = 6) -> list[Document]:
    rng = np.random.default_rng(seed)
    fillers = [f"filler{i}" for i in range(n_fillers)]
    docs = []
    for n in range(n_docs):
        n_clauses = int(rng.integers(min_clauses, max_clauses + 1))
        cause = int(rng.integers(0, n_clauses))
        emotion_clause = int(rng.integers(0, n_clauses))
        clauses = []
        for ci in range(n_clauses):
            length = int(rng.integers(min_tokens, max_tokens + 1))
            surfaces = [fillers[int(rng.integers(0, n_fillers))] for _ in range(length)]
            if ci == cause:
                surfaces[int(rng.integers(0, length))] = TRIGGER
            clauses.append(surfaces)
        emo_pos = int(rng.integers(0, len(clauses[emotion_clause]) + 1))
        clauses[emotion_clause].insert(emo_pos, EMOTION)
        trig_pos = clauses[cause].index(TRIGGER)
        docs.append(Document(
            doc_id=f"syn{n:03d}",
            clauses=tuple(Clause(tuple(Token(s) for s in surfaces), ci)
                          for ci, surfaces in enumerate(clauses)),
            annotations=(EmotionAnnotation(
                emotion_word=Token(EMOTION),
                emotion_clause_index=emotion_clause,
                emotion_token_index=emo_pos,
                cause_clause_indices=frozenset({cause}),
                cause_keyword_spans=((cause, trig_pos, trig_pos),),
            ),),
        ))
    return docs
