"""Scoring and experiment protocol: per-document argmax prediction,
clause- and keyword-level precision/recall/F, repeated seeded splits,
hop sweeps, and attention / epoch-probability exports.

A proposed cause is correct when the chosen clause index is one of the
annotation's gold cause clauses; precision divides by proposals (one per
annotation) and recall by the total number of annotated causes. The
keyword metric scores the highest-attention word of correctly identified
clauses against the gold keyword spans.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .corpus import (Clause, Document, Vocabulary, build_instances, build_vocabulary,
                     encode_documents, instances_for_annotation, split_documents,
                     token_sequences)
from .embeddings import EmbeddingMatrix, SkipgramConfig, load_embeddings, random_init, train_skipgram
from .memnet import AttentionTrace
from .training import TrainConfig, TrainHistory, bce_loss, forward, train


@dataclass
class PredictionResult:
    doc_id: str
    annotation_index: int
    clause_probabilities: list[float]
    chosen_clause: int
    keyword_token: int | None = None


@dataclass
class MetricsReport:
    """P/R/F at one level; aggregated reports carry per-run values and stds."""

    level: str  # "clause" | "keyword"
    precision: float
    recall: float
    f_measure: float
    run_count: int = 1
    per_run: list[tuple[float, float, float]] = field(default_factory=list)
    precision_std: float = 0.0
    recall_std: float = 0.0
    f_std: float = 0.0

    @staticmethod
    def f_of(precision: float, recall: float) -> float:
        if precision + recall <= 0.0:
            return 0.0
        return 2.0 * precision * recall / (precision + recall)

    @classmethod
    def single(cls, level: str, correct: int, proposed: int, annotated: int) -> "MetricsReport":
        p = correct / proposed if proposed else 0.0
        r = correct / annotated if annotated else 0.0
        report = cls(level=level, precision=p, recall=r, f_measure=cls.f_of(p, r))
        report.per_run = [(report.precision, report.recall, report.f_measure)]
        return report

    @classmethod
    def aggregate(cls, level: str, reports: Sequence["MetricsReport"]) -> "MetricsReport":
        per_run = [(r.precision, r.recall, r.f_measure) for r in reports]
        arr = np.asarray(per_run)
        means = arr.mean(axis=0)
        stds = arr.std(axis=0, ddof=1) if len(reports) > 1 else np.zeros(3)
        return cls(level=level, precision=float(means[0]), recall=float(means[1]),
                   f_measure=float(means[2]), run_count=len(reports), per_run=per_run,
                   precision_std=float(stds[0]), recall_std=float(stds[1]),
                   f_std=float(stds[2]))

    def format_line(self) -> str:
        line = (f"{self.level:<8} P {self.precision:.4f}  R {self.recall:.4f}  "
                f"F {self.f_measure:.4f}")
        if self.run_count > 1:
            line += (f"  (runs {self.run_count}, std P {self.precision_std:.4f} "
                     f"R {self.recall_std:.4f} F {self.f_std:.4f})")
        return line


def predict_document(params, doc: Document, annotation_index: int) -> PredictionResult:
    """Forward every clause for one annotation; argmax picks the cause.

    Ties break to the lowest clause index. The keyword is the token at the
    final-hop attention argmax of the chosen clause.
    """
    instances = instances_for_annotation(doc, annotation_index)
    probs = []
    traces = []
    for inst in instances:
        p, trace = forward(inst, params)
        probs.append(p)
        traces.append(trace)
    chosen = int(np.argmax(probs))
    keyword = extract_keyword(traces[chosen], doc.clauses[chosen])
    return PredictionResult(doc_id=doc.doc_id, annotation_index=annotation_index,
                            clause_probabilities=probs, chosen_clause=chosen,
                            keyword_token=keyword)


def predict_corpus(params, docs: list[Document]) -> list[PredictionResult]:
    return [predict_document(params, doc, ai)
            for doc in docs for ai in range(len(doc.annotations))]


def extract_keyword(trace: AttentionTrace, clause: Clause | None = None) -> int:
    """Token index with the highest final-hop attention (ties -> lowest index).

    For the multi-slot model the attention indexes window positions and the
    keyword is the current-slot word at the winning position, which is the
    token at that index.
    """
    attention = trace.attention[-1]
    if clause is not None and len(clause) != attention.shape[0]:
        raise ValueError(f"clause length {len(clause)} does not match attention "
                         f"length {attention.shape[0]}")
    return int(np.argmax(attention))


def _gold_annotation(docs_by_id: dict[str, Document], pred: PredictionResult):
    doc = docs_by_id.get(pred.doc_id)
    if doc is None:
        raise ValueError(f"prediction references unknown doc '{pred.doc_id}'")
    return doc.annotations[pred.annotation_index]


def clause_prf(predictions: list[PredictionResult], docs: list[Document]) -> MetricsReport:
    """Clause-level metrics: proposal correct iff it is a gold cause clause."""
    docs_by_id = {d.doc_id: d for d in docs}
    correct = 0
    for pred in predictions:
        ann = _gold_annotation(docs_by_id, pred)
        if pred.chosen_clause in ann.cause_clause_indices:
            correct += 1
    annotated = sum(len(ann.cause_clause_indices) for d in docs for ann in d.annotations)
    return MetricsReport.single("clause", correct, len(predictions), annotated)


def keyword_prf(predictions: list[PredictionResult], docs: list[Document]) -> MetricsReport:
    """Keyword-level metrics over correctly identified clauses only.

    A keyword is correct when its token index falls inside a gold span of
    the chosen clause; recall divides by all annotated keyword spans.
    """
    docs_by_id = {d.doc_id: d for d in docs}
    proposed = 0
    correct = 0
    for pred in predictions:
        ann = _gold_annotation(docs_by_id, pred)
        if pred.chosen_clause not in ann.cause_clause_indices:
            continue
        if pred.keyword_token is None:
            continue
        proposed += 1
        for (ci, start, end) in ann.cause_keyword_spans:
            if ci == pred.chosen_clause and start <= pred.keyword_token <= end:
                correct += 1
                break
    annotated = sum(len(ann.cause_keyword_spans) for d in docs for ann in d.annotations)
    return MetricsReport.single("keyword", correct, proposed, annotated)


@dataclass
class ProtocolConfig:
    """One repeated-split experiment: split, embeddings, then training."""

    train: TrainConfig = field(default_factory=TrainConfig)
    train_fraction: float = 0.9
    min_count: int = 1
    embedding_init: str = "random"  # random | skipgram | file
    embeddings_path: str | None = None
    embedding_scale: float = 0.1
    skipgram: SkipgramConfig | None = None

    def validate(self) -> None:
        self.train.validate()
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.embedding_init not in ("random", "skipgram", "file"):
            raise ValueError(f"unknown embedding_init {self.embedding_init!r}")
        if self.embedding_init == "file" and not self.embeddings_path:
            raise ValueError("embedding_init 'file' requires embeddings_path")


@dataclass
class ProtocolResult:
    clause: MetricsReport
    keyword: MetricsReport
    runs: int
    master_seed: int
    run_seeds: list[int]


def build_run_embedding(config: ProtocolConfig, vocab: Vocabulary,
                        train_docs: list[Document], seed: int) -> EmbeddingMatrix:
    dim = config.train.dim
    if config.embedding_init == "random":
        return random_init(vocab, dim, seed=seed, scale=config.embedding_scale)
    if config.embedding_init == "skipgram":
        sg = config.skipgram or SkipgramConfig(dim=dim)
        sg = replace(sg, dim=dim, seed=seed)
        return train_skipgram(token_sequences(train_docs), vocab, sg)
    return load_embeddings(config.embeddings_path, vocab, dim, seed=seed,
                           scale=config.embedding_scale)


def run_single_split(docs: list[Document], config: ProtocolConfig,
                     seed: int) -> tuple[MetricsReport, MetricsReport]:
    """One seeded 90/10-style run: split, embed, train, score the test side."""
    train_docs, test_docs = split_documents(docs, config.train_fraction, seed)
    vocab = build_vocabulary(train_docs, config.min_count)
    train_enc = encode_documents(train_docs, vocab)
    test_enc = encode_documents(test_docs, vocab)
    embedding = build_run_embedding(config, vocab, train_enc, seed)
    instances = [inst for doc in train_enc for inst in build_instances(doc)]
    run_cfg = replace(config.train, seed=seed)
    params, _ = train(instances, run_cfg, embedding)
    predictions = predict_corpus(params, test_enc)
    return clause_prf(predictions, test_enc), keyword_prf(predictions, test_enc)


def _protocol_worker(args) -> tuple[int, MetricsReport, MetricsReport]:
    run_index, docs, config, seed = args
    clause, keyword = run_single_split(docs, config, seed)
    return run_index, clause, keyword


def run_protocol(docs: list[Document], config: ProtocolConfig, runs: int = 25,
                 master_seed: int = 0, jobs: int = 1) -> ProtocolResult:
    """Repeat the split/train/evaluate cycle with derived seeds and aggregate.

    Run r uses seed master_seed + r. Results are ordered by run index, so
    the report is identical for any job count.
    """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    config.validate()
    seeds = [master_seed + r for r in range(runs)]
    tasks = [(r, docs, config, seeds[r]) for r in range(runs)]
    results: list[tuple[MetricsReport, MetricsReport] | None] = [None] * runs
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            for run_index, clause, keyword in pool.map(_protocol_worker, tasks):
                results[run_index] = (clause, keyword)
    else:
        for task in tasks:
            run_index, clause, keyword = _protocol_worker(task)
            results[run_index] = (clause, keyword)
    clause_reports = [r[0] for r in results]  # type: ignore[index]
    keyword_reports = [r[1] for r in results]  # type: ignore[index]
    return ProtocolResult(
        clause=MetricsReport.aggregate("clause", clause_reports),
        keyword=MetricsReport.aggregate("keyword", keyword_reports),
        runs=runs, master_seed=master_seed, run_seeds=seeds)


def sweep_hops(docs: list[Document], config: ProtocolConfig, hop_range: range,
               runs: int = 25, master_seed: int = 0, jobs: int = 1) -> list[tuple[int, ProtocolResult]]:
    """Repeat the whole protocol for each hop count (Table-style sweep)."""
    out = []
    for hops in hop_range:
        cfg = replace(config, train=replace(config.train, hops=hops))
        out.append((hops, run_protocol(docs, cfg, runs=runs, master_seed=master_seed, jobs=jobs)))
    return out


@dataclass
class AttentionTable:
    """Positions x hops attention weights with the window words per row."""

    model_kind: str
    words: list[tuple[str, str, str]]  # (previous, current, following); "" = padding
    weights: np.ndarray  # (k, hops)

    def column_sums(self) -> np.ndarray:
        return self.weights.sum(axis=0)

    def to_tsv(self) -> str:
        hops = self.weights.shape[1]
        header = ["previous", "current", "following"] + [f"hop{h + 1}" for h in range(hops)]
        lines = ["\t".join(header)]
        for row, (wp, wc, wf) in enumerate(self.words):
            cells = [wp, wc, wf] + [f"{w:.4f}" for w in self.weights[row]]
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"


def parse_attention_table(text: str) -> AttentionTable:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split("\t")
    hops = len(header) - 3
    words = []
    rows = []
    for ln in lines[1:]:
        cells = ln.split("\t")
        words.append((cells[0], cells[1], cells[2]))
        rows.append([float(c) for c in cells[3:]])
    return AttentionTable(model_kind="unknown", words=words,
                          weights=np.asarray(rows, dtype=np.float64))


def dump_attention(params, instance) -> AttentionTable:
    """Tabulate per-hop attention for one instance, one row per position.

    The basic model attends to words directly, so the previous/following
    columns repeat the neighbors for readability; the multi-slot model's
    rows are genuine windows with "" at the padded edges.
    """
    _, trace = forward(instance, params)
    vocab = params.embedding.vocab
    surfaces = [vocab.surface_for(t) for t in instance.token_ids]
    k = len(surfaces)
    words = []
    for i in range(k):
        prev_w = surfaces[i - 1] if i > 0 else ""
        foll_w = surfaces[i + 1] if i < k - 1 else ""
        words.append((prev_w, surfaces[i], foll_w))
    return AttentionTable(model_kind=params.kind, words=words,
                          weights=np.ascontiguousarray(trace.attention.T))


def epoch_probability_trace(history: TrainHistory,
                            checkpoints: Sequence[int] = (5, 10, 15, 20)) -> list:
    """Watched-document probabilities at checkpoint epochs.

    Returns WatchRecords filtered to the requested epochs, ordered by
    (epoch, doc, annotation, clause): one row per clause per checkpoint.
    """
    wanted = set(checkpoints)
    rows = [w for w in history.watched if w.epoch in wanted]
    rows.sort(key=lambda w: (w.epoch, w.doc_id, w.annotation_index, w.clause_index))
    return rows


def instance_accuracy(params, instances) -> float:
    """Fraction of instances whose thresholded probability matches the label."""
    if not instances:
        raise ValueError("no instances to score")
    hits = 0
    for inst in instances:
        p, _ = forward(inst, params)
        if (p > 0.5) == bool(inst.label):
            hits += 1
    return hits / len(instances)


def mean_loss(params, instances) -> float:
    if not instances:
        raise ValueError("no instances to score")
    return sum(bce_loss(forward(inst, params)[0], inst.label) for inst in instances) / len(instances)
