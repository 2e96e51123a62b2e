"""Command-line front-end: pretrain, train, eval, protocol, gradcheck,
attention, trace.

Every command is deterministic given its flags: all randomness flows from
--seed, and repeated-run seeds are derived as seed + run_index. ``train``
and ``protocol`` write a JSON manifest (resolved config, seed, input
digests, artifact paths, tool version) before any training output.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import (build_instances, build_vocabulary, encode_documents, parse_corpus,
                     token_sequences)
from .embeddings import (EmbeddingMatrix, SkipgramConfig, load_embeddings, random_init,
                         save_embeddings_text, train_skipgram)
from .evaluate import (ProtocolConfig, clause_prf, dump_attention, epoch_probability_trace,
                       keyword_prf, predict_corpus, predict_document, run_protocol,
                       sweep_hops)
from .model_io import load_model, save_model
from .synthetic import make_trigger_corpus
from .training import TrainConfig, TrainHistory, gradient_check, train


class CliError(Exception):
    pass


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return n


def _fraction(value: str) -> float:
    x = float(value)
    if not 0.0 < x < 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {value}")
    return x


def _rate(value: str) -> float:
    x = float(value)
    if not 0.0 <= x < 1.0:
        raise argparse.ArgumentTypeError(f"must be in [0, 1), got {value}")
    return x


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _int_list(value: str) -> list[int]:
    return [int(v) for v in value.split(",") if v.strip()]


def _load_corpus(path: str):
    if not Path(path).exists():
        raise CliError(f"corpus file not found: {path}")
    return parse_corpus(path)


def _write_manifest(path: Path, command: str, config: dict, seed: int,
                    inputs: dict[str, str], artifacts: dict[str, str]) -> None:
    manifest = {
        "tool_version": __version__,
        "command": command,
        "config": config,
        "master_seed": seed,
        "inputs": {name: _sha256(p) for name, p in inputs.items()},
        "artifacts": artifacts,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_pretrain(args) -> int:
    docs = _load_corpus(args.corpus)
    vocab = build_vocabulary(docs, args.min_count)
    encoded = encode_documents(docs, vocab)
    config = SkipgramConfig(dim=args.dim, window=args.window, negatives=args.negatives,
                            epochs=args.epochs, learning_rate=args.lr, seed=args.seed)
    matrix = train_skipgram(token_sequences(encoded), vocab, config)
    save_embeddings_text(matrix, args.out)
    print(f"wrote {vocab.size} vectors of dimension {args.dim} to {args.out}")
    return 0


def _train_config_from_args(args) -> TrainConfig:
    base = TrainConfig()
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            base = TrainConfig.from_dict(json.load(fh))
    overrides = {}
    for name, attr in (("model_kind", "model"), ("hops", "hops"), ("dim", "dim"),
                       ("dropout", "dropout"), ("epochs", "epochs"),
                       ("learning_rate", "lr"), ("seed", "seed")):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "freeze_embeddings", False):
        overrides["freeze_embeddings"] = True
    if getattr(args, "no_bias", False):
        overrides["use_bias"] = False
    if getattr(args, "positive_weight", None) is not None:
        overrides["positive_weight"] = args.positive_weight
    config = replace(base, **overrides)
    config.validate()
    return config


def _build_embedding(args, config: TrainConfig, vocab, train_docs) -> EmbeddingMatrix:
    if args.init == "file":
        if not args.embeddings_file:
            raise CliError("--init file requires --embeddings-file")
        return load_embeddings(args.embeddings_file, vocab, config.dim, seed=config.seed)
    if args.init == "skipgram":
        sg = SkipgramConfig(dim=config.dim, seed=config.seed)
        return train_skipgram(token_sequences(train_docs), vocab, sg)
    return random_init(vocab, config.dim, seed=config.seed)


def cmd_train(args) -> int:
    config = _train_config_from_args(args)
    docs = _load_corpus(args.corpus)
    out = Path(args.out)
    history_path = Path(args.history) if args.history else out.with_suffix(out.suffix + ".history.jsonl")
    manifest_path = Path(args.manifest) if args.manifest else out.with_suffix(out.suffix + ".manifest.json")
    inputs = {"corpus": args.corpus}
    if args.init == "file" and args.embeddings_file:
        inputs["embeddings"] = args.embeddings_file
    _write_manifest(manifest_path, "train", {**config.to_dict(), "init": args.init,
                                             "min_count": args.min_count},
                    config.seed, inputs,
                    {"model": str(out), "history": str(history_path)})

    vocab = build_vocabulary(docs, args.min_count)
    encoded = encode_documents(docs, vocab)
    embedding = _build_embedding(args, config, vocab, encoded)
    instances = [inst for doc in encoded for inst in build_instances(doc)]

    watch_ids = set(args.watch or [])
    unknown = watch_ids - {d.doc_id for d in encoded}
    if unknown:
        raise CliError(f"--watch doc ids not in corpus: {sorted(unknown)}")
    watch_instances = [inst for doc in encoded if doc.doc_id in watch_ids
                       for inst in build_instances(doc)]

    hook = None
    if args.checkpoint_every:
        every = args.checkpoint_every

        def hook(epoch: int, params) -> None:
            if epoch % every == 0:
                save_model(params, out.with_suffix(out.suffix + f".ep{epoch}.ckpt"))

    params, history = train(instances, config, embedding,
                            watch_instances=watch_instances, checkpoint_hook=hook)
    save_model(params, out)
    history.to_jsonl(history_path)
    if not args.quiet:
        for epoch, loss in enumerate(history.epoch_losses, start=1):
            print(f"epoch {epoch:>3}  mean_loss {loss:.4f}")
    print(f"wrote model to {out}")
    return 0


def cmd_eval(args) -> int:
    if not Path(args.model).exists():
        raise CliError(f"model file not found: {args.model}")
    params = load_model(args.model)
    docs = _load_corpus(args.corpus)
    encoded = encode_documents(docs, params.embedding.vocab)
    predictions = predict_corpus(params, encoded)
    clause = clause_prf(predictions, encoded)
    keyword = keyword_prf(predictions, encoded)
    print(clause.format_line())
    print(keyword.format_line())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for report in (clause, keyword):
                fh.write(json.dumps({
                    "level": report.level, "precision": report.precision,
                    "recall": report.recall, "f_measure": report.f_measure,
                }) + "\n")
    return 0


def cmd_protocol(args) -> int:
    config = ProtocolConfig(
        train=_train_config_from_args(args),
        train_fraction=args.train_fraction,
        min_count=args.min_count,
        embedding_init=args.init,
        embeddings_path=args.embeddings_file,
    )
    config.validate()
    docs = _load_corpus(args.corpus)
    if args.manifest:
        _write_manifest(Path(args.manifest), "protocol",
                        {**config.train.to_dict(), "init": args.init, "runs": args.runs,
                         "train_fraction": args.train_fraction, "min_count": args.min_count},
                        args.seed, {"corpus": args.corpus}, {})

    def print_result(result, label: str = "") -> None:
        prefix = f"{label}\t" if label else ""
        for r, (cp, cr, cf) in enumerate(result.clause.per_run):
            kp, kr, kf = result.keyword.per_run[r]
            print(f"{prefix}run {r}\tseed {result.run_seeds[r]}\t"
                  f"clause {cp:.4f} {cr:.4f} {cf:.4f}\tkeyword {kp:.4f} {kr:.4f} {kf:.4f}")
        print(f"{prefix}mean\t{result.clause.format_line()}")
        print(f"{prefix}mean\t{result.keyword.format_line()}")

    if args.sweep_hops:
        lo, _, hi = args.sweep_hops.partition(":")
        hop_range = range(int(lo), int(hi) + 1)
        rows = sweep_hops(docs, config, hop_range, runs=args.runs,
                          master_seed=args.seed, jobs=args.jobs)
        for hops, result in rows:
            print(f"hops {hops}\tclause P {result.clause.precision:.4f} "
                  f"R {result.clause.recall:.4f} F {result.clause.f_measure:.4f}")
    else:
        result = run_protocol(docs, config, runs=args.runs, master_seed=args.seed,
                              jobs=args.jobs)
        print_result(result)
    return 0


def cmd_gradcheck(args) -> int:
    from .corpus import Instance, Vocabulary
    from .training import new_params

    rng = np.random.default_rng(args.seed)
    failures = 0
    kinds = ("basic", "convms") if args.model == "both" else (args.model,)
    for kind in kinds:
        for hops in args.hops:
            for dim in args.dims:
                for k in args.lengths:
                    for trial in range(args.instances):
                        vocab_size = k + 3
                        vocab = Vocabulary([f"w{i}" for i in range(vocab_size)], oov_id=0)
                        values = rng.uniform(-0.5, 0.5, size=(dim, vocab_size))
                        emb = EmbeddingMatrix(values, dim, vocab)
                        head_len = (dim + 1) if kind == "basic" else (3 * dim + 1)
                        params = new_params(kind, emb, hops)
                        params.head_weights = rng.uniform(-0.5, 0.5, size=head_len)
                        params.bias = float(rng.uniform(-0.5, 0.5))
                        inst = Instance(
                            doc_id="gradcheck", clause_index=0,
                            token_ids=tuple(int(t) for t in rng.integers(1, vocab_size, size=k)),
                            emotion_word_id=int(rng.integers(1, vocab_size)),
                            distance=int(rng.integers(-3, 4)),
                            label=bool(rng.integers(0, 2)))
                        report = gradient_check(kind, inst, params, eps=args.eps,
                                                tolerance=args.tolerance,
                                                inject_fault=args.inject_fault)
                        status = "ok" if report.passed else "FAIL"
                        worst = max(report.block_errors.values())
                        print(f"{kind:<7} hops={hops} d={dim:<3} k={k} trial={trial}  "
                              f"max_rel_err={worst:.3e}  {status}")
                        if not report.passed:
                            failures += 1
                            for line in report.lines():
                                print(f"    {line}")
    print(f"gradcheck: {'PASS' if failures == 0 else f'{failures} FAILURES'} "
          f"(tolerance {args.tolerance:g}, eps {args.eps:g})")
    return 0 if failures == 0 else 1


def cmd_attention(args) -> int:
    params = load_model(args.model)
    docs = _load_corpus(args.corpus)
    encoded = encode_documents(docs, params.embedding.vocab)
    by_id = {d.doc_id: d for d in encoded}
    if args.doc not in by_id:
        raise CliError(f"doc id not found in corpus: {args.doc}")
    doc = by_id[args.doc]
    if not 0 <= args.annotation < len(doc.annotations):
        raise CliError(f"doc '{args.doc}' has no annotation {args.annotation}")
    from .corpus import instances_for_annotation
    instances = instances_for_annotation(doc, args.annotation)
    if args.clause is None:
        chosen = predict_document(params, doc, args.annotation).chosen_clause
    else:
        if not 0 <= args.clause < len(doc.clauses):
            raise CliError(f"doc '{args.doc}' has no clause {args.clause}")
        chosen = args.clause
    table = dump_attention(params, instances[chosen])
    sys.stdout.write(table.to_tsv())
    return 0


def cmd_trace(args) -> int:
    if not Path(args.history).exists():
        raise CliError(f"history file not found: {args.history}")
    history = TrainHistory.from_jsonl(args.history)
    rows = epoch_probability_trace(history, checkpoints=args.checkpoints)
    rows = [w for w in rows if w.doc_id == args.doc]
    if not rows:
        raise CliError(f"doc id '{args.doc}' has no watched records in {args.history}")
    print("doc_id\tannotation\tclause\tepoch\tprobability")
    for w in rows:
        print(f"{w.doc_id}\t{w.annotation_index}\t{w.clause_index}\t{w.epoch}\t{w.probability:.4f}")
    return 0


def cmd_synth(args) -> int:
    from .corpus import write_corpus
    docs = make_trigger_corpus(n_docs=args.docs, seed=args.seed)
    write_corpus(docs, args.out)
    print(f"wrote {len(docs)} synthetic documents to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emocause",
                                     description="Memory-network emotion cause extraction")
    parser.add_argument("--version", action="version", version=f"emocause {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="train skip-gram word vectors on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=_positive_int, default=20)
    p.add_argument("--window", type=_positive_int, default=2)
    p.add_argument("--negatives", type=_positive_int, default=5)
    p.add_argument("--epochs", type=_positive_int, default=5)
    p.add_argument("--lr", type=float, default=0.025)
    p.add_argument("--min-count", type=_positive_int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="train a model on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", choices=("basic", "convms"), default=None)
    p.add_argument("--hops", type=_positive_int, default=None)
    p.add_argument("--dim", type=_positive_int, default=None)
    p.add_argument("--dropout", type=_rate, default=None)
    p.add_argument("--epochs", type=_positive_int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", help="JSON config file; explicit flags override it")
    p.add_argument("--init", choices=("random", "skipgram", "file"), default="random")
    p.add_argument("--embeddings-file")
    p.add_argument("--min-count", type=_positive_int, default=1)
    p.add_argument("--freeze-embeddings", action="store_true")
    p.add_argument("--no-bias", action="store_true")
    p.add_argument("--positive-weight", type=float, default=None)
    p.add_argument("--history")
    p.add_argument("--manifest")
    p.add_argument("--checkpoint-every", type=_positive_int, default=None)
    p.add_argument("--watch", action="append", metavar="DOC_ID")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model on a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("protocol", help="repeated seeded split/train/evaluate runs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--runs", type=_positive_int, default=25)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--model", choices=("basic", "convms"), default=None)
    p.add_argument("--hops", type=_positive_int, default=None)
    p.add_argument("--dim", type=_positive_int, default=None)
    p.add_argument("--dropout", type=_rate, default=None)
    p.add_argument("--epochs", type=_positive_int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.add_argument("--init", choices=("random", "skipgram", "file"), default="random")
    p.add_argument("--embeddings-file")
    p.add_argument("--min-count", type=_positive_int, default=1)
    p.add_argument("--train-fraction", type=_fraction, default=0.9)
    p.add_argument("--sweep-hops", metavar="LO:HI")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("gradcheck", help="compare analytic gradients to finite differences")
    p.add_argument("--model", choices=("basic", "convms", "both"), default="both")
    p.add_argument("--hops", type=_int_list, default=[1, 2, 3])
    p.add_argument("--dims", type=_int_list, default=[4, 20])
    p.add_argument("--lengths", type=_int_list, default=[1, 2, 5])
    p.add_argument("--instances", type=_positive_int, default=3)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", action="store_true")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("attention", help="dump per-hop attention for one document")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--doc", required=True)
    p.add_argument("--annotation", type=int, default=0)
    p.add_argument("--clause", type=int, default=None,
                   help="clause index (default: the model's chosen cause clause)")
    p.set_defaults(func=cmd_attention)

    p = sub.add_parser("trace", help="epoch probability trace of a watched document")
    p.add_argument("--history", required=True)
    p.add_argument("--doc", required=True)
    p.add_argument("--checkpoints", type=_int_list, default=[5, 10, 15, 20])
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("synth", help="write a synthetic trigger-token corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--docs", type=_positive_int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, FloatingPointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
