"""Command-line entry point: ``treener {train,eval,analyze,synth}``.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
Set ``TREENER_LOG_LEVEL`` (e.g. ``DEBUG``) for per-epoch logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import analysis
from .checkpoint import load_model, save_model
from .config import TrainConfig
from .corpus import build_vocab, format_conll, parse_conll, write_conll
from .errors import NumericError, TreeNerError, VocabError
from .io_utils import atomic_write_text, sha256_file
from .synthetic import make_corpus
from .train import evaluate, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

# flag -> config field switched off
ABLATIONS = {
    "no_tree": "use_tree",
    "no_blstm": "use_blstm",
    "no_relative": "use_relative",
    "no_global": "use_global",
    "no_residual": "residual",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="treener", description="Dependency-tree NER tagger.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    tr = sub.add_parser("train", help="train a model and write checkpoint, history and run manifest")
    tr.add_argument("--config", help="JSON config file (kebab-case keys)")
    tr.add_argument("--train", required=True, help="training corpus (tab-separated, 6 columns)")
    tr.add_argument("--dev", help="dev corpus used for model selection")
    tr.add_argument("--out", required=True, help="output directory")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--batch", type=int)
    for flag in ABLATIONS:
        tr.add_argument("--" + flag.replace("_", "-"), dest=flag, action="store_true")

    ev = sub.add_parser("eval", help="score a checkpoint on a corpus")
    ev.add_argument("--checkpoint", required=True, help="checkpoint base path or run directory")
    ev.add_argument("--test", required=True)
    ev.add_argument("--out", help="prediction TSV path (default: next to the checkpoint)")

    an = sub.add_parser("analyze", help="attention exports, hop distances or entity correlations")
    an.add_argument("which", choices=["attention", "hops", "correlations"])
    an.add_argument("--checkpoint", required=True)
    an.add_argument("--test", required=True)
    an.add_argument("--out", help="output file (default: stdout)")
    an.add_argument("--top-k", type=int, default=3)

    sy = sub.add_parser("synth", help="write a synthetic corpus")
    sy.add_argument("--kind", choices=["templated", "syntax"], default="templated")
    sy.add_argument("--n", type=int, default=50)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--out", required=True)
    return parser


def resolve_config(args) -> TrainConfig:
    """Defaults, then the config file, then explicit flags."""
    config = TrainConfig.load(args.config) if args.config else TrainConfig()
    changes = {k: getattr(args, k) for k in ("seed", "epochs", "lr", "batch") if getattr(args, k) is not None}
    changes.update({field: False for flag, field in ABLATIONS.items() if getattr(args, flag)})
    return config.replace(**changes) if changes else config


def _checkpoint_base(path) -> Path:
    path = Path(path)
    return path / "model" if path.is_dir() else path


def cmd_train(args) -> int:
    started = time.perf_counter()
    config = resolve_config(args)
    train_corpus = parse_conll(args.train)
    dev_corpus = parse_conll(args.dev) if args.dev else []
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    model, history = train(config, train_corpus, dev_corpus, build_vocab(train_corpus + dev_corpus))
    save_model(out / "model", model)
    atomic_write_text(out / "history.jsonl", "".join(json.dumps(r, sort_keys=True) + "\n" for r in history))
    corpora = {"train": {"path": str(args.train), "sha256": sha256_file(args.train)}}
    if args.dev:
        corpora["dev"] = {"path": str(args.dev), "sha256": sha256_file(args.dev)}
    manifest = {
        "command": "train",
        "config": config.to_dict(),
        "corpora": corpora,
        "seed": config.seed,
        "outputs": {"checkpoint": str(out / "model.json"), "weights": str(out / "model.bin"),
                    "history": str(out / "history.jsonl")},
        "best-dev-f1": max((r["dev-f1"] for r in history), default=None),
        "duration-seconds": round(time.perf_counter() - started, 3),
    }
    atomic_write_text(out / "run.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"epochs": len(history), "best-dev-f1": manifest["best-dev-f1"], "out": str(out)}))
    return EXIT_OK


def _check_labels(model, corpus) -> None:
    unknown = sorted({lab for s in corpus for lab in s.labels} - set(model.vocab.labels))
    if unknown:
        raise VocabError(f"labels not in the checkpoint's label set: {', '.join(unknown)}")


def cmd_eval(args) -> int:
    base = _checkpoint_base(args.checkpoint)
    model = load_model(base)
    corpus = parse_conll(args.test)
    _check_labels(model, corpus)
    report, preds = evaluate(model, corpus)
    out = Path(args.out) if args.out else base.parent / "predictions.tsv"
    write_conll(out, corpus, preds)
    print(json.dumps(report.to_dict(), sort_keys=True))
    return EXIT_OK


def _emit(text: str, out) -> None:
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def cmd_analyze(args) -> int:
    model = load_model(_checkpoint_base(args.checkpoint))
    corpus = parse_conll(args.test)
    _check_labels(model, corpus)
    results = [model.predict_with_attention(s) for s in corpus]
    if args.which == "attention":
        lines = [analysis.dumps_attention(analysis.export_attention(s, rec.A, rec.a, pred)) + "\n"
                 for s, (pred, rec) in zip(corpus, results)]
        _emit("".join(lines), args.out)
    elif args.which == "hops":
        per_sentence = [analysis.hop_distance(s, rec.most_attended) for s, (_, rec) in zip(corpus, results)]
        payload = {
            "records": [{"sid": s.sid, **vars(r)} for s, rs in zip(corpus, per_sentence) for r in rs],
            "summary": analysis.hop_summary(per_sentence),
        }
        _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    else:
        table = analysis.entity_correlations(corpus, [rec.A for _, rec in results], top_k=args.top_k)
        _emit(json.dumps(table.to_dict(), indent=2, sort_keys=True) + "\n", args.out)
        print(table.render(), file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    corpus = make_corpus(args.n, args.seed, args.kind)
    atomic_write_text(args.out, format_conll(corpus))
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "analyze": cmd_analyze, "synth": cmd_synth}


def main(argv=None) -> int:
    level = os.environ.get("TREENER_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING) if not level.isdigit() else int(level),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TreeNerError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
