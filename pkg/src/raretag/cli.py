"""Command-line pipeline: convert, train, predict, evaluate, gen-synthetic.

Training is configured by a flat ``key = value`` text file (``#`` starts a
comment); unknown keys and keys that do not apply to the chosen model
kind are rejected before any work starts. All outputs are UTF-8 and model
files are written atomically. The ``RARETAG_CONFIG_DIR`` environment
variable provides a default directory for relative config paths.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import brat, conll, crf, embeddings, iob, metrics, model_io, neural, synthetic
from .iob import TaggedSentence
from .tokenizer import Sentence

CONFIG_DIR_ENV = "RARETAG_CONFIG_DIR"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_THRESHOLD = 2


class CliError(Exception):
    pass


# ---------------------------------------------------------------- config

_COMMON_KEYS = {
    "model_kind": str,
    "train": str,
    "validation": str,
    "test": str,
    "embedding": str,
    "embedding_dim": int,
    "seed": int,
    "model_out": str,
    "history_out": str,
    "manifest_out": str,
    "oov_policy": str,
}

_CRF_KEYS = {
    "l2_coefficient": float,
    "l1_coefficient": float,
    "max_iterations": int,
    "convergence_tol": float,
    "lbfgs_memory": int,
    "window": int,
}

_NEURAL_KEYS = {
    "learning_rate": float,
    "max_epochs": int,
    "patience": int,
    "batch_size": int,
    "hidden_dim": int,
    "gradient_clip_norm": float,
    "train_embeddings": bool,
}

MODEL_KINDS = ("crf", "bilstm", "bilstm-crf")


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def parse_config(text: str) -> dict:
    """Parse flat ``key = value`` lines into a typed dict."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, raw = stripped.partition("=")
        if not sep:
            raise CliError(f"config line {lineno}: expected 'key = value'")
        key = key.strip()
        raw = raw.split("#", 1)[0].strip()
        schema = {**_COMMON_KEYS, **_CRF_KEYS, **_NEURAL_KEYS}
        if key not in schema:
            raise CliError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise CliError(f"config line {lineno}: duplicate key {key!r}")
        caster = schema[key]
        try:
            values[key] = _parse_bool(raw) if caster is bool else caster(raw)
        except ValueError as err:
            raise CliError(f"config line {lineno}: {err}") from None
    return values


def validate_run_config(values: dict) -> dict:
    kind = values.get("model_kind")
    if kind not in MODEL_KINDS:
        raise CliError(
            f"model_kind must be one of {', '.join(MODEL_KINDS)}; got {kind!r}"
        )
    if "train" not in values:
        raise CliError("config missing required key 'train'")
    if "model_out" not in values:
        raise CliError("config missing required key 'model_out'")
    wrong = _NEURAL_KEYS.keys() & values.keys() if kind == "crf" \
        else _CRF_KEYS.keys() & values.keys()
    if kind != "crf":
        if "validation" not in values:
            raise CliError(f"{kind} training requires a 'validation' path")
        if "embedding" not in values:
            raise CliError(f"{kind} training requires 'embedding' "
                           "(either 'random' or a vector file path)")
    if wrong:
        raise CliError(
            f"keys not valid for model_kind={kind}: {', '.join(sorted(wrong))}"
        )
    return values


def _resolve_config_path(path_arg: str) -> Path:
    path = Path(path_arg)
    if path.exists():
        return path
    env_dir = os.environ.get(CONFIG_DIR_ENV)
    if env_dir and not path.is_absolute():
        candidate = Path(env_dir) / path
        if candidate.exists():
            return candidate
    raise CliError(f"config file not found: {path_arg}")


# ---------------------------------------------------------------- helpers

def _read_tagged_conll(path: str | Path, need_tags: bool = True):
    content = Path(path).read_text(encoding="utf-8")
    items = conll.read_conll(content)
    if need_tags:
        missing = [i for i, item in enumerate(items) if item.tags is None]
        if missing:
            raise CliError(f"{path}: sentence {missing[0]} has no tag column")
    return items


def _tagged_sentences(items) -> list[TaggedSentence]:
    return [TaggedSentence(item.sentence.tokens, item.tags) for item in items]


def _check_labels(items, label_set: list[str], path) -> None:
    known = set(label_set)
    unknown = sorted({
        t for item in items if item.tags for t in item.tags if t not in known
    })
    if unknown:
        raise CliError(
            f"{path}: tags not in the model's label set: {', '.join(unknown)}"
        )


def _predict_sentences(model, items, constrained: bool) -> list[list[str]]:
    preds = []
    for item in items:
        if isinstance(model, crf.CrfModel):
            preds.append(crf.predict_tags(model, item.sentence, constrained))
        else:
            preds.append(neural.predict(model, item.sentence.tokens, constrained))
    return preds


# ---------------------------------------------------------------- convert

def cmd_convert(args) -> int:
    corpus, unpaired = brat.load_corpus_dir(
        args.brat_dir,
        lenient=args.lenient,
        skip_unpaired=args.skip_unpaired,
        offset_units=args.offset_units,
    )
    if unpaired:
        print(f"skipped unpaired files: {', '.join(unpaired)}", file=sys.stderr)
    if not corpus.documents:
        raise CliError(f"{args.brat_dir}: no .txt/.ann pairs found")
    out_items = []
    dropped = 0
    discontinuous = 0
    sentence_count = 0
    for doc in corpus.documents:
        resolved = brat.resolve_overlaps(doc)
        dropped += len(resolved.resolution_log) - len(doc.resolution_log)
        discontinuous += sum(1 for e in resolved.entities if e.is_discontinuous())
        from .tokenizer import tokenize_document

        for sentence in tokenize_document(resolved.text):
            tagged = iob.encode(sentence, resolved.entities)
            out_items.append(
                conll.ConllSentence(doc.doc_id, sentence, tagged.tags)
            )
            sentence_count += 1
    model_io.atomic_write_text(args.out_conll, conll.write_conll(out_items))
    print(
        f"converted {len(corpus.documents)} documents, {sentence_count} "
        f"sentences; overlaps dropped: {dropped}; discontinuous flattened: "
        f"{discontinuous}"
    )
    return EXIT_OK


# ---------------------------------------------------------------- train

def _build_embedding_source(cfg: dict, train_sents) -> embeddings.EmbeddingTable:
    source = cfg["embedding"]
    policy = cfg.get("oov_policy", "random_seeded")
    seed = cfg.get("seed", 0)
    if source == "random":
        vocab = sorted({t.surface for ts in train_sents for t in ts.tokens})
        return embeddings.random_table(
            vocab, cfg.get("embedding_dim", 50), seed, policy
        )
    if not Path(source).exists():
        raise CliError(f"embedding file not found: {source}")
    return embeddings.load_text_format(source, policy, seed)


def cmd_train(args) -> int:
    config_path = _resolve_config_path(args.config)
    cfg = validate_run_config(parse_config(
        config_path.read_text(encoding="utf-8")
    ))
    kind = cfg["model_kind"]
    for key in ("train", "validation", "test"):
        if key in cfg and not Path(cfg[key]).exists():
            raise CliError(f"{key} file not found: {cfg[key]}")

    train_items = _read_tagged_conll(cfg["train"])
    val_items = _read_tagged_conll(cfg["validation"]) if "validation" in cfg else []
    train_sents = _tagged_sentences(train_items)
    val_sents = _tagged_sentences(val_items)
    seed = cfg.get("seed", 0)
    started = time.monotonic()
    history_csv = None

    if kind == "crf":
        tc = crf.TrainConfig(
            l2_coefficient=cfg.get("l2_coefficient", 1.0),
            l1_coefficient=cfg.get("l1_coefficient", 0.0),
            max_iterations=cfg.get("max_iterations", 100),
            convergence_tol=cfg.get("convergence_tol", 1e-5),
            lbfgs_memory=cfg.get("lbfgs_memory", 6),
            window=cfg.get("window", 2),
        )
        # default hyperparameters: train on train+validation together
        model, opt = crf.train(train_sents + val_sents, tc)
        final_metrics = {
            "objective": opt.fun,
            "iterations": opt.iterations,
            "converged": opt.converged,
            "features": len(model.feature_index),
        }
    else:
        fc = neural.FitConfig(
            learning_rate=cfg.get("learning_rate", 0.001),
            max_epochs=cfg.get("max_epochs", 50),
            patience=cfg.get("patience", 4),
            batch_size=cfg.get("batch_size", 32),
            hidden_dim=cfg.get("hidden_dim", 100),
            seed=seed,
            gradient_clip_norm=cfg.get("gradient_clip_norm", 5.0),
        )
        source = _build_embedding_source(cfg, train_sents)
        head = neural.HEAD_CRF if kind == "bilstm-crf" else neural.HEAD_SOFTMAX
        tagger = neural.build_tagger(
            train_sents,
            source,
            head_kind=head,
            hidden_dim=fc.hidden_dim,
            seed=seed,
            train_embeddings=cfg.get("train_embeddings"),
        )
        model, history = neural.fit(tagger, train_sents, val_sents, fc)
        history_csv = history.to_csv()
        final_metrics = {
            "best_epoch": history.best_epoch,
            "stopped_epoch": history.stopped_epoch,
            "best_val_loss": min(history.val_loss) if history.val_loss else None,
            "embedding_oov_rate": source.oov_rate(),
        }

    model_out = Path(cfg["model_out"])
    model_io.save_model(model, model_out)
    if history_csv is not None:
        history_out = Path(cfg.get("history_out", str(model_out) + ".history.csv"))
        model_io.atomic_write_text(history_out, history_csv)
    manifest = {
        "command": "train",
        "config": cfg,
        "seed": seed,
        "durations": {"train_seconds": round(time.monotonic() - started, 3)},
        "metrics": final_metrics,
        "model_path": str(model_out),
    }
    manifest_out = Path(cfg.get("manifest_out", str(model_out) + ".manifest.json"))
    model_io.atomic_write_text(manifest_out, json.dumps(manifest, indent=2) + "\n")
    print(f"trained {kind} model -> {model_out}")
    return EXIT_OK


# ---------------------------------------------------------------- predict

def cmd_predict(args) -> int:
    model = model_io.load_model(args.model)
    items = _read_tagged_conll(args.in_conll, need_tags=False)
    preds = _predict_sentences(model, items, args.constrained)
    out_items = [
        conll.ConllSentence(item.doc_id, item.sentence, tags)
        for item, tags in zip(items, preds)
    ]
    model_io.atomic_write_text(args.out_conll, conll.write_conll(out_items))
    print(f"tagged {len(out_items)} sentences -> {args.out_conll}")
    return EXIT_OK


# ---------------------------------------------------------------- evaluate

def _parse_min_flags(pairs: list[str]) -> dict[str, float]:
    thresholds = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep:
            raise CliError(f"--min expects metric=value, got {pair!r}")
        try:
            thresholds[name.strip()] = float(value)
        except ValueError:
            raise CliError(f"--min {pair!r}: not a number") from None
    return thresholds


def cmd_evaluate(args) -> int:
    model = model_io.load_model(args.model)
    items = _read_tagged_conll(args.conll)
    label_set = model.label_set
    _check_labels(items, label_set, args.conll)
    gold = [item.tags for item in items]
    preds = _predict_sentences(model, items, args.constrained)
    if args.level == "token":
        report = metrics.token_level(gold, preds)
    else:
        report = metrics.entity_level(gold, preds)
    sys.stdout.write(metrics.report_render(report, args.format))
    failures = []
    for name, minimum in _parse_min_flags(args.min or []).items():
        actual = report.metric(name)
        if actual < minimum:
            failures.append(f"{name}={actual:.4f} < {minimum:.4f}")
    if failures:
        print("threshold check failed: " + "; ".join(failures), file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


# ---------------------------------------------------------------- gen

def cmd_gen_synthetic(args) -> int:
    config = synthetic.SyntheticConfig(
        seed=args.seed,
        size=args.size,
        discontinuous_fraction=args.discontinuous_fraction,
        overlap_fraction=args.overlap_fraction,
        holdout_fraction=args.holdout_fraction,
    )
    documents = synthetic.generate_corpus(config)
    train_dir, heldout_dir = synthetic.write_corpus(
        documents, args.out_dir, config.holdout_fraction
    )
    where = str(train_dir) if heldout_dir is None else \
        f"{train_dir} (+ heldout in {heldout_dir})"
    print(f"wrote {len(documents)} synthetic documents to {where}")
    return EXIT_OK


# ---------------------------------------------------------------- dump

def cmd_dump(args) -> int:
    sys.stdout.write(model_io.dump_text(args.model))
    return EXIT_OK


# ---------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="raretag",
        description="Sequence-labeling toolkit for rare-disease NER",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="Brat directory -> CoNLL TSV")
    p.add_argument("brat_dir")
    p.add_argument("out_conll")
    p.add_argument("--lenient", action="store_true",
                   help="downgrade surface mismatches to warnings")
    p.add_argument("--skip-unpaired", action="store_true")
    p.add_argument("--offset-units", choices=("codepoints", "utf16"),
                   default="codepoints")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="tag a CoNLL file with a model")
    p.add_argument("model")
    p.add_argument("in_conll")
    p.add_argument("out_conll")
    p.add_argument("--constrained", action="store_true",
                   help="forbid invalid IOB2 transitions while decoding")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a model against gold CoNLL")
    p.add_argument("model")
    p.add_argument("conll")
    p.add_argument("--level", choices=("token", "entity"), default="entity")
    p.add_argument("--format", choices=("table", "tsv", "json-lines"),
                   default="table")
    p.add_argument("--constrained", action="store_true")
    p.add_argument("--min", action="append", metavar="METRIC=VALUE",
                   help="exit nonzero when a metric falls below a bound")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gen-synthetic", help="emit a synthetic Brat corpus")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--size", type=int, default=100)
    p.add_argument("--discontinuous-fraction", type=float, default=0.1)
    p.add_argument("--overlap-fraction", type=float, default=0.1)
    p.add_argument("--holdout-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("dump", help="print a lossless text dump of a model")
    p.add_argument("model")
    p.set_defaults(func=cmd_dump)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return EXIT_OK  # downstream pager/head closed the stream
    except (CliError, brat.BratParseError, brat.BratIntegrityError,
            conll.ConllParseError, metrics.EvalError,
            model_io.ModelFormatError, embeddings.EmbeddingParseError,
            FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
