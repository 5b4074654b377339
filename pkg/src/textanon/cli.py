"""Command-line entry point: ``textanon {train,tag,anonymize,evaluate,split}``.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric
failure (diverged training).
"""
from __future__ import annotations

import argparse
import dataclasses
import enum
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .anonymizer import PseudonymLexicon, Strategy, StrategyKind, anonymize_raw_text
from .corpus import Corpus, CorpusFormat, decode_spans, format_corpus, read_corpus, split_corpus
from .crf import CrfTagger, TrainConfig, dumps_model, load_model, train
from .errors import DivergenceError, TextAnonError
from .features import FeatureTemplateConfig, build_feature_index, encode_sentence
from .metrics import span_counts, token_counts, weighted_report

logger = logging.getLogger("textanon")


class ExitStatus(enum.IntEnum):
    OK = 0
    USAGE = 1
    DATA = 2
    NUMERIC = 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    corpus: CorpusFormat = field(default_factory=CorpusFormat)
    encoding: str = "utf-8"
    features: FeatureTemplateConfig = field(default_factory=FeatureTemplateConfig)
    features_set: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)
    strategy: str = "removal"
    mask_char: str = "*"
    delete: bool = False
    mode: str = "token"
    include_o: bool = False
    paths: dict = field(default_factory=dict)
    log_level: str = "INFO"

    @classmethod
    def load(cls, path) -> "RunConfig":
        if path is None:
            return cls()
        try:
            with open(path, encoding="utf-8") as fh:
                doc = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise TextAnonError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise TextAnonError(f"invalid config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise TextAnonError(f"config {path} must be a mapping of sections")
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {"corpus", "features", "train", "anonymize", "evaluate", "paths", "logging"}
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown config sections: {sorted(unknown)}")
        cfg = cls()
        try:
            corpus = dict(doc.get("corpus") or {})
            cfg.encoding = corpus.pop("encoding", cfg.encoding)
            columns = corpus.pop("columns", {}) or {}
            cfg.corpus = CorpusFormat(
                delimiter=corpus.pop("delimiter", ","),
                marker_column=columns.get("marker", "Sentence #"),
                word_column=columns.get("word", "Word"),
                pos_column=columns.get("pos", "POS"),
                tag_column=columns.get("tag", "Tag"),
            )
            if corpus:
                raise UsageError(f"unknown corpus options: {sorted(corpus)}")
            if doc.get("features"):
                cfg.features = FeatureTemplateConfig(**doc["features"])
                cfg.features_set = True
            if doc.get("train"):
                cfg.train = TrainConfig(**doc["train"])
            anon = doc.get("anonymize") or {}
            cfg.strategy = anon.get("strategy", cfg.strategy)
            cfg.mask_char = anon.get("mask_char", cfg.mask_char)
            cfg.delete = bool(anon.get("delete", cfg.delete))
            if anon.get("lexicon"):
                cfg.paths["lexicon"] = anon["lexicon"]
            ev = doc.get("evaluate") or {}
            cfg.mode = ev.get("mode", cfg.mode)
            cfg.include_o = bool(ev.get("include_o", cfg.include_o))
            cfg.paths.update(doc.get("paths") or {})
            cfg.log_level = (doc.get("logging") or {}).get("level", cfg.log_level)
        except TypeError as exc:
            raise UsageError(f"invalid config option: {exc}") from None
        except ValueError as exc:
            raise UsageError(f"invalid config value: {exc}") from None
        return cfg


def atomic_write(path, data: str, encoding: str = "utf-8") -> None:
    """Write via a temp file in the target directory and rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding=encoding, newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require(value, name):
    if value is None:
        raise UsageError(f"missing required option --{name.replace('_', '-')}")
    return value


def _check_distinct(inputs, outputs):
    ins = {os.path.realpath(p) for p in inputs if p}
    seen = set()
    for p in outputs:
        if not p:
            continue
        real = os.path.realpath(p)
        if real in ins or real in seen:
            raise UsageError(f"output path {p} collides with another input or output path")
        seen.add(real)


def _read(path, fmt, encoding) -> Corpus:
    if not os.path.exists(path):
        raise TextAnonError(f"no such file: {path}")
    corpus, report = read_corpus(path, fmt, encoding)
    logger.info("read %s: %d rows, %d sentences", path, report.rows, report.sentences)
    return corpus


def _path(value, cfg: RunConfig, key: str):
    return value if value is not None else cfg.paths.get(key)


def cmd_train(config=None, corpus=None, model=None, seed=None, epochs=None, l2=None,
              learning_rate=None, batch_size=None, tolerance=None, **_) -> int:
    cfg = RunConfig.load(config)
    corpus_path = _require(_path(corpus, cfg, "corpus"), "corpus")
    model_path = _require(_path(model, cfg, "model"), "model")
    _check_distinct([corpus_path, config], [model_path])
    overrides = {
        k: v for k, v in dict(seed=seed, epochs=epochs, l2=l2, learning_rate=learning_rate,
                              batch_size=batch_size, tolerance=tolerance).items()
        if v is not None
    }
    try:
        tcfg = dataclasses.replace(cfg.train, **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = _read(corpus_path, cfg.corpus, cfg.encoding)
    index = build_feature_index(data, cfg.features)
    encs = [encode_sentence(s, index, cfg.features, with_gold=True) for s in data]
    logger.info("training on %d sentences, %d features, %d labels",
                len(encs), index.num_features, index.num_labels)
    crf = train(encs, index, tcfg)
    atomic_write(model_path, dumps_model(crf))
    print(f"epochs: {crf.metadata['epochs_run']}")
    print(f"final objective: {crf.metadata['final_objective']!r}")
    return ExitStatus.OK


def _load_model(path):
    if not os.path.exists(path):
        raise TextAnonError(f"no such file: {path}")
    return load_model(path)


def _tagger(model_path, cfg: RunConfig) -> CrfTagger:
    crf = _load_model(model_path)
    return CrfTagger(crf, cfg.features if cfg.features_set else crf.config)


def cmd_tag(config=None, model=None, input=None, output=None, **_) -> int:
    cfg = RunConfig.load(config)
    model_path = _require(_path(model, cfg, "model"), "model")
    in_path = _require(input, "input")
    out_path = _require(output, "output")
    _check_distinct([model_path, in_path, config], [out_path])
    tagger = _tagger(model_path, cfg)
    data = _read(in_path, cfg.corpus, cfg.encoding)
    tagged = [s.with_tags(tagger.tag(s)) for s in data]
    atomic_write(out_path, format_corpus(tagged, cfg.corpus), cfg.encoding)
    print(f"tagged {len(tagged)} sentences")
    return ExitStatus.OK


def cmd_anonymize(config=None, model=None, input=None, output=None, strategy=None,
                  mask_char=None, delete=None, lexicon=None, audit=None, **_) -> int:
    cfg = RunConfig.load(config)
    model_path = _require(_path(model, cfg, "model"), "model")
    in_path = _require(input, "input")
    out_path = _require(output, "output")
    lexicon_path = _path(lexicon, cfg, "lexicon")
    audit_path = _path(audit, cfg, "audit")
    _check_distinct([model_path, in_path, lexicon_path, config], [out_path, audit_path])
    try:
        kind = StrategyKind(strategy or cfg.strategy)
    except ValueError:
        raise UsageError(f"unknown strategy {strategy or cfg.strategy!r}") from None
    lex = None
    if kind is StrategyKind.PSEUDONYMIZATION:
        if lexicon_path is None:
            raise TextAnonError("pseudonymization requires --lexicon")
        if not os.path.exists(lexicon_path):
            raise TextAnonError(f"no such file: {lexicon_path}")
        lex = PseudonymLexicon.from_file(lexicon_path)
    try:
        strat = Strategy(
            kind,
            mask_char=mask_char if mask_char is not None else cfg.mask_char,
            delete=bool(delete if delete is not None else cfg.delete),
            lexicon=lex,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    tagger = _tagger(model_path, cfg)
    if not os.path.exists(in_path):
        raise TextAnonError(f"no such file: {in_path}")
    with open(in_path, encoding=cfg.encoding) as fh:
        text = fh.read()
    out, records = anonymize_raw_text(text, tagger.model, tagger.config, strat)
    atomic_write(out_path, out + ("\n" if out else ""))
    if audit_path:
        atomic_write(audit_path, "".join(r.to_json() + "\n" for r in records))
    print(f"anonymized {len(records)} entity mentions")
    return ExitStatus.OK


def cmd_evaluate(config=None, gold=None, pred=None, mode=None, include_o=None,
                 output=None, **_) -> int:
    cfg = RunConfig.load(config)
    gold_path = _require(gold, "gold")
    pred_path = _require(pred, "pred")
    _check_distinct([gold_path, pred_path, config], [output])
    mode = mode or cfg.mode
    if mode not in ("token", "span"):
        raise UsageError(f"unknown mode {mode!r}")
    include_o = cfg.include_o if include_o is None else include_o
    g = _read(gold_path, cfg.corpus, cfg.encoding)
    p = _read(pred_path, cfg.corpus, cfg.encoding)
    if len(g) != len(p):
        raise TextAnonError(f"gold has {len(g)} sentences, prediction has {len(p)}")
    for i, (gs, ps) in enumerate(zip(g, p)):
        if not (gs.is_labeled and ps.is_labeled):
            raise TextAnonError(f"sentence {i} ({gs.id}) has unlabeled tokens")
    try:
        if mode == "token":
            counts = token_counts([s.tags for s in g], [s.tags for s in p])
        else:
            counts = span_counts([decode_spans(s) for s in g], [decode_spans(s) for s in p])
    except ValueError as exc:
        raise TextAnonError(str(exc)) from None
    report = weighted_report(counts, mode, include_o)
    sys.stdout.write(report.format_table())
    if output:
        atomic_write(output, report.to_json())
    return ExitStatus.OK


def cmd_split(config=None, corpus=None, ratios=None, seed=None, output_prefix=None, **_) -> int:
    cfg = RunConfig.load(config)
    corpus_path = _require(_path(corpus, cfg, "corpus"), "corpus")
    prefix = _require(output_prefix, "output_prefix")
    ratios = ratios or (0.8, 0.1, 0.1)
    seed = cfg.train.seed if seed is None else seed
    outs = [f"{prefix}.{name}" for name in ("train", "dev", "test")]
    _check_distinct([corpus_path, config], outs)
    data = _read(corpus_path, cfg.corpus, cfg.encoding)
    try:
        parts = split_corpus(data, ratios, seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for path, part in zip(outs, parts):
        atomic_write(path, format_corpus(part, cfg.corpus), cfg.encoding)
    print(" ".join(f"{name}={len(part)}" for name, part in zip(("train", "dev", "test"), parts)))
    return ExitStatus.OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ExitStatus.USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="textanon", description="CRF-based named-entity anonymisation toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="YAML run configuration; command-line flags take precedence")
        p.add_argument("-v", "--verbose", action="store_true", help="log debug output to stderr")
        p.add_argument("-q", "--quiet", action="store_true", help="log warnings and errors only")

    p = sub.add_parser("train", help="train a CRF tagger on an annotated corpus")
    common(p)
    p.add_argument("--corpus", help="annotated training corpus")
    p.add_argument("--model", help="output model file")
    p.add_argument("--seed", type=int, help="shuffling seed")
    p.add_argument("--epochs", type=int, help="maximum number of epochs")
    p.add_argument("--l2", type=float, help="L2 regularisation strength")
    p.add_argument("--learning-rate", type=float, help="AdaGrad step size")
    p.add_argument("--batch-size", type=int, help="sentences per mini-batch")
    p.add_argument("--tolerance", type=float, help="relative objective change that stops training")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tag", help="replace the tag column of a corpus with predictions")
    common(p)
    p.add_argument("--model", help="trained model file")
    p.add_argument("--input", help="corpus to tag")
    p.add_argument("--output", help="output corpus")
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("anonymize", help="anonymise raw text")
    common(p)
    p.add_argument("--model", help="trained model file")
    p.add_argument("--input", help="raw UTF-8 text file")
    p.add_argument("--output", help="anonymised text output")
    p.add_argument("--strategy", choices=[k.value for k in StrategyKind],
                   help="neutralisation strategy (default: removal)")
    p.add_argument("--mask-char", help="mask character for removal (default: *)")
    p.add_argument("--delete", action="store_true", default=None,
                   help="removal deletes entity tokens instead of masking them")
    p.add_argument("--lexicon", help="pseudonym lexicon (YAML/JSON: category -> list)")
    p.add_argument("--audit", help="write one JSON audit record per line here")
    p.set_defaults(func=cmd_anonymize)

    p = sub.add_parser("evaluate", help="score predicted tags against gold tags")
    common(p)
    p.add_argument("--gold", help="gold corpus")
    p.add_argument("--pred", help="predicted corpus")
    p.add_argument("--mode", choices=["token", "span"], help="scoring unit (default: token)")
    p.add_argument("--include-o", action="store_true", default=None,
                   help="include the O label in the weighted average")
    p.add_argument("--output", help="write the JSON report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("split", help="split a corpus into train/dev/test files")
    common(p)
    p.add_argument("--corpus", help="corpus to split")
    p.add_argument("--ratios", type=float, nargs=3, metavar=("TRAIN", "DEV", "TEST"),
                   help="split fractions summing to 1 (default: 0.8 0.1 0.1)")
    p.add_argument("--seed", type=int, help="shuffling seed")
    p.add_argument("--output-prefix", help="writes PREFIX.train, PREFIX.dev, PREFIX.test")
    p.set_defaults(func=cmd_split)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else None
    if level is None:
        level = logging.INFO
        if args.config and os.path.exists(args.config):
            try:
                level = logging.getLevelName(RunConfig.load(args.config).log_level.upper())
            except Exception:
                pass  # reported properly when the command loads the config
        if not isinstance(level, int):
            level = logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return int(args.func(**vars(args)))
    except UsageError as exc:
        logger.error("%s", exc)
        return ExitStatus.USAGE
    except DivergenceError as exc:
        logger.error("%s", exc)
        return ExitStatus.NUMERIC
    except (TextAnonError, OSError, ValueError) as exc:
        logger.error("%s", exc)
        return ExitStatus.DATA


if __name__ == "__main__":
    sys.exit(main())
