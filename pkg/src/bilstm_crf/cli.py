"""Command-line interface: ``train``, ``tag``, ``eval`` and ``gen``.

Settings resolve as built-in defaults, then an optional ``--config``
key=value file, then explicit command-line flags (last wins). The
resolved settings are echoed to stderr as ``# key=value`` lines before
any work starts.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .config import load_config, parse_bool
from .container import load_model, save_model
from .corpus import (SynthSpec, TagSet, read_iob_file, split_corpus,
                     synth_corpus, validate_corpus, write_iob)
from .embeddings import load_pretrained_file
from .errors import BilstmCrfError, ConfigError, FormatError, NumericError
from .evaluation import format_report, report_to_keyvalue, strict_score
from .model import tag
from .training import HyperParams, hyper_search, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_NUMERIC = 5

log = logging.getLogger("bilstm_crf")

# dest -> (type, default); None-typed entries are flags.
TRAIN_DEFAULTS = {
    "train": (str, None), "valid": (str, None), "model": (str, None),
    "history": (str, None), "embeddings": (str, None),
    "train_fraction": (float, 0.7), "split_seed": (int, 0),
    "hyper_search": (int, 0), "search_seed": (int, 0), "search_log": (str, None),
    "hidden": (int, 50), "window": (int, 3), "d": (int, 50),
    "learning_rate": (float, 0.05), "dropout": (float, 0.05),
    "max_epochs": (int, 100), "seed": (int, 0), "patience": (int, 15),
    "clip": (float, 5.0), "init": (str, None), "min_count": (int, 1),
    "freeze_embeddings": (bool, False), "paper_faithful": (bool, False),
    "repair": (bool, False), "classes": (str, "problem,test,treatment"),
}
TAG_DEFAULTS = {
    "model": (str, None), "input": (str, None), "output": (str, None),
    "constrain_decode": (bool, True),
}
EVAL_DEFAULTS = {
    "gold": (str, None), "pred": (str, None), "repair": (bool, False),
    "format": (str, "table"), "classes": (str, "problem,test,treatment"),
}
GEN_DEFAULTS = {
    "spec": (str, None), "output": (str, None), "seed": (int, 0),
    "n_sentences": (int, None), "min_length": (int, None), "max_length": (int, None),
}


def _add(parser, defaults):
    for dest, (kind, _) in defaults.items():
        flag = "--" + dest.replace("_", "-")
        if kind is bool:
            parser.add_argument(flag, dest=dest, action="store_const", const=True, default=None)
            parser.add_argument("--no-" + dest.replace("_", "-"), dest=dest,
                                action="store_const", const=False)
        else:
            parser.add_argument(flag, dest=dest, type=kind, default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bilstm-crf", description="BiLSTM-CRF concept extraction tagger")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, defaults, help_ in [
        ("train", TRAIN_DEFAULTS, "train a model (optionally with random search)"),
        ("tag", TAG_DEFAULTS, "tag unlabeled sentences with a saved model"),
        ("eval", EVAL_DEFAULTS, "strict span scoring of predictions against gold"),
        ("gen", GEN_DEFAULTS, "write a synthetic IOB2 corpus"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", default=None, help="flat key=value settings file")
        _add(p, defaults)
        # long-form alias for the embedding dimension
        if name == "train":
            p.add_argument("--dim", dest="d", type=int, default=None)
    return parser


def resolve(args, defaults):
    settings = {k: v for k, (_, v) in defaults.items()}
    if getattr(args, "config", None):
        for key, value in load_config(args.config).items():
            key = key.replace("-", "_")
            if key not in defaults:
                raise ConfigError(f"{args.config}: unknown key {key!r}")
            kind = defaults[key][0]
            try:
                settings[key] = parse_bool(value) if kind is bool else kind(value)
            except ValueError:
                raise ConfigError(f"{args.config}: bad value for {key}: {value!r}") from None
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def echo(command, settings):
    print(f"# command={command}", file=sys.stderr)
    for key, value in settings.items():
        print(f"# {key}={'' if value is None else value}", file=sys.stderr)


def _require(settings, *keys):
    for key in keys:
        if not settings.get(key):
            raise ConfigError(f"--{key.replace('_', '-')} is required")


def _tagset(settings):
    return TagSet(tuple(c.strip() for c in settings["classes"].split(",") if c.strip()))


def _read_corpus(path, tagset, repair):
    corpus = read_iob_file(path, tagset, repair=repair)
    validate_corpus(corpus)
    return corpus


def cmd_train(settings):
    _require(settings, "train", "model")
    faithful = settings["paper_faithful"]
    if settings["init"] is None:
        settings["init"] = "uniform" if faithful else "scaled"
    hp = HyperParams(
        hidden=settings["hidden"], window=settings["window"], d=settings["d"],
        learning_rate=settings["learning_rate"], dropout=settings["dropout"],
        max_epochs=settings["max_epochs"], seed=settings["seed"],
        patience=settings["patience"], clip=settings["clip"], init=settings["init"],
        freeze_embeddings=settings["freeze_embeddings"], min_count=settings["min_count"],
    )
    pretrained = None
    if settings["embeddings"]:
        pretrained = load_pretrained_file(settings["embeddings"])
        if pretrained:
            dim = next(iter(pretrained.values())).shape[0]
            if dim != hp.d:
                if settings["hyper_search"]:
                    log.info("using pretrained dimension d=%d", dim)
                else:
                    raise ConfigError(f"pretrained vectors have d={dim}, but d={hp.d}; pass --d {dim}")
    if not settings["hyper_search"]:
        hp.validate(faithful)

    tagset = _tagset(settings)
    corpus = _read_corpus(settings["train"], tagset, settings["repair"])
    if settings["valid"]:
        train_c = corpus
        valid_c = _read_corpus(settings["valid"], tagset, settings["repair"])
    else:
        train_c, valid_c = split_corpus(corpus, settings["train_fraction"], settings["split_seed"])
    print(f"# train_sentences={len(train_c)} valid_sentences={len(valid_c)}", file=sys.stderr)

    if settings["hyper_search"]:
        trials_out = open(settings["search_log"], "w", encoding="utf-8") if settings["search_log"] else None
        try:
            def on_trial(trial):
                print(f"# trial {trial.trial} valid_f1={trial.valid_f1} {trial.hparams}",
                      file=sys.stderr)
                if trials_out:
                    trials_out.write(trial.to_json() + "\n")
                    trials_out.flush()
            model, history, _ = hyper_search(
                train_c, valid_c, settings["hyper_search"], settings["search_seed"],
                base=hp, pretrained=pretrained, paper_faithful=faithful, on_trial=on_trial)
        finally:
            if trials_out:
                trials_out.close()
    else:
        model, history = train(train_c, valid_c, hp, pretrained,
                               on_epoch=lambda r: print(
                                   f"# epoch {r.epoch} loss={r.loss:.6f} valid_f1={r.valid_f1:.4f}",
                                   file=sys.stderr))

    print("# effective " + json.dumps(model.hparams.to_dict()), file=sys.stderr)
    save_model(model, settings["model"])
    history_path = settings["history"] or settings["model"] + ".history.jsonl"
    with open(history_path, "w", encoding="utf-8") as fh:
        fh.write(history.to_lines())
    print(f"# best_epoch={history.best_epoch} best_valid_f1={history.best_f1}", file=sys.stderr)
    return EXIT_OK


def cmd_tag(settings):
    _require(settings, "model", "input")
    model = load_model(settings["model"])
    corpus = read_iob_file(settings["input"], model.tagset)
    pred = tag(model, corpus.unlabeled(), constrain=settings["constrain_decode"])
    text = write_iob(pred)
    if settings["output"]:
        with open(settings["output"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(settings):
    _require(settings, "gold", "pred")
    if settings["format"] not in ("table", "kv"):
        raise ConfigError("--format must be 'table' or 'kv'")
    tagset = _tagset(settings)
    gold = _read_corpus(settings["gold"], tagset, settings["repair"])
    pred = _read_corpus(settings["pred"], tagset, settings["repair"])
    report = strict_score(gold, pred)
    if settings["format"] == "kv":
        sys.stdout.write(report_to_keyvalue(report))
    else:
        sys.stdout.write(format_report(report))
        sys.stdout.write(f"token accuracy: {100.0 * report.token_accuracy:.2f}\n")
    return EXIT_OK


def cmd_gen(settings):
    _require(settings, "output")
    spec_cfg = load_config(settings["spec"]) if settings["spec"] else {}
    for key in ("n_sentences", "min_length", "max_length"):
        if settings[key] is not None:
            spec_cfg[key] = str(settings[key])
    spec = SynthSpec.from_config(spec_cfg)
    print(f"# generator {spec}", file=sys.stderr)
    corpus = synth_corpus(spec, settings["seed"])
    with open(settings["output"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_iob(corpus))
    return EXIT_OK


COMMANDS = {
    "train": (TRAIN_DEFAULTS, cmd_train),
    "tag": (TAG_DEFAULTS, cmd_tag),
    "eval": (EVAL_DEFAULTS, cmd_eval),
    "gen": (GEN_DEFAULTS, cmd_gen),
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    defaults, handler = COMMANDS[args.command]
    try:
        settings = resolve(args, defaults)
        echo(args.command, settings)
        return handler(settings)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        name = exc.filename if exc.filename else ""
        print(f"error: {exc.strerror or exc}: {name}", file=sys.stderr)
        return EXIT_IO
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, BilstmCrfError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
