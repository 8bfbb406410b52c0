"""Command-line interface: ``rlgrammar {gen,extract,train,parse,eval}``.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import PRESETS, RunConfig, format_config, load_config, preset
from .data import (Corpus, CorpusFormatError, extract_pdf_dictionaries, gen_simple_json,
                   gen_stream, holdout_last, load_corpus, save_corpus)
from .evaluate import evaluate
from .render import render_ascii, render_svg, trace_json
from .trainer import METRICS_HEADER, Trainer

log = logging.getLogger("rlgrammar")

GENERATORS = {"simple-json": gen_simple_json, "simple-json-stream": gen_stream}


class UsageError(Exception):
    pass


def cmd_gen(args) -> int:
    if args.dataset not in GENERATORS:
        raise UsageError(f"unknown dataset {args.dataset!r}; choose from {', '.join(GENERATORS)}")
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    corpus = GENERATORS[args.dataset](args.count, args.seed)
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} sentences ({len(corpus.train_indices)} train, "
          f"{len(corpus.eval_indices)} eval) to {args.out}")
    return 0


def cmd_extract(args) -> int:
    sentences: list[str] = []
    sources = []
    if args.inputs:
        for p in args.inputs:
            sentences.extend(extract_pdf_dictionaries(Path(p).read_bytes()))
            sources.append(str(p))
    else:
        sentences.extend(extract_pdf_dictionaries(sys.stdin.buffer.read()))
        sources.append("<stdin>")
    corpus = Corpus(sentences, holdout_last(len(sentences), "pdf"),
                    {"dataset": "pdf", "sources": sources})
    save_corpus(corpus, args.out)
    print(f"extracted {len(sentences)} dictionaries "
          f"({sum(map(len, sentences))} characters) to {args.out}")
    return 0


def _config(args) -> RunConfig:
    base = preset(args.preset) if args.preset else RunConfig()
    cfg = load_config(args.config, base) if args.config else base
    overrides = {}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.seed is not None:
        overrides["seed"] = args.seed
    return cfg.replace(**overrides)


def cmd_train(args) -> int:
    corpus = load_corpus(args.corpus)
    if args.resume:
        trainer = load_checkpoint(args.resume, corpus.train)
        if args.epochs is not None:
            trainer.cfg = trainer.cfg.replace(epochs=args.epochs)
    else:
        cfg = _config(args)
        if not corpus.train:
            raise ValueError("training corpus is empty")
        trainer = Trainer(cfg, corpus.train)
    metrics = open(args.metrics, "a" if args.resume else "w") if args.metrics else None
    try:
        if metrics is not None and not args.resume:
            metrics.write(METRICS_HEADER + "\n")

        def on_epoch(m):
            if metrics is not None:
                metrics.write(m.row() + "\n")
                metrics.flush()
            if args.checkpoint_every and (m.epoch + 1) % args.checkpoint_every == 0:
                save_checkpoint(trainer, args.out)

        trainer.train(args.until, callback=on_epoch)
    finally:
        if metrics is not None:
            metrics.close()
    save_checkpoint(trainer, args.out)
    print(f"trained to epoch {trainer.epoch}; checkpoint written to {args.out}")
    return 0


def _sentences(args) -> list[str]:
    if args.sentence is not None:
        return [args.sentence]
    corpus = load_corpus(args.corpus)
    return corpus.eval if args.split == "eval" else corpus.train if args.split == "train" \
        else corpus.sentences


def cmd_parse(args) -> int:
    if args.sentence is None and args.corpus is None:
        raise UsageError("give --sentence or --corpus")
    trainer = load_checkpoint(args.checkpoint)
    parser = trainer.parser()
    out = []
    sentences = _sentences(args)
    if args.limit:
        sentences = sentences[:args.limit]
    for s in sentences:
        res = parser.parse(s, "greedy")
        if args.format == "ascii":
            out.append(render_ascii(s, res.tree))
        elif args.format == "svg":
            out.append(render_svg(s, res.tree))
        else:
            out.append(trace_json(s, res.tree, res.values) + "\n")
    if args.out_dir and args.format == "svg":
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        for i, svg in enumerate(out):
            (d / f"parse_{i:04d}.svg").write_text(svg)
        print(f"wrote {len(out)} SVG file(s) to {d}")
    else:
        sys.stdout.write(("\n" if args.format == "ascii" else "").join(out))
    return 0


def cmd_eval(args) -> int:
    trainer = load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.corpus)
    sentences = corpus.eval
    if not sentences:
        raise UsageError("corpus has no eval split")
    report = evaluate(trainer.parser(), sentences, args.top)
    if args.json:
        print(json.dumps(report.to_dict(), ensure_ascii=True, indent=1))
    else:
        print(report.text())
    return 0


def cmd_config(args) -> int:
    sys.stdout.write(format_config(preset(args.preset) if args.preset else RunConfig()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rlgrammar", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic corpus")
    g.add_argument("dataset", help="simple-json or simple-json-stream")
    g.add_argument("--count", type=int, default=None, help="sentences (default 128 / 512)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--out", required=True)
    g.set_defaults(func=cmd_gen)

    x = sub.add_parser("extract", help="extract PDF dictionaries into a corpus")
    x.add_argument("inputs", nargs="*", help="PDF files (default: read standard input)")
    x.add_argument("-o", "--out", required=True)
    x.set_defaults(func=cmd_extract)

    t = sub.add_parser("train", help="train a parser")
    t.add_argument("corpus")
    t.add_argument("-o", "--out", required=True, help="checkpoint path")
    t.add_argument("--config", help="key = value config file")
    t.add_argument("--preset", choices=sorted(PRESETS))
    t.add_argument("--epochs", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--until", type=int, help="stop early at this epoch (resume later)")
    t.add_argument("--resume", help="continue from this checkpoint")
    t.add_argument("--metrics", help="per-epoch CSV output")
    t.add_argument("--checkpoint-every", type=int, default=0)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("parse", help="greedy-parse and render sentences")
    r.add_argument("checkpoint")
    r.add_argument("--sentence")
    r.add_argument("--corpus")
    r.add_argument("--split", choices=["eval", "train", "all"], default="eval")
    r.add_argument("--limit", type=int, default=0)
    r.add_argument("--format", choices=["ascii", "svg", "json"], default="ascii")
    r.add_argument("--out-dir", help="write one SVG file per sentence here")
    r.set_defaults(func=cmd_parse)

    e = sub.add_parser("eval", help="report on the eval split")
    e.add_argument("checkpoint")
    e.add_argument("corpus")
    e.add_argument("--top", type=int, default=10)
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("config", help="print a config file with all defaults")
    c.add_argument("--preset", choices=sorted(PRESETS))
    c.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "count", 0) is None:
        args.count = 512 if args.dataset == "simple-json-stream" else 128
    try:
        return args.func(args)
    except UsageError as e:
        print(f"rlgrammar: usage error: {e}", file=sys.stderr)
        return 2
    except CheckpointError as e:
        print(f"rlgrammar: corrupt checkpoint: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError, CorpusFormatError) as e:
        print(f"rlgrammar: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
