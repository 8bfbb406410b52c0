"""Synthetic datasets, PDF dictionary extraction and the JSONL corpus format.

Sentences are ``str``. Raw bytes (PDF input) are decoded as latin-1 so each
byte becomes exactly one character and ``s.encode("latin-1")`` gives the
original bytes back.
"""

from __future__ import annotations

import json
import logging
import string
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

LETTERS = "abc"
NOISE_ALPHABET = string.ascii_lowercase + "{}"
FORMAT_VERSION = 1

# standard held-out sizes: 8 of 128, 32 of 512, 50 of 1000
EVAL_FRACTION = {"simple-json": 16, "simple-json-stream": 16, "pdf": 20}


@dataclass
class Corpus:
    sentences: list[str]
    eval_indices: list[int] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def train_indices(self) -> list[int]:
        held = set(self.eval_indices)
        return [i for i in range(len(self.sentences)) if i not in held]

    @property
    def train(self) -> list[str]:
        return [self.sentences[i] for i in self.train_indices]

    @property
    def eval(self) -> list[str]:
        return [self.sentences[i] for i in self.eval_indices]


def holdout_last(n: int, dataset: str) -> list[int]:
    k = n // EVAL_FRACTION.get(dataset, 16)
    return list(range(n - k, n))


def _structure(rng: np.random.Generator, depth: int, out: list[str]) -> None:
    out.append("{")
    if rng.random() < 0.6 ** depth:
        _structure(rng, depth + 1, out)
        while rng.random() < 0.6 ** depth:
            _structure(rng, depth + 1, out)
    else:
        out.append(LETTERS[rng.integers(3)])
    out.append("}")


def simple_json_sentence(rng: np.random.Generator) -> str:
    out: list[str] = []
    _structure(rng, 1, out)
    return "".join(out)


def gen_simple_json(count: int, seed: int = 0) -> Corpus:
    """Sentences of ``S -> '{' ('a' | 'b' | 'c' | S+) '}'``.

    At depth D the S+ branch is taken with probability 0.6**D, and further
    siblings keep being appended while that same test keeps passing.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 10]))
    sentences = [simple_json_sentence(rng) for _ in range(count)]
    return Corpus(sentences, holdout_last(count, "simple-json"),
                  {"dataset": "simple-json", "count": count, "seed": seed})


def _noise(rng: np.random.Generator) -> str:
    n = int(rng.integers(5, 21))
    return "".join(NOISE_ALPHABET[i] for i in rng.integers(len(NOISE_ALPHABET), size=n))


def stream_parts(rng: np.random.Generator) -> tuple[str, str, str]:
    prefix = _noise(rng)
    core = simple_json_sentence(rng)
    suffix = _noise(rng)
    return prefix, core, suffix


def gen_stream(count: int, seed: int = 0) -> Corpus:
    """Simple-JSON sentences wrapped in 5-20 characters of noise on each side."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    sentences = ["".join(stream_parts(rng)) for _ in range(count)]
    return Corpus(sentences, holdout_last(count, "simple-json-stream"),
                  {"dataset": "simple-json-stream", "count": count, "seed": seed})


def scan_pdf_dictionaries(raw: bytes | str) -> tuple[list[str], int]:
    """Top-level ``<< ... >>`` spans and the number of unterminated ones."""
    text = raw.decode("latin-1") if isinstance(raw, (bytes, bytearray)) else raw
    found: list[str] = []
    depth = 0
    start = 0
    i = 0
    n = len(text)
    while i < n - 1:
        pair = text[i:i + 2]
        if pair == "<<":
            if depth == 0:
                start = i
            depth += 1
            i += 2
        elif pair == ">>" and depth > 0:
            depth -= 1
            i += 2
            if depth == 0:
                found.append(text[start:i])
        else:
            i += 1
    return found, (1 if depth > 0 else 0)


def extract_pdf_dictionaries(raw: bytes | str) -> list[str]:
    """Syntactic extraction of top-level PDF dictionaries (no decompression)."""
    found, dropped = scan_pdf_dictionaries(raw)
    if dropped:
        log.warning("dropped %d unterminated dictionary fragment(s)", dropped)
    return found


def pdf_corpus(paths, seed: int = 0) -> Corpus:
    sentences: list[str] = []
    for p in paths:
        sentences.extend(extract_pdf_dictionaries(Path(p).read_bytes()))
    return Corpus(sentences, holdout_last(len(sentences), "pdf"),
                  {"dataset": "pdf", "sources": [str(p) for p in paths]})


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    header = {"format": "rlgrammar-corpus", "version": FORMAT_VERSION,
              "count": len(corpus.sentences), "eval": sorted(corpus.eval_indices),
              "provenance": corpus.provenance}
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for s in corpus.sentences:
            f.write(json.dumps(s, ensure_ascii=True) + "\n")


class CorpusFormatError(ValueError):
    pass


def load_corpus(path: str | Path) -> Corpus:
    with open(path, encoding="ascii", newline="\n") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CorpusFormatError(f"{path}: line 1: missing header")
    try:
        header = json.loads(lines[0])
        if header.get("format") != "rlgrammar-corpus":
            raise ValueError("not a corpus header")
    except ValueError as e:
        raise CorpusFormatError(f"{path}: line 1: {e}") from None
    sentences = []
    for lineno, line in enumerate(lines[1:], 2):
        try:
            s = json.loads(line)
        except ValueError as e:
            raise CorpusFormatError(f"{path}: line {lineno}: {e}") from None
        if not isinstance(s, str):
            raise CorpusFormatError(f"{path}: line {lineno}: expected a JSON string")
        sentences.append(s)
    if header.get("count", len(sentences)) != len(sentences):
        raise CorpusFormatError(f"{path}: header count does not match {len(sentences)} lines")
    return Corpus(sentences, list(header.get("eval", [])), header.get("provenance", {}))
