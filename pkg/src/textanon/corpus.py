"""Annotated NER corpus: parsing, writing, BIO span decoding and splitting.

The on-disk format is a delimited table with one row per token and the
columns ``sentence marker, word, POS, tag``.  Only the first token of a
sentence carries the marker; continuation rows leave it blank::

    Sentence #,Word,POS,Tag
    Sentence 1,Thousands,NNS,O
    ,of,IN,O
    ...
"""
from __future__ import annotations

import csv
import io
import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

from .errors import CorpusFormatError, SchemaError

OUTSIDE = "O"
_LABEL_RE = re.compile(r"^([BI])-(.+)$")


@dataclass(frozen=True)
class Token:
    word: str
    pos: str | None = None
    tag: str | None = None

    def __post_init__(self):
        if not self.word.strip():
            raise ValueError("token word is empty")


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[Token, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError(f"sentence {self.id!r} has no tokens")

    def __len__(self):
        return len(self.tokens)

    @property
    def words(self) -> list[str]:
        return [t.word for t in self.tokens]

    @property
    def tags(self) -> list[str | None]:
        return [t.tag for t in self.tokens]

    @property
    def is_labeled(self) -> bool:
        return all(t.tag is not None for t in self.tokens)

    def with_tags(self, tags: Sequence[str]) -> "Sentence":
        if len(tags) != len(self.tokens):
            raise ValueError(
                f"sentence {self.id!r}: {len(tags)} tags for {len(self.tokens)} tokens"
            )
        return Sentence(
            self.id,
            tuple(Token(t.word, t.pos, tag) for t, tag in zip(self.tokens, tags)),
        )


def split_label(label: str) -> tuple[str, str | None]:
    """Return ``(prefix, category)``; ``("O", None)`` for the outside label."""
    if label == OUTSIDE:
        return OUTSIDE, None
    m = _LABEL_RE.match(label)
    if m is None:
        raise SchemaError(f"label {label!r} is neither 'O' nor B-<cat>/I-<cat>")
    return m.group(1), m.group(2)


@dataclass(frozen=True)
class TagSchema:
    """Ordered BIO label inventory.

    Labels are kept in lexicographic order so that label indices do not
    depend on the order in which tags were first seen.
    """

    labels: tuple[str, ...]
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple(sorted(set(self.labels) | {OUTSIDE}))
        for label in labels:
            split_label(label)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_lookup", {l: i for i, l in enumerate(labels)})

    @classmethod
    def from_tags(cls, tags: Iterable[str]) -> "TagSchema":
        return cls(tuple(tags))

    @property
    def categories(self) -> tuple[str, ...]:
        return tuple(sorted({split_label(l)[1] for l in self.labels} - {None}))

    def __len__(self):
        return len(self.labels)

    def __contains__(self, label):
        return label in self._lookup

    def index(self, label: str) -> int:
        try:
            return self._lookup[label]
        except KeyError:
            raise SchemaError(f"label {label!r} is not in the tag schema") from None


@dataclass(frozen=True, order=True)
class EntitySpan:
    """Contiguous entity mention; ``start`` and ``end`` are both inclusive."""

    start: int
    end: int
    category: str

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ValueError(f"invalid span bounds ({self.start}, {self.end})")


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[Sentence, ...]
    schema: TagSchema

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        for s in self.sentences:
            for tok in s.tokens:
                if tok.tag is not None and tok.tag not in self.schema:
                    raise SchemaError(
                        f"sentence {s.id!r}: tag {tok.tag!r} not in schema"
                    )

    @classmethod
    def from_sentences(cls, sentences: Iterable[Sentence]) -> "Corpus":
        sentences = tuple(sentences)
        tags = (t.tag for s in sentences for t in s.tokens if t.tag is not None)
        return cls(sentences, TagSchema.from_tags(tags))

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def num_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)


@dataclass(frozen=True)
class CorpusFormat:
    """Column mapping and delimiter of a corpus file."""

    delimiter: str = ","
    marker_column: str = "Sentence #"
    word_column: str = "Word"
    pos_column: str | None = "POS"
    tag_column: str = "Tag"

    def __post_init__(self):
        if self.delimiter not in (",", "\t"):
            raise ValueError(f"unsupported delimiter {self.delimiter!r}")

    @property
    def columns(self) -> tuple[str, ...]:
        cols = [self.marker_column, self.word_column]
        if self.pos_column is not None:
            cols.append(self.pos_column)
        cols.append(self.tag_column)
        return tuple(cols)


@dataclass(frozen=True)
class ParseReport:
    rows: int
    sentences: int
    tag_histogram: dict[str, int]


def _header_positions(row: list[str], fmt: CorpusFormat) -> dict[str, int] | None:
    cells = [c.strip().lower() for c in row]
    wanted = [c.lower() for c in fmt.columns]
    if not set(wanted) <= set(cells):
        return None
    return {name: cells.index(name.lower()) for name in fmt.columns}


def parse_corpus(
    stream: TextIO, fmt: CorpusFormat | None = None
) -> tuple[Corpus, ParseReport]:
    """Parse a corpus table from ``stream``.

    A header row is recognised when it contains all configured column names
    (case-insensitive); otherwise columns are read positionally.  A non-blank
    marker equal to the current sentence id continues that sentence, so
    tables with the marker repeated on every row parse the same way.
    Blank tag cells yield unlabeled tokens.
    """
    fmt = fmt or CorpusFormat()
    reader = csv.reader(stream, delimiter=fmt.delimiter)
    positions = None
    ncols = len(fmt.columns)
    sentences: list[Sentence] = []
    current_id: str | None = None
    current: list[Token] = []
    tag_hist: Counter = Counter()
    nrows = 0
    first = True

    def flush():
        if current:
            sentences.append(Sentence(current_id, tuple(current)))

    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if first:
            first = False
            positions = _header_positions(row, fmt)
            if positions is not None:
                ncols = len(row)
                continue
        if len(row) != ncols:
            raise CorpusFormatError(
                f"expected {ncols} columns, found {len(row)}", line=line
            )
        if positions is None:
            cells = dict(zip(fmt.columns, row))
        else:
            cells = {name: row[i] for name, i in positions.items()}
        marker = cells[fmt.marker_column].strip()
        word = cells[fmt.word_column].strip()
        pos = cells[fmt.pos_column].strip() if fmt.pos_column else ""
        tag = cells[fmt.tag_column].strip()
        if not word:
            raise CorpusFormatError("empty word cell", line=line)
        if tag:
            try:
                split_label(tag)
            except SchemaError as exc:
                raise CorpusFormatError(str(exc), line=line) from None
            tag_hist[tag] += 1
        if marker and marker != current_id:
            flush()
            current_id, current = marker, []
        elif current_id is None:
            raise CorpusFormatError(
                "continuation row before any sentence marker", line=line
            )
        current.append(Token(word, pos or None, tag or None))
        nrows += 1
    flush()

    if not sentences:
        raise CorpusFormatError("corpus stream contains no token rows")
    corpus = Corpus.from_sentences(sentences)
    report = ParseReport(nrows, len(sentences), dict(sorted(tag_hist.items())))
    return corpus, report


def read_corpus(path, fmt: CorpusFormat | None = None, encoding: str = "utf-8"):
    with open(path, encoding=encoding, newline="") as fh:
        return parse_corpus(fh, fmt)


def write_corpus(
    corpus: Corpus | Iterable[Sentence],
    stream: TextIO,
    fmt: CorpusFormat | None = None,
    header: bool = True,
) -> None:
    """Write sentences in the corpus format, blank-marker convention."""
    fmt = fmt or CorpusFormat()
    writer = csv.writer(stream, delimiter=fmt.delimiter, lineterminator="\n")
    if header:
        writer.writerow(fmt.columns)
    for sentence in corpus:
        for i, tok in enumerate(sentence.tokens):
            row = [sentence.id if i == 0 else "", tok.word]
            if fmt.pos_column is not None:
                row.append(tok.pos or "")
            row.append(tok.tag or "")
            writer.writerow(row)


def format_corpus(corpus, fmt: CorpusFormat | None = None, header: bool = True) -> str:
    buf = io.StringIO()
    write_corpus(corpus, buf, fmt, header)
    return buf.getvalue()


def decode_tags(tags: Sequence[str]) -> list[EntitySpan]:
    """Decode a BIO tag sequence into entity spans.

    An ``I-X`` that does not continue a span of category ``X`` opens a new
    span, so every sequence decodes.
    """
    spans = []
    start = category = None
    for i, tag in enumerate(tags):
        prefix, cat = split_label(tag)
        if prefix == "I" and category == cat:
            continue
        if category is not None:
            spans.append(EntitySpan(start, i - 1, category))
            start = category = None
        if cat is not None:
            start, category = i, cat
    if category is not None:
        spans.append(EntitySpan(start, len(tags) - 1, category))
    return spans


def decode_spans(sentence: Sentence, schema: TagSchema | None = None) -> list[EntitySpan]:
    tags = sentence.tags
    if any(t is None for t in tags):
        raise SchemaError(f"sentence {sentence.id!r} is not fully labeled")
    if schema is not None:
        for t in tags:
            schema.index(t)
    return decode_tags(tags)


def encode_spans(spans: Iterable[EntitySpan], length: int) -> list[str]:
    tags = [OUTSIDE] * length
    last_end = -1
    for span in sorted(spans):
        if span.end >= length:
            raise ValueError(f"span {span} out of bounds for length {length}")
        if span.start <= last_end:
            raise ValueError(f"span {span} overlaps a previous span")
        tags[span.start] = f"B-{span.category}"
        for i in range(span.start + 1, span.end + 1):
            tags[i] = f"I-{span.category}"
        last_end = span.end
    return tags


def split_sizes(n: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    if len(ratios) != 3:
        raise ValueError("exactly three split ratios are required")
    if any(r < 0 for r in ratios):
        raise ValueError(f"split ratios must be non-negative: {ratios}")
    if abs(math.fsum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1: {ratios}")
    dev = min(int(math.floor(ratios[1] * n + 0.5)), n)
    test = min(int(math.floor(ratios[2] * n + 0.5)), n - dev)
    return n - dev - test, dev, test


def split_corpus(
    corpus: Corpus, ratios: Sequence[float], seed: int
) -> tuple[Corpus, Corpus, Corpus]:
    """Shuffle sentences with ``seed`` and cut into train/dev/test.

    Dev and test sizes are the rounded ratio targets; the remainder goes to
    train.  Each split keeps the source order and the source schema.
    """
    n = len(corpus)
    if n == 0:
        raise ValueError("cannot split an empty corpus")
    n_train, n_dev, _ = split_sizes(n, ratios)
    order = list(range(n))
    random.Random(seed).shuffle(order)
    cuts = (order[:n_train], order[n_train : n_train + n_dev], order[n_train + n_dev :])
    return tuple(
        Corpus(tuple(corpus.sentences[i] for i in sorted(part)), corpus.schema)
        for part in cuts
    )
