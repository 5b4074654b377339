"""Neutralisation of detected entities: removal, categorisation, pseudonymisation."""
from __future__ import annotations

import enum
import json
import re
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import yaml

from .corpus import EntitySpan, Sentence, Token, decode_tags
from .errors import LexiconError
from .tagger import SequenceTagger


class StrategyKind(str, enum.Enum):
    REMOVAL = "removal"
    CATEGORIZATION = "categorization"
    PSEUDONYMIZATION = "pseudonymization"


@dataclass(frozen=True)
class PseudonymLexicon:
    """Replacement surface forms per entity category, in assignment order."""

    entries: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        object.__setattr__(
            self, "entries", {cat: tuple(v) for cat, v in dict(self.entries).items()}
        )

    def candidates(self, category: str) -> tuple[str, ...]:
        values = self.entries.get(category)
        if not values:
            raise LexiconError(f"pseudonym lexicon has no entries for category {category!r}")
        return values

    @classmethod
    def from_file(cls, path) -> "PseudonymLexicon":
        # YAML loader also accepts JSON documents.
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise LexiconError(f"{path}: lexicon must map category -> list of strings")
        for cat, values in data.items():
            if not isinstance(values, list) or not all(isinstance(v, str) for v in values):
                raise LexiconError(f"{path}: entries for {cat!r} must be a list of strings")
        return cls({str(k): tuple(v) for k, v in data.items()})


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind
    mask_char: str = "*"
    delete: bool = False
    label_format: str = "[{category}]"
    lexicon: PseudonymLexicon | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if len(self.mask_char) != 1:
            raise ValueError("mask_char must be a single character")
        if self.delete and self.kind is not StrategyKind.REMOVAL:
            raise ValueError("delete only applies to the removal strategy")

    @classmethod
    def removal(cls, mask_char: str = "*", delete: bool = False) -> "Strategy":
        return cls(StrategyKind.REMOVAL, mask_char=mask_char, delete=delete)

    @classmethod
    def categorization(cls, label_format: str = "[{category}]") -> "Strategy":
        return cls(StrategyKind.CATEGORIZATION, label_format=label_format)

    @classmethod
    def pseudonymization(cls, lexicon: PseudonymLexicon | None) -> "Strategy":
        return cls(StrategyKind.PSEUDONYMIZATION, lexicon=lexicon)


@dataclass(frozen=True)
class AuditRecord:
    sentence_id: str
    start: int
    end: int
    category: str
    original: str
    replacement: str
    strategy: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, sort_keys=True)


@dataclass
class ConsistencyMap:
    """Document-scoped (category, original) -> pseudonym assignments.

    Entries are handed out in lexicon order.  Once a category's list is
    used up, assignment wraps around with a numeric suffix (``Paris-2``).
    """

    assigned: dict[tuple[str, str], str] = field(default_factory=dict)
    used: dict[str, int] = field(default_factory=dict)

    def pseudonym(self, category: str, original: str, lexicon: PseudonymLexicon) -> str:
        key = (category, original)
        if key in self.assigned:
            return self.assigned[key]
        values = lexicon.candidates(category)
        n = self.used.get(category, 0)
        cycle, i = divmod(n, len(values))
        value = values[i] if cycle == 0 else f"{values[i]}-{cycle + 1}"
        self.used[category] = n + 1
        self.assigned[key] = value
        return value


def _join(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


def anonymize_sentence(
    sentence: Sentence,
    spans: Sequence[EntitySpan],
    strategy: Strategy,
    state: ConsistencyMap | None = None,
) -> tuple[list[str], list[AuditRecord]]:
    """Replace every span of ``sentence``; other tokens pass through."""
    words = sentence.words
    state = state if state is not None else ConsistencyMap()
    if strategy.kind is StrategyKind.PSEUDONYMIZATION and strategy.lexicon is None:
        raise LexiconError("pseudonymization requires a lexicon")
    out: list[str] = []
    audit: list[AuditRecord] = []
    cursor = 0
    for span in sorted(spans):
        if span.start < cursor or span.end >= len(words):
            raise ValueError(f"span {span} overlaps another span or is out of bounds")
        out.extend(words[cursor : span.start])
        original = words[span.start : span.end + 1]
        if strategy.kind is StrategyKind.REMOVAL:
            replaced = [] if strategy.delete else [strategy.mask_char * len(w) for w in original]
        elif strategy.kind is StrategyKind.CATEGORIZATION:
            replaced = [strategy.label_format.format(category=span.category.upper())]
        else:
            replaced = [state.pseudonym(span.category, _join(original), strategy.lexicon)]
        out.extend(replaced)
        audit.append(
            AuditRecord(
                sentence.id, span.start, span.end, span.category,
                _join(original), _join(replaced), strategy.kind.value,
            )
        )
        cursor = span.end + 1
    out.extend(words[cursor:])
    return out, audit


# -- raw text ---------------------------------------------------------------

_SENTENCE_BREAK = re.compile(r"(?<=[.!?])(\s+)")
_PLACEHOLDER = re.compile(r"^\[[A-Z0-9_-]+\]$")


def segment(text: str) -> list[tuple[str, str]]:
    """Split into ``(sentence, following whitespace)`` pairs."""
    parts = _SENTENCE_BREAK.split(text)
    pairs = []
    for i in range(0, len(parts), 2):
        sep = parts[i + 1] if i + 1 < len(parts) else ""
        if parts[i].strip():
            pairs.append((parts[i].strip(), sep))
        elif pairs:
            prev, prev_sep = pairs[-1]
            pairs[-1] = (prev, prev_sep + parts[i] + sep)
    return pairs


def _is_punct(ch: str) -> bool:
    return not ch.isalnum()


def tokenize(sentence: str) -> list[str]:
    """Whitespace split, then peel leading/trailing punctuation characters.

    Tokens made only of punctuation and ``[CAT]`` placeholders stay whole.
    """
    tokens = []
    for chunk in sentence.split():
        if _PLACEHOLDER.match(chunk) or all(_is_punct(c) for c in chunk):
            tokens.append(chunk)
            continue
        i, j = 0, len(chunk)
        while _is_punct(chunk[i]):
            i += 1
        while _is_punct(chunk[j - 1]):
            j -= 1
        tokens.extend(chunk[:i])
        tokens.append(chunk[i:j])
        tokens.extend(chunk[j:])
    return tokens


def anonymize_document(
    text: str,
    tagger: SequenceTagger,
    strategy: Strategy,
    doc_id: str = "doc",
) -> tuple[str, list[AuditRecord]]:
    """Segment, tokenise, tag and neutralise raw text with any tagger.

    Tokens are re-joined with single spaces; the whitespace that followed
    each sentence terminator in the input is kept as the separator.
    """
    state = ConsistencyMap()
    pieces: list[str] = []
    audit: list[AuditRecord] = []
    for n, (raw, sep) in enumerate(segment(text), start=1):
        words = tokenize(raw)
        sentence = Sentence(f"{doc_id}:{n}", tuple(Token(w) for w in words))
        spans = decode_tags(tagger.tag(sentence))
        tokens, records = anonymize_sentence(sentence, spans, strategy, state)
        pieces.append(_join(tokens) + sep)
        audit.extend(records)
    return "".join(pieces).rstrip() if pieces else "", audit


def anonymize_raw_text(
    text: str,
    model,
    config,
    strategy: Strategy,
    lexicon: PseudonymLexicon | None = None,
) -> tuple[str, list[AuditRecord]]:
    """Anonymise raw text with a trained CRF model."""
    from .crf import CrfTagger

    if lexicon is not None:
        strategy = Strategy(
            strategy.kind, strategy.mask_char, strategy.delete, strategy.label_format, lexicon
        )
    if strategy.kind is StrategyKind.PSEUDONYMIZATION and strategy.lexicon is None:
        raise LexiconError("pseudonymization requires a lexicon")
    if not text.strip():
        return "", []
    return anonymize_document(text, CrfTagger(model, config), strategy)
