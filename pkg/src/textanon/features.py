"""Feature templates and the feature-name -> weight-row index."""
from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Corpus, Sentence, TagSchema
from .errors import FeatureError, FingerprintMismatch, SchemaError

BOS = "BOS"
EOS = "EOS"


@dataclass(frozen=True)
class FeatureTemplateConfig:
    window: int = 2
    pos_window: int = 1
    prefix_lengths: tuple[int, ...] = (1, 2, 3)
    suffix_lengths: tuple[int, ...] = (1, 2, 3)
    use_pos: bool = True
    use_shape: bool = True
    min_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "prefix_lengths", tuple(self.prefix_lengths))
        object.__setattr__(self, "suffix_lengths", tuple(self.suffix_lengths))
        if self.window < 0 or self.pos_window < 0:
            raise ValueError("feature windows must be >= 0")
        if any(n < 1 for n in self.prefix_lengths + self.suffix_lengths):
            raise ValueError("prefix/suffix lengths must be >= 1")
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["prefix_lengths"] = list(self.prefix_lengths)
        d["suffix_lengths"] = list(self.suffix_lengths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureTemplateConfig":
        return cls(**d)

    @property
    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def word_shape(word: str) -> str:
    """Collapsed character-class shape: ``"London" -> "Xx+"``."""
    classes = []
    for ch in word:
        if ch.isupper():
            classes.append("X")
        elif ch.islower():
            classes.append("x")
        elif ch.isdigit():
            classes.append("d")
        else:
            classes.append(".")
    out = []
    i = 0
    while i < len(classes):
        j = i
        while j + 1 < len(classes) and classes[j + 1] == classes[i]:
            j += 1
        out.append(classes[i] + ("+" if j > i else ""))
        i = j + 1
    return "".join(out)


def extract_features(
    sentence: Sentence, position: int, config: FeatureTemplateConfig
) -> list[str]:
    tokens = sentence.tokens
    n = len(tokens)
    if not 0 <= position < n:
        raise IndexError(f"position {position} out of range for length {n}")
    word = tokens[position].word
    lower = word.lower()

    feats = ["bias"]
    for off in range(-config.window, config.window + 1):
        j = position + off
        if j < 0:
            value = BOS
        elif j >= n:
            value = EOS
        else:
            value = tokens[j].word.lower()
        feats.append(f"w[{off}]={value}")
    for k in config.prefix_lengths:
        if len(lower) >= k:
            feats.append(f"pre{k}={lower[:k]}")
    for k in config.suffix_lengths:
        if len(lower) >= k:
            feats.append(f"suf{k}={lower[-k:]}")
    if config.use_shape:
        feats.append(f"shape={word_shape(word)}")
    feats.append(f"cap={int(word[0].isupper())}")
    feats.append(f"allcaps={int(word.isupper())}")
    feats.append(f"digit={int(word.isdigit())}")
    if config.use_pos:
        for off in range(-config.pos_window, config.pos_window + 1):
            j = position + off
            if 0 <= j < n and tokens[j].pos:
                feats.append(f"pos[{off}]={tokens[j].pos}")
    return feats


def sentence_features(sentence: Sentence, config: FeatureTemplateConfig) -> list[list[str]]:
    return [extract_features(sentence, i, config) for i in range(len(sentence))]


@dataclass(frozen=True)
class FeatureIndex:
    """Bijection between unary feature names and rows ``0..U-1``.

    ``names`` is sorted, so a name's index is its position in ``names``.
    """

    names: tuple[str, ...]
    schema: TagSchema
    config: FeatureTemplateConfig
    _lookup: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        lookup = {name: i for i, name in enumerate(self.names)}
        if len(lookup) != len(self.names):
            raise FeatureError("duplicate feature names in index")
        object.__setattr__(self, "_lookup", lookup)

    @property
    def num_features(self) -> int:
        return len(self.names)

    @property
    def num_labels(self) -> int:
        return len(self.schema)

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint

    def get(self, name: str) -> int | None:
        return self._lookup.get(name)

    def __contains__(self, name):
        return name in self._lookup

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "fingerprint": self.fingerprint,
            "labels": list(self.schema.labels),
            "names": list(self.names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureIndex":
        config = FeatureTemplateConfig.from_dict(d["config"])
        if config.fingerprint != d["fingerprint"]:
            raise FingerprintMismatch("stored feature fingerprint does not match config")
        return cls(tuple(d["names"]), TagSchema(tuple(d["labels"])), config)


def build_feature_index(corpus: Corpus, config: FeatureTemplateConfig) -> FeatureIndex:
    if len(corpus) == 0:
        raise FeatureError("cannot build a feature index from an empty corpus")
    counts: Counter = Counter()
    for sentence in corpus:
        for feats in sentence_features(sentence, config):
            counts.update(feats)
    names = sorted(name for name, c in counts.items() if c >= config.min_count)
    if not names:
        raise FeatureError(
            f"no feature occurs at least min_count={config.min_count} times"
        )
    return FeatureIndex(tuple(names), corpus.schema, config)


@dataclass(frozen=True)
class EncodedSentence:
    """Active feature rows per position in CSR layout.

    Position ``t`` owns ``indices[offsets[t]:offsets[t+1]]``.
    """

    indices: np.ndarray
    offsets: np.ndarray
    gold: np.ndarray | None = None

    @property
    def length(self) -> int:
        return len(self.offsets) - 1

    def __len__(self):
        return self.length

    @property
    def active(self) -> list[np.ndarray]:
        return [self.indices[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    @classmethod
    def from_active(
        cls, active: Sequence[Sequence[int]], gold: Sequence[int] | None = None
    ) -> "EncodedSentence":
        offsets = np.zeros(len(active) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([len(a) for a in active])
        indices = (
            np.concatenate([np.asarray(a, dtype=np.int64) for a in active])
            if active
            else np.zeros(0, dtype=np.int64)
        )
        g = None if gold is None else np.asarray(gold, dtype=np.int64)
        return cls(indices.astype(np.int64), offsets, g)


def encode_sentence(
    sentence: Sentence,
    index: FeatureIndex,
    config: FeatureTemplateConfig,
    with_gold: bool | None = None,
) -> EncodedSentence:
    """Map a sentence onto index rows; unknown feature names are dropped.

    ``with_gold=None`` attaches gold labels whenever every tag is known to
    the schema; ``True`` requires them.
    """
    if config.fingerprint != index.fingerprint:
        raise FingerprintMismatch(
            f"feature config {config.fingerprint} does not match index {index.fingerprint}"
        )
    active = []
    for feats in sentence_features(sentence, config):
        rows = {index.get(f) for f in feats} - {None}
        active.append(sorted(rows))
    gold = None
    if with_gold is None:
        with_gold = sentence.is_labeled and all(t in index.schema for t in sentence.tags)
    if with_gold:
        if not sentence.is_labeled:
            raise SchemaError(f"sentence {sentence.id!r} has no gold tags")
        gold = [index.schema.index(t) for t in sentence.tags]
    return EncodedSentence.from_active(active, gold)
