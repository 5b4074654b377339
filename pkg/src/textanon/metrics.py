"""Precision, recall and F1 at token and span level."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import OUTSIDE, EntitySpan


@dataclass(frozen=True)
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError(f"counts must be non-negative: {self}")

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def support(self) -> int:
        return self.tp + self.fn


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def precision(c: Counts) -> float:
    return _ratio(c.tp, c.tp + c.fp)


def recall(c: Counts) -> float:
    return _ratio(c.tp, c.tp + c.fn)


def f1(c: Counts) -> float:
    return _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)


def undefined_metrics(c: Counts) -> tuple[str, ...]:
    """Names of the metrics whose denominator is zero (reported as 0)."""
    out = []
    if c.tp + c.fp == 0:
        out.append("precision")
    if c.tp + c.fn == 0:
        out.append("recall")
    if 2 * c.tp + c.fp + c.fn == 0:
        out.append("f1")
    return tuple(out)


def token_counts(
    gold: Sequence[Sequence[str]], pred: Sequence[Sequence[str]]
) -> dict[str, Counts]:
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sequences but {len(pred)} predicted")
    tp: dict[str, int] = defaultdict(int)
    fp: dict[str, int] = defaultdict(int)
    fn: dict[str, int] = defaultdict(int)
    for i, (g_seq, p_seq) in enumerate(zip(gold, pred)):
        if len(g_seq) != len(p_seq):
            raise ValueError(
                f"sentence {i}: gold has {len(g_seq)} tags, prediction has {len(p_seq)}"
            )
        for g, p in zip(g_seq, p_seq):
            if g == p:
                tp[g] += 1
            else:
                fp[p] += 1
                fn[g] += 1
    keys = sorted(set(tp) | set(fp) | set(fn))
    return {k: Counts(tp[k], fp[k], fn[k]) for k in keys}


def span_counts(
    gold_spans: Sequence[Sequence[EntitySpan]], pred_spans: Sequence[Sequence[EntitySpan]]
) -> dict[str, Counts]:
    """Exact-match span scoring per category."""
    if len(gold_spans) != len(pred_spans):
        raise ValueError(f"{len(gold_spans)} gold sentences but {len(pred_spans)} predicted")
    tp: dict[str, int] = defaultdict(int)
    fp: dict[str, int] = defaultdict(int)
    fn: dict[str, int] = defaultdict(int)
    for g_list, p_list in zip(gold_spans, pred_spans):
        g_set, p_set = set(g_list), set(p_list)
        for s in g_set & p_set:
            tp[s.category] += 1
        for s in p_set - g_set:
            fp[s.category] += 1
        for s in g_set - p_set:
            fn[s.category] += 1
    keys = sorted(set(tp) | set(fp) | set(fn))
    return {k: Counts(tp[k], fp[k], fn[k]) for k in keys}


@dataclass(frozen=True)
class KeyScore:
    counts: Counts
    precision: float
    recall: float
    f1: float
    undefined: tuple[str, ...] = ()

    @property
    def support(self) -> int:
        return self.counts.support


@dataclass(frozen=True)
class EvalReport:
    per_key: dict[str, KeyScore]
    weighted: tuple[float, float, float]
    mode: str = "token"
    include_o: bool = False
    weighted_undefined: bool = False
    excluded: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "include_o": self.include_o,
            "per_key": {
                k: {
                    "tp": s.counts.tp, "fp": s.counts.fp, "fn": s.counts.fn,
                    "precision": s.precision, "recall": s.recall, "f1": s.f1,
                    "support": s.support, "undefined": list(s.undefined),
                    "excluded": k in self.excluded,
                }
                for k, s in sorted(self.per_key.items())
            },
            "weighted": dict(zip(("precision", "recall", "f1"), self.weighted)),
            "weighted_undefined": self.weighted_undefined,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def format_table(self, digits: int = 2) -> str:
        keys = sorted(self.per_key)
        width = max([len(k) for k in keys] + [len("weighted avg")])
        head = f"{'':>{width}}  {'precision':>9}  {'recall':>9}  {'f1-score':>9}  {'support':>9}"
        lines = [head, ""]
        for k in keys:
            s = self.per_key[k]
            mark = " (excluded)" if k in self.excluded else ""
            lines.append(
                f"{k:>{width}}  {s.precision:>9.{digits}f}  {s.recall:>9.{digits}f}  "
                f"{s.f1:>9.{digits}f}  {s.support:>9d}{mark}"
            )
        total = sum(self.per_key[k].support for k in keys if k not in self.excluded)
        p, r, f = self.weighted
        lines.append("")
        lines.append(
            f"{'weighted avg':>{width}}  {p:>9.{digits}f}  {r:>9.{digits}f}  {f:>9.{digits}f}  {total:>9d}"
        )
        return "\n".join(lines) + "\n"


def weighted_report(
    counts: Mapping[str, Counts], mode: str = "token", include_o: bool = False
) -> EvalReport:
    """Per-key scores plus their support-weighted mean.

    The outside label is left out of the mean unless ``include_o``.
    """
    if mode not in ("token", "span"):
        raise ValueError(f"unknown evaluation mode {mode!r}")
    per_key = {
        k: KeyScore(c, precision(c), recall(c), f1(c), undefined_metrics(c))
        for k, c in counts.items()
    }
    excluded = () if include_o else tuple(k for k in per_key if k == OUTSIDE)
    # sorted keys make the floating-point sum independent of mapping order
    keys = sorted(k for k in per_key if k not in excluded)
    total = sum(per_key[k].support for k in keys)
    if total == 0:
        return EvalReport(per_key, (0.0, 0.0, 0.0), mode, include_o, True, excluded)
    weighted = tuple(
        sum(per_key[k].support * getattr(per_key[k], m) for k in keys) / total
        for m in ("precision", "recall", "f1")
    )
    return EvalReport(per_key, weighted, mode, include_o, False, excluded)
