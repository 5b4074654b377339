import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import GMB_LABELS
from textanon.corpus import EntitySpan
from textanon.metrics import (
    Counts,
    f1,
    precision,
    recall,
    span_counts,
    token_counts,
    undefined_metrics,
    weighted_report,
)

counts_st = st.builds(Counts, st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6))


def test_headline_counts_are_exact():
    c = Counts(93, 7, 7)
    assert precision(c) == 0.93 and recall(c) == 0.93 and f1(c) == 0.93
    assert undefined_metrics(c) == ()


def test_zero_counts_are_zero_and_flagged():
    c = Counts(0, 0, 0)
    assert (precision(c), recall(c), f1(c)) == (0.0, 0.0, 0.0)
    assert undefined_metrics(c) == ("precision", "recall", "f1")
    report = weighted_report({"B-geo": c})
    assert report.per_key["B-geo"].undefined == ("precision", "recall", "f1")
    assert report.weighted == (0.0, 0.0, 0.0) and report.weighted_undefined


def test_simple_counts():
    c = Counts(1, 0, 1)
    assert precision(c) == 1.0 and recall(c) == 0.5 and f1(c) == 2 / 3


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        Counts(-1, 0, 0)


@given(counts_st)
@settings(max_examples=500)
def test_bounds_and_harmonic_mean(c):
    p, r, f = precision(c), recall(c), f1(c)
    assert 0.0 <= p <= 1.0 and 0.0 <= r <= 1.0 and 0.0 <= f <= 1.0
    if p + r > 0:
        assert abs(f - 2 * p * r / (p + r)) <= 1e-12


@given(counts_st)
def test_formulas_match_exact_rationals(c):
    if c.tp + c.fp:
        assert precision(c) == float(Fraction(c.tp, c.tp + c.fp))
    if c.tp + c.fn:
        assert recall(c) == float(Fraction(c.tp, c.tp + c.fn))


# -- token counts ---------------------------------------------------------------


def test_token_counts_example():
    counts = token_counts([["B-geo", "O"]], [["O", "O"]])
    assert counts == {"B-geo": Counts(0, 0, 1), "O": Counts(1, 1, 0)}


def test_token_counts_perfect():
    seqs = [["B-geo", "O", "B-per", "I-per"], ["O"]]
    counts = token_counts(seqs, seqs)
    assert all(c.fp == 0 and c.fn == 0 for c in counts.values())


def test_token_counts_alignment_errors():
    with pytest.raises(ValueError, match="sentence 1"):
        token_counts([["O"], ["O", "O"]], [["O"], ["O"]])
    with pytest.raises(ValueError):
        token_counts([["O"]], [])


def recount(gold, pred):
    out = {}
    for g, p in zip(gold, pred):
        for tag in {g, p}:
            tp, fp, fn = out.get(tag, (0, 0, 0))
            out[tag] = (tp + (g == p == tag), fp + (p == tag != g), fn + (g == tag != p))
    return {k: Counts(*v) for k, v in out.items()}


def test_token_counts_match_recount():
    rng = random.Random(11)
    for _ in range(200):
        gold = [rng.choice(GMB_LABELS) for _ in range(50)]
        pred = [rng.choice(GMB_LABELS) if rng.random() < 0.4 else g for g in gold]
        assert token_counts([gold[:20], gold[20:]], [pred[:20], pred[20:]]) == recount(gold, pred)


tag_pairs = st.lists(
    st.tuples(st.sampled_from(GMB_LABELS), st.sampled_from(GMB_LABELS)), min_size=1, max_size=60
)


@given(tag_pairs)
def test_swap_symmetry(pairs):
    gold = [[g for g, _ in pairs]]
    pred = [[p for _, p in pairs]]
    fwd, bwd = token_counts(gold, pred), token_counts(pred, gold)
    assert fwd.keys() == bwd.keys()
    for k in fwd:
        assert (fwd[k].tp, fwd[k].fp, fwd[k].fn) == (bwd[k].tp, bwd[k].fn, bwd[k].fp)
        assert precision(fwd[k]) == recall(bwd[k]) and recall(fwd[k]) == precision(bwd[k])


@given(tag_pairs)
def test_totals_identity(pairs):
    counts = token_counts([[g for g, _ in pairs]], [[p for _, p in pairs]])
    tp = sum(c.tp for c in counts.values())
    assert tp + sum(c.fn for c in counts.values()) == len(pairs)
    assert tp + sum(c.fp for c in counts.values()) == len(pairs)


# -- span counts ----------------------------------------------------------------


def test_span_counts_examples():
    same = [[EntitySpan(0, 1, "per"), EntitySpan(6, 6, "geo")]]
    assert all(c.fp == c.fn == 0 for c in span_counts(same, same).values())
    got = span_counts([[EntitySpan(6, 6, "geo")]], [[EntitySpan(6, 7, "geo")]])
    assert got == {"geo": Counts(0, 1, 1)}


def test_span_match_is_per_sentence():
    a = [[EntitySpan(0, 0, "geo")], []]
    b = [[], [EntitySpan(0, 0, "geo")]]
    assert span_counts(a, b) == {"geo": Counts(0, 1, 1)}


def brute_span_counts(gold, pred):
    out = {}
    for g_list, p_list in zip(gold, pred):
        for cat in {s.category for s in g_list + p_list}:
            g = [s for s in g_list if s.category == cat]
            p = [s for s in p_list if s.category == cat]
            tp = sum(1 for s in p if any((s.start, s.end) == (t.start, t.end) for t in g))
            c = out.get(cat, Counts())
            out[cat] = c + Counts(tp, len(p) - tp, len(g) - tp)
    return out


def random_spans(rng, T):
    spans, i = [], 0
    while i < T:
        if rng.random() < 0.4:
            j = min(T - 1, i + rng.randint(0, 2))
            spans.append(EntitySpan(i, j, rng.choice(["geo", "per", "org"])))
            i = j + 1
        i += 1
    return spans


def test_span_counts_match_brute_force():
    rng = random.Random(2)
    for _ in range(300):
        n = rng.randint(1, 4)
        gold = [random_spans(rng, 8) for _ in range(n)]
        pred = [random_spans(rng, 8) if rng.random() < 0.5 else list(g) for g in gold]
        assert span_counts(gold, pred) == brute_span_counts(gold, pred)


# -- weighted report ------------------------------------------------------------


def test_weighted_single_key():
    report = weighted_report({"B-geo": Counts(93, 7, 7)})
    assert report.weighted == (0.93, 0.93, 0.93)


def test_weighted_zero_support_key_contributes_nothing():
    a = Counts(6, 2, 4)
    report = weighted_report({"B-geo": a, "B-per": Counts(0, 3, 0)})
    assert report.weighted == (precision(a), recall(a), f1(a))


def test_weighted_excludes_outside_unless_asked():
    counts = {"O": Counts(1000, 0, 0), "B-geo": Counts(1, 1, 1)}
    assert weighted_report(counts).weighted == (0.5, 0.5, 0.5)
    assert weighted_report(counts).excluded == ("O",)
    with_o = weighted_report(counts, include_o=True)
    assert with_o.weighted[0] == pytest.approx((1000 + 0.5 * 2) / 1002)


def test_weighted_matches_manual_recomputation():
    rng = random.Random(4)
    for _ in range(100):
        counts = {k: Counts(rng.randint(0, 50), rng.randint(0, 50), rng.randint(0, 50)) for k in ("a", "b", "c")}
        rows = [(c.tp + c.fn, c.tp / max(c.tp + c.fp, 1), c.tp / max(c.tp + c.fn, 1),
                 2 * c.tp / max(2 * c.tp + c.fp + c.fn, 1)) for c in counts.values()]
        total = sum(r[0] for r in rows)
        expect = tuple(sum(r[0] * r[i] for r in rows) / total if total else 0.0 for i in (1, 2, 3))
        got = weighted_report(counts).weighted
        assert got == pytest.approx(expect, abs=1e-12)


@given(st.dictionaries(st.sampled_from(GMB_LABELS), counts_st, min_size=1), st.randoms())
def test_weighted_is_order_invariant(counts, rnd):
    items = list(counts.items())
    rnd.shuffle(items)
    assert weighted_report(dict(items)).weighted == weighted_report(counts).weighted


def test_report_renderings():
    report = weighted_report({"B-geo": Counts(93, 7, 7), "O": Counts(5, 0, 0)}, mode="span")
    doc = json.loads(report.to_json())
    assert doc["weighted"] == {"precision": 0.93, "recall": 0.93, "f1": 0.93}
    assert doc["per_key"]["O"]["excluded"] and doc["mode"] == "span"
    table = report.format_table()
    assert "weighted avg" in table and "0.93" in table and "(excluded)" in table
    with pytest.raises(ValueError):
        weighted_report({}, mode="char")
