"""Reference computations used as independent oracles in the tests.

Everything here enumerates all label sequences or recounts by hand, in
plain Python, so it shares no code path with the package under test.
"""
import itertools
import math

import numpy as np

from textanon.corpus import TagSchema
from textanon.crf import CrfModel
from textanon.features import EncodedSentence, FeatureIndex, FeatureTemplateConfig

GMB_LABELS = (
    "O", "B-geo", "B-gpe", "B-per", "I-geo", "B-org", "I-org", "B-tim",
    "B-art", "I-art", "I-per", "I-gpe", "I-tim", "B-nat",
)


def labels_for(n):
    """A BIO-valid label set of size ``n`` (``n <= 14`` uses the GMB tag set)."""
    if n <= len(GMB_LABELS):
        return GMB_LABELS[:n]
    extra = [f"{p}-x{i}" for i in range(n) for p in "BI"]
    return GMB_LABELS + tuple(extra[: n - len(GMB_LABELS)])


def random_instance(rng, T, L, U=6, scale=2.0, density=0.5, gold=True):
    names = tuple(f"f{i:03d}" for i in range(U))
    index = FeatureIndex(names, TagSchema(labels_for(L)), FeatureTemplateConfig())
    unary = rng.uniform(-scale, scale, size=(U, L))
    trans = rng.uniform(-scale, scale, size=(L, L))
    model = CrfModel(unary, trans, index)
    active = [sorted(np.flatnonzero(rng.random(U) < density).tolist()) for _ in range(T)]
    g = rng.integers(0, L, size=T).tolist() if gold else None
    return model, EncodedSentence.from_active(active, g)


def brute_score(model, enc, labels):
    total = 0.0
    for t, rows in enumerate(enc.active):
        for a in rows:
            total += float(model.unary[int(a), labels[t]])
        if t > 0:
            total += float(model.transition[labels[t - 1], labels[t]])
    return total


def all_sequences(L, T):
    return itertools.product(range(L), repeat=T)


def brute_log_z(model, enc):
    scores = [brute_score(model, enc, y) for y in all_sequences(model.num_labels, enc.length)]
    m = max(scores)
    return m + math.log(math.fsum(math.exp(s - m) for s in scores))


def brute_marginals(model, enc):
    L, T = model.num_labels, enc.length
    log_z = brute_log_z(model, enc)
    node = np.zeros((T, L))
    edge = np.zeros((max(T - 1, 0), L, L))
    for y in all_sequences(L, T):
        p = math.exp(brute_score(model, enc, y) - log_z)
        for t in range(T):
            node[t, y[t]] += p
            if t > 0:
                edge[t - 1, y[t - 1], y[t]] += p
    return node, edge


def brute_argmax(model, enc):
    best, best_y = -math.inf, None
    for y in all_sequences(model.num_labels, enc.length):
        s = brute_score(model, enc, y)
        if s > best:
            best, best_y = s, list(y)
    return best_y, best


def finite_difference_gradient(objective, model, h=1e-5):
    """Central differences over every unary and transition weight."""
    grads = []
    for arr in (model.unary, model.transition):
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + h
            up = objective()
            arr[idx] = orig - h
            down = objective()
            arr[idx] = orig
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads
