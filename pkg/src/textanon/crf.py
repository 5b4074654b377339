"""Linear-chain conditional random field.

The model scores a label sequence ``y`` for an encoded sentence ``x`` as::

    score(x, y) = sum_t sum_{a in active(t)} unary[a, y_t]
                + sum_{t>=1} transition[y_{t-1}, y_t]

and ``p(y | x) = exp(score(x, y) - log Z(x))``.  There are no separate
start/stop weights: position 0 contributes unary terms only.

All normalisation is done in log space.
"""
from __future__ import annotations

import base64
import json
import logging
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import Sentence
from .errors import DivergenceError, FingerprintMismatch, ModelFormatError
from .features import EncodedSentence, FeatureIndex, FeatureTemplateConfig, encode_sentence

logger = logging.getLogger(__name__)

FORMAT_NAME = "textanon-crf"
FORMAT_VERSION = 1

# An epoch objective this many times above the all-zero starting objective
# is treated as divergence, alongside non-finite values.
DIVERGENCE_RATIO = 1e3


@dataclass
class CrfModel:
    unary: np.ndarray  # (U, L)
    transition: np.ndarray  # (L, L), indexed [previous, current]
    index: FeatureIndex
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.unary = np.asarray(self.unary, dtype=np.float64)
        self.transition = np.asarray(self.transition, dtype=np.float64)
        U, L = self.index.num_features, self.index.num_labels
        if self.unary.shape != (U, L):
            raise ValueError(f"unary weights have shape {self.unary.shape}, expected {(U, L)}")
        if self.transition.shape != (L, L):
            raise ValueError(
                f"transition weights have shape {self.transition.shape}, expected {(L, L)}"
            )
        if not (np.isfinite(self.unary).all() and np.isfinite(self.transition).all()):
            raise ValueError("model weights must be finite")

    @classmethod
    def zeros(cls, index: FeatureIndex) -> "CrfModel":
        U, L = index.num_features, index.num_labels
        return cls(np.zeros((U, L)), np.zeros((L, L)), index)

    @property
    def num_labels(self) -> int:
        return self.index.num_labels

    @property
    def config(self) -> FeatureTemplateConfig:
        return self.index.config

    @property
    def fingerprint(self) -> str:
        return self.index.fingerprint

    @property
    def labels(self) -> tuple[str, ...]:
        return self.index.schema.labels


@dataclass(frozen=True)
class Posterior:
    log_z: float
    node_marginals: np.ndarray  # (T, L)
    edge_marginals: np.ndarray  # (T-1, L, L)


@dataclass(frozen=True)
class TrainConfig:
    l2: float = 1e-4
    epochs: int = 20
    learning_rate: float = 0.1
    batch_size: int = 16
    seed: int = 0
    tolerance: float = 1e-5

    def __post_init__(self):
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")


def _design_matrix(encs: Sequence[EncodedSentence], num_features: int) -> sp.csr_matrix:
    """Stack the sentences' active features into one (sum T) x U 0/1 matrix."""
    if len(encs) == 1:
        enc = encs[0]
        indices, offsets = enc.indices, enc.offsets
    else:
        indices = np.concatenate([e.indices for e in encs])
        offsets = np.zeros(sum(e.length for e in encs) + 1, dtype=np.int64)
        pos, base = 1, 0
        for e in encs:
            offsets[pos : pos + e.length] = e.offsets[1:] + base
            pos += e.length
            base += e.offsets[-1]
    data = np.ones(len(indices))
    return sp.csr_matrix((data, indices, offsets), shape=(len(offsets) - 1, num_features))


def unary_scores(model: CrfModel, enc: EncodedSentence) -> np.ndarray:
    """Per-position label scores, shape (T, L)."""
    return np.asarray(_design_matrix([enc], model.index.num_features) @ model.unary)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = a.max(axis=axis, keepdims=True)
    return np.squeeze(m, axis) + np.log(np.exp(a - m).sum(axis=axis))


def _forward(emit: np.ndarray, trans: np.ndarray) -> np.ndarray:
    T, L = emit.shape
    alpha = np.empty((T, L))
    alpha[0] = emit[0]
    for t in range(1, T):
        alpha[t] = _logsumexp(alpha[t - 1][:, None] + trans, axis=0) + emit[t]
    return alpha


def _backward(emit: np.ndarray, trans: np.ndarray) -> np.ndarray:
    T, L = emit.shape
    beta = np.empty((T, L))
    beta[T - 1] = 0.0
    for t in range(T - 2, -1, -1):
        beta[t] = _logsumexp(trans + (emit[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def _posterior(emit: np.ndarray, trans: np.ndarray) -> Posterior:
    alpha = _forward(emit, trans)
    beta = _backward(emit, trans)
    log_z = float(_logsumexp(alpha[-1], axis=0))
    node = np.exp(alpha + beta - log_z)
    edge = np.exp(
        alpha[:-1, :, None] + trans[None, :, :] + (emit[1:] + beta[1:])[:, None, :] - log_z
    )
    return Posterior(log_z, node, edge)


def _check_labels(enc: EncodedSentence, labels: Sequence[int], num_labels: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (enc.length,):
        raise ValueError(f"{len(labels)} labels for a sentence of length {enc.length}")
    if labels.size and (labels.min() < 0 or labels.max() >= num_labels):
        raise ValueError(f"label indices must lie in [0, {num_labels})")
    return labels


def score_sequence(model: CrfModel, enc: EncodedSentence, labels: Sequence[int]) -> float:
    """Unnormalised log-score of ``labels``."""
    labels = _check_labels(enc, labels, model.num_labels)
    total = 0.0
    for t, rows in enumerate(enc.active):
        total += model.unary[rows, labels[t]].sum()
        if t > 0:
            total += model.transition[labels[t - 1], labels[t]]
    return float(total)


def log_partition(model: CrfModel, enc: EncodedSentence) -> float:
    if enc.length < 1:
        raise ValueError("sentence must have at least one position")
    alpha = _forward(unary_scores(model, enc), model.transition)
    return float(_logsumexp(alpha[-1], axis=0))


def log_partition_backward(model: CrfModel, enc: EncodedSentence) -> float:
    """log Z through the backward recursion; used as a cross-check."""
    emit = unary_scores(model, enc)
    beta = _backward(emit, model.transition)
    return float(_logsumexp(emit[0] + beta[0], axis=0))


def posteriors(model: CrfModel, enc: EncodedSentence) -> Posterior:
    if enc.length < 1:
        raise ValueError("sentence must have at least one position")
    return _posterior(unary_scores(model, enc), model.transition)


def sequence_probability(model: CrfModel, enc: EncodedSentence, labels: Sequence[int]) -> float:
    return float(np.exp(score_sequence(model, enc, labels) - log_partition(model, enc)))


def nll_and_gradient(
    model: CrfModel, batch: Sequence[EncodedSentence], l2: float
) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """Regularised negative log-likelihood of ``batch`` and its gradient.

    Returns ``(objective, (grad_unary, grad_transition))`` where::

        objective = sum_i [log Z(x_i) - score(x_i, y_i)] + l2/2 * ||theta||^2

    The gradient is expected minus empirical feature counts plus ``l2 * theta``.
    """
    L = model.num_labels
    for i, enc in enumerate(batch):
        if enc.gold is None:
            raise ValueError(f"sentence {i} of the batch carries no gold labels")
    X = _design_matrix(batch, model.index.num_features)
    emit_all = np.asarray(X @ model.unary)
    gold_all = np.concatenate([enc.gold for enc in batch])

    objective = 0.0
    node_diff = np.empty_like(emit_all)
    grad_trans = np.zeros((L, L))
    start = 0
    for enc in batch:
        T = enc.length
        emit = emit_all[start : start + T]
        gold = gold_all[start : start + T]
        post = _posterior(emit, model.transition)
        gold_score = emit[np.arange(T), gold].sum() + model.transition[gold[:-1], gold[1:]].sum()
        objective += post.log_z - gold_score
        node_diff[start : start + T] = post.node_marginals
        node_diff[start + np.arange(T), gold] -= 1.0
        if T > 1:
            grad_trans += post.edge_marginals.sum(axis=0)
            np.add.at(grad_trans, (gold[:-1], gold[1:]), -1.0)
        start += T

    grad_unary = np.asarray(X.T @ node_diff)
    if l2:
        objective += 0.5 * l2 * (np.vdot(model.unary, model.unary) + np.vdot(model.transition, model.transition))
        grad_unary += l2 * model.unary
        grad_trans += l2 * model.transition
    return float(objective), (grad_unary, grad_trans)


def train(
    encs: Sequence[EncodedSentence], index: FeatureIndex, cfg: TrainConfig | None = None
) -> CrfModel:
    """Fit weights by mini-batch AdaGrad on the regularised NLL.

    Weights start at zero.  The data gradient drives the per-coordinate
    AdaGrad step ``eta_i = lr / sqrt(sum g_i^2)``; the L2 term is applied in
    closed form as the proximal step ``theta_i / (1 + eta_i * l2_batch)``,
    which stays stable for any regularisation strength.  Each mini-batch
    carries the penalty scaled by ``|batch| / N``, so an epoch's batch
    objectives sum to the full-data objective.  Stops after ``cfg.epochs``
    or once the relative change of the epoch objective drops below
    ``cfg.tolerance``.
    """
    cfg = cfg or TrainConfig()
    encs = list(encs)
    if not encs:
        raise ValueError("training set is empty")
    for i, enc in enumerate(encs):
        if enc.gold is None:
            raise ValueError(f"training sentence {i} carries no gold labels")
    n = len(encs)
    model = CrfModel.zeros(index)
    acc_u = np.zeros_like(model.unary)
    acc_t = np.zeros_like(model.transition)
    eps = 1e-8
    rng = random.Random(cfg.seed)
    order = list(range(n))

    start_objective = sum(e.length for e in encs) * np.log(index.num_labels)
    limit = DIVERGENCE_RATIO * max(start_objective, 1.0)
    history: list[float] = []
    epochs_run = 0
    for epoch in range(1, cfg.epochs + 1):
        rng.shuffle(order)
        epoch_obj = 0.0
        for b in range(0, n, cfg.batch_size):
            batch = [encs[i] for i in order[b : b + cfg.batch_size]]
            l2 = cfg.l2 * len(batch) / n
            obj, (g_u, g_t) = nll_and_gradient(model, batch, 0.0)
            if l2:
                obj += 0.5 * l2 * (np.vdot(model.unary, model.unary) + np.vdot(model.transition, model.transition))
            if not np.isfinite(obj):
                raise DivergenceError(epoch, obj)
            epoch_obj += obj
            for w, g, acc in ((model.unary, g_u, acc_u), (model.transition, g_t, acc_t)):
                acc += g * g
                eta = cfg.learning_rate / (np.sqrt(acc) + eps)
                w -= eta * g
                if l2:
                    w /= 1.0 + eta * l2
        epochs_run = epoch
        if not np.isfinite(epoch_obj) or epoch_obj > limit:
            raise DivergenceError(epoch, epoch_obj)
        if not (np.isfinite(model.unary).all() and np.isfinite(model.transition).all()):
            raise DivergenceError(epoch, float("nan"))
        logger.info("epoch %d objective %.6f", epoch, epoch_obj)
        history.append(float(epoch_obj))
        if len(history) > 1:
            prev = history[-2]
            if abs(prev - epoch_obj) <= cfg.tolerance * max(abs(prev), 1e-300):
                break

    model.metadata = {
        "epochs_run": epochs_run,
        "final_objective": history[-1],
        "objective_history": history,
        "train_config": {
            "l2": cfg.l2,
            "epochs": cfg.epochs,
            "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size,
            "seed": cfg.seed,
            "tolerance": cfg.tolerance,
        },
        "num_sentences": n,
    }
    return model


def viterbi(model: CrfModel, enc: EncodedSentence) -> tuple[list[int], float]:
    """Best label sequence and its score; ties go to the lower label index."""
    if enc.length < 1:
        raise ValueError("sentence must have at least one position")
    emit = unary_scores(model, enc)
    T, L = emit.shape
    delta = emit[0].copy()
    back = np.zeros((T, L), dtype=np.int64)
    for t in range(1, T):
        cand = delta[:, None] + model.transition
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(L)] + emit[t]
    best = int(np.argmax(delta))
    path = [best]
    for t in range(T - 1, 0, -1):
        best = int(back[t, best])
        path.append(best)
    path.reverse()
    return path, float(delta.max())


def tag_sentence(
    model: CrfModel, sentence: Sentence, config: FeatureTemplateConfig | None = None
) -> list[str]:
    config = config or model.config
    if config.fingerprint != model.fingerprint:
        raise FingerprintMismatch(
            f"feature config {config.fingerprint} does not match model {model.fingerprint}"
        )
    enc = encode_sentence(sentence, model.index, config, with_gold=False)
    path, _ = viterbi(model, enc)
    return [model.labels[i] for i in path]


class CrfTagger:
    """Adapter exposing a trained model through the tagger interface."""

    def __init__(self, model: CrfModel, config: FeatureTemplateConfig | None = None):
        self.model = model
        self.config = config or model.config
        if self.config.fingerprint != model.fingerprint:
            raise FingerprintMismatch("feature config does not match the model")

    def tag(self, sentence: Sentence) -> list[str]:
        return tag_sentence(self.model, sentence, self.config)


# -- serialisation ---------------------------------------------------------
#
# Weight arrays are stored as base64 of little-endian IEEE-754 float64, which
# round-trips bit for bit.


def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"dtype": "<f8", "shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode_array(d: dict) -> np.ndarray:
    if d.get("dtype") != "<f8":
        raise ModelFormatError(f"unsupported weight dtype {d.get('dtype')!r}")
    raw = base64.b64decode(d["data"])
    a = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return a.reshape(d["shape"])


def model_to_dict(model: CrfModel) -> dict:
    return {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "features": model.index.to_dict(),
        "weights": {
            "unary": _encode_array(model.unary),
            "transition": _encode_array(model.transition),
        },
        "training": model.metadata,
    }


def dumps_model(model: CrfModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, indent=1) + "\n"


def loads_model(text: str) -> CrfModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFormatError("not a textanon CRF model file")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format version {version!r} (expected {FORMAT_VERSION})"
        )
    try:
        index = FeatureIndex.from_dict(doc["features"])
        unary = _decode_array(doc["weights"]["unary"])
        trans = _decode_array(doc["weights"]["transition"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model file: {exc}") from None
    return CrfModel(unary, trans, index, doc.get("training", {}))


def save_model(model: CrfModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model))


def load_model(path) -> CrfModel:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
