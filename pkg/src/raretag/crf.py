"""Feature-based linear-chain CRF with L-BFGS maximum-likelihood training.

The model scores a tag sequence as the sum of state weights for every
(active feature, tag) pair plus transition weights between adjacent tags.
Training minimizes the L2/L1-regularized negative log-likelihood; the
expected feature counts come from forward-backward marginals. Unseen
test-time features are dropped, never grown into the model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import chain, iob, lbfgs
from .features import DEFAULT_WINDOW, sentence_features
from .iob import TaggedSentence
from .tokenizer import Sentence


@dataclass
class TrainConfig:
    l2_coefficient: float = 1.0
    l1_coefficient: float = 0.0
    max_iterations: int = 100
    convergence_tol: float = 1e-5
    lbfgs_memory: int = 6
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if min(self.l2_coefficient, self.l1_coefficient) < 0:
            raise ValueError("regularization coefficients must be >= 0")
        if self.max_iterations < 0 or self.lbfgs_memory < 1:
            raise ValueError("invalid iteration/memory settings")


@dataclass
class CrfModel:
    label_set: list[str]
    feature_index: dict[str, int]
    state_weights: np.ndarray  # [num_features, num_labels]
    transition_weights: np.ndarray  # [num_labels, num_labels]
    window: int = DEFAULT_WINDOW
    label_index: dict[str, int] = field(init=False)

    def __post_init__(self):
        F, L = len(self.feature_index), len(self.label_set)
        if self.state_weights.shape != (F, L):
            raise ValueError(f"state_weights shape {self.state_weights.shape} "
                             f"does not match ({F}, {L})")
        if self.transition_weights.shape != (L, L):
            raise ValueError("transition_weights shape mismatch")
        if not (np.isfinite(self.state_weights).all()
                and np.isfinite(self.transition_weights).all()):
            raise ValueError("model weights must be finite")
        self.label_index = {lab: i for i, lab in enumerate(self.label_set)}

    def index_tokens(self, token_features: list[list[str]]) -> list[np.ndarray]:
        """Map feature strings to indices, dropping unseen features."""
        return [
            np.array(
                [self.feature_index[f] for f in feats if f in self.feature_index],
                dtype=np.intp,
            )
            for feats in token_features
        ]

    def state_scores(self, indexed: list[np.ndarray]) -> np.ndarray:
        scores = np.zeros((len(indexed), len(self.label_set)))
        for t, idx in enumerate(indexed):
            if idx.size:
                scores[t] = self.state_weights[idx].sum(axis=0)
        return scores


def make_zero_model(
    label_set: list[str], feature_index: dict[str, int], window: int = DEFAULT_WINDOW
) -> CrfModel:
    F, L = len(feature_index), len(label_set)
    return CrfModel(list(label_set), dict(feature_index),
                    np.zeros((F, L)), np.zeros((L, L)), window)


def log_partition(model: CrfModel, token_features: list[list[str]]) -> float:
    """log Z of the model over one sentence's feature vectors."""
    if not token_features:
        raise ValueError("cannot compute log partition of an empty sentence")
    scores = model.state_scores(model.index_tokens(token_features))
    return chain.log_partition(scores, model.transition_weights)


def marginals(
    model: CrfModel, token_features: list[list[str]]
) -> tuple[float, np.ndarray, np.ndarray]:
    if not token_features:
        raise ValueError("cannot compute marginals of an empty sentence")
    scores = model.state_scores(model.index_tokens(token_features))
    return chain.forward_backward(scores, model.transition_weights)


def _flatten(state: np.ndarray, trans: np.ndarray) -> np.ndarray:
    return np.concatenate([state.ravel(), trans.ravel()])


def _unflatten(w: np.ndarray, F: int, L: int) -> tuple[np.ndarray, np.ndarray]:
    return w[: F * L].reshape(F, L), w[F * L :].reshape(L, L)


def _batch_nll_grad(
    w: np.ndarray,
    indexed_batch: list[tuple[list[np.ndarray], np.ndarray]],
    F: int,
    L: int,
    l2: float,
) -> tuple[float, np.ndarray]:
    """Sum of per-sentence NLL plus the L2 term, with its gradient."""
    state, trans = _unflatten(w, F, L)
    grad_state = np.zeros_like(state)
    grad_trans = np.zeros_like(trans)
    nll = 0.0
    for indexed, gold in indexed_batch:
        scores = np.zeros((len(indexed), L))
        for t, idx in enumerate(indexed):
            if idx.size:
                scores[t] = state[idx].sum(axis=0)
        log_z, unary, pairwise = chain.forward_backward(scores, trans)
        nll += log_z - chain.sequence_score(scores, trans, gold)
        expected = unary.copy()
        expected[np.arange(len(gold)), gold] -= 1.0
        for t, idx in enumerate(indexed):
            if idx.size:
                np.add.at(grad_state, idx, expected[t])
        if len(gold) > 1:
            grad_trans += pairwise.sum(axis=0)
            np.add.at(grad_trans, (gold[:-1], gold[1:]), -1.0)
    value = nll + 0.5 * l2 * float(np.dot(w, w))
    grad = _flatten(grad_state, grad_trans) + l2 * w
    return value, grad


def _index_batch(
    model: CrfModel, batch: list[tuple[list[list[str]], list[str]]]
) -> list[tuple[list[np.ndarray], np.ndarray]]:
    indexed_batch = []
    for token_features, tags in batch:
        if not token_features:
            raise ValueError("batch contains an empty sentence")
        if len(token_features) != len(tags):
            raise ValueError("feature/tag length mismatch")
        try:
            gold = np.array([model.label_index[t] for t in tags], dtype=np.intp)
        except KeyError as err:
            raise ValueError(f"unknown label in gold tags: {err}") from None
        indexed_batch.append((model.index_tokens(token_features), gold))
    return indexed_batch


def nll_and_gradient(
    model: CrfModel,
    batch: list[tuple[list[list[str]], list[str]]],
    config: TrainConfig,
) -> tuple[float, np.ndarray]:
    """Regularized NLL and its gradient over (state, transition) weights.

    The value includes both the L2 and L1 penalties; the gradient carries
    only the smooth (L2) term since the L1 part is handled orthant-wise
    by the optimizer. Gradient layout: state weights row-major, then
    transitions.
    """
    if not batch:
        raise ValueError("empty batch")
    F, L = len(model.feature_index), len(model.label_set)
    w = _flatten(model.state_weights, model.transition_weights)
    value, grad = _batch_nll_grad(
        w, _index_batch(model, batch), F, L, config.l2_coefficient
    )
    value += config.l1_coefficient * float(np.abs(w).sum())
    return value, grad


def build_feature_index(
    sentences: list[TaggedSentence], window: int = DEFAULT_WINDOW
) -> dict[str, int]:
    index: dict[str, int] = {}
    for ts in sentences:
        for feats in sentence_features(Sentence(ts.tokens), window):
            for f in feats:
                if f not in index:
                    index[f] = len(index)
    return index


def train(
    sentences: list[TaggedSentence],
    config: TrainConfig | None = None,
    label_set: list[str] | None = None,
    progress=None,
) -> tuple[CrfModel, lbfgs.OptimizeResult]:
    """Fit a CRF on tagged sentences; returns the model and optimizer info.

    The feature index is built from the training data only. With
    max_iterations=0 the returned model keeps its all-zero initialization.
    """
    if not sentences:
        raise ValueError("no training sentences")
    config = config or TrainConfig()
    labels = list(label_set) if label_set else list(iob.TAGS)
    feature_index = build_feature_index(sentences, config.window)
    model = make_zero_model(labels, feature_index, config.window)
    batch = [
        (sentence_features(Sentence(ts.tokens), config.window), ts.tags)
        for ts in sentences
    ]
    indexed = _index_batch(model, batch)
    F, L = len(feature_index), len(labels)

    def objective(w: np.ndarray) -> tuple[float, np.ndarray]:
        return _batch_nll_grad(w, indexed, F, L, config.l2_coefficient)

    result = lbfgs.minimize(
        objective,
        _flatten(model.state_weights, model.transition_weights),
        memory=config.lbfgs_memory,
        max_iterations=config.max_iterations,
        tol=config.convergence_tol,
        l1=config.l1_coefficient,
        callback=progress,
    )
    state, trans = _unflatten(result.x, F, L)
    return CrfModel(labels, feature_index, state, trans, config.window), result


def iob_decode_masks(label_set: list[str]) -> tuple[np.ndarray, np.ndarray]:
    """(start_allowed[L], transition_allowed[L, L]) boolean masks.

    An I-X label needs a same-type B-X/I-X predecessor and may not start
    a sentence. Labels that do not parse as IOB tags are unconstrained.
    """
    L = len(label_set)
    start = np.ones(L, dtype=bool)
    trans = np.ones((L, L), dtype=bool)
    parts = []
    for lab in label_set:
        try:
            parts.append(iob.tag_parts(lab))
        except iob.IobError:
            parts.append((None, None))
    for j, (prefix_j, name_j) in enumerate(parts):
        if prefix_j != "I":
            continue
        start[j] = False
        for i, (prefix_i, name_i) in enumerate(parts):
            if prefix_i is None or name_i != name_j:
                trans[i, j] = False
    return start, trans


def viterbi(
    model: CrfModel, token_features: list[list[str]], constrained: bool = False
) -> list[str]:
    """Highest-scoring tag sequence for one sentence's features."""
    if not token_features:
        raise ValueError("cannot decode an empty sentence")
    scores = model.state_scores(model.index_tokens(token_features))
    start_mask = trans_mask = None
    if constrained:
        start_mask, trans_mask = iob_decode_masks(model.label_set)
    path = chain.viterbi(
        scores, model.transition_weights, start_mask, trans_mask
    )
    return [model.label_set[i] for i in path]


def predict_tags(
    model: CrfModel, sentence: Sentence, constrained: bool = False
) -> list[str]:
    return viterbi(model, sentence_features(sentence, model.window), constrained)
