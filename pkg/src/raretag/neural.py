"""BiLSTM sequence tagger with a per-token softmax head or a CRF head.

Everything runs in float64 on the CPU with sentences unrolled at their
natural length (no padding), which keeps the arithmetic exact enough for
finite-difference gradient checks. Training is Adam with bias correction,
global-norm gradient clipping and patience-based early stopping on the
validation loss; given a fixed seed a run is fully deterministic.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import chain
from .crf import iob_decode_masks
from .embeddings import EmbeddingTable
from .iob import TAGS, TaggedSentence
from .lstm import LstmCell, backprop_sequence, run_sequence
from .tokenizer import Token

HEAD_SOFTMAX = "softmax"
HEAD_CRF = "crf"


@dataclass
class FitConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_epochs: int = 50
    patience: int = 4
    batch_size: int = 32
    hidden_dim: int = 100
    seed: int = 0
    gradient_clip_norm: float = 5.0
    dropout: float = 0.0  # accepted for forward compatibility; currently a no-op

    def __post_init__(self):
        if self.learning_rate < 0 or self.max_epochs < 0:
            raise ValueError("learning_rate and max_epochs must be >= 0")
        if min(self.patience, self.batch_size, self.hidden_dim) < 1:
            raise ValueError("patience, batch_size, hidden_dim must be >= 1")
        if self.gradient_clip_norm <= 0:
            raise ValueError("gradient_clip_norm must be positive")


@dataclass
class BiLstmTagger:
    label_set: list[str]
    head_kind: str  # "softmax" or "crf"
    embedding: EmbeddingTable  # materialized over the training vocabulary
    embedding_trainable: bool
    forward_cell: LstmCell
    backward_cell: LstmCell
    head_W: np.ndarray  # [labels, 2*hidden]
    head_b: np.ndarray  # [labels]
    transitions: np.ndarray | None  # [labels, labels], CRF head only
    label_index: dict[str, int] = field(init=False)

    def __post_init__(self):
        if self.head_kind not in (HEAD_SOFTMAX, HEAD_CRF):
            raise ValueError(f"unknown head kind {self.head_kind!r}")
        L = len(self.label_set)
        two_h = 2 * self.forward_cell.hidden_dim
        if self.head_W.shape != (L, two_h):
            raise ValueError(f"head_W shape {self.head_W.shape} != ({L}, {two_h})")
        if self.head_kind == HEAD_CRF:
            if self.transitions is None or self.transitions.shape != (L, L):
                raise ValueError("CRF head requires a [L, L] transition matrix")
        self.label_index = {lab: i for i, lab in enumerate(self.label_set)}

    @property
    def hidden_dim(self) -> int:
        return self.forward_cell.hidden_dim

    def parameters(self) -> dict[str, np.ndarray]:
        """Live parameter arrays, keyed for optimizers and checkpoints."""
        params: dict[str, np.ndarray] = {}
        if self.embedding_trainable:
            params["embedding"] = self.embedding.matrix
        for prefix, cell in (("fw", self.forward_cell), ("bw", self.backward_cell)):
            for gate in "ifog":
                params[f"{prefix}.W_{gate}"] = cell.W[gate]
                params[f"{prefix}.U_{gate}"] = cell.U[gate]
                params[f"{prefix}.b_{gate}"] = cell.b[gate]
        params["head.W"] = self.head_W
        params["head.b"] = self.head_b
        if self.transitions is not None:
            params["transitions"] = self.transitions
        return params


def build_tagger(
    train_sentences: list[TaggedSentence],
    source_table: EmbeddingTable,
    head_kind: str = HEAD_CRF,
    hidden_dim: int = 100,
    seed: int = 0,
    train_embeddings: bool | None = None,
    label_set: list[str] | None = None,
) -> BiLstmTagger:
    """Materialize embeddings over the training vocabulary and init weights.

    ``train_embeddings`` defaults to the table's origin: trainable for
    randomly initialized tables (the network adjusts them), frozen for
    pretrained files; pass an explicit bool to override either way.
    """
    if not train_sentences:
        raise ValueError("no training sentences")
    vocab = sorted({tok.surface for ts in train_sentences for tok in ts.tokens})
    matrix = np.vstack([source_table.lookup(w) for w in vocab])
    table = EmbeddingTable(
        source_table.dim,
        {w: i for i, w in enumerate(vocab)},
        matrix,
        source_table.oov_policy,
        source_table.seed,
        origin=source_table.origin,
    )
    if train_embeddings is None:
        train_embeddings = source_table.origin == "random"
    rng = np.random.default_rng(seed)
    labels = list(label_set) if label_set else list(TAGS)
    L = len(labels)
    fw = LstmCell.create(source_table.dim, hidden_dim, rng)
    bw = LstmCell.create(source_table.dim, hidden_dim, rng)
    head_W = rng.uniform(-0.1, 0.1, (L, 2 * hidden_dim))
    head_b = np.zeros(L)
    transitions = np.zeros((L, L)) if head_kind == HEAD_CRF else None
    return BiLstmTagger(
        labels, head_kind, table, bool(train_embeddings), fw, bw,
        head_W, head_b, transitions,
    )


def _embed(tagger: BiLstmTagger, tokens: list[Token]) -> tuple[np.ndarray, list[int]]:
    """Input matrix [T, dim] and per-token row index (-1 for OOV)."""
    vocab = tagger.embedding.vocab
    rows = []
    X = np.empty((len(tokens), tagger.embedding.dim))
    for t, tok in enumerate(tokens):
        row = vocab.get(tok.surface)
        if row is None:
            row = vocab.get(tok.surface.lower())
        rows.append(-1 if row is None else row)
        X[t] = tagger.embedding.lookup(tok.surface)
    return X, rows


def _forward_raw(tagger: BiLstmTagger, tokens: list[Token]):
    if not tokens:
        raise ValueError("cannot run the tagger on an empty sentence")
    X, rows = _embed(tagger, tokens)
    hs_f, caches_f = run_sequence(tagger.forward_cell, X)
    hs_b, caches_b = run_sequence(tagger.backward_cell, X, reverse=True)
    H = np.hstack([hs_f, hs_b])  # [T, 2*hidden]
    raw = H @ tagger.head_W.T + tagger.head_b  # [T, L]
    return raw, (X, rows, caches_f, caches_b, H)


def _softmax_rows(raw: np.ndarray) -> np.ndarray:
    shifted = raw - raw.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward_sentence(tagger: BiLstmTagger, tokens: list[Token]) -> np.ndarray:
    """Per-token label scores [T, L]; softmax head rows are normalized."""
    raw, _ = _forward_raw(tagger, tokens)
    return _softmax_rows(raw) if tagger.head_kind == HEAD_SOFTMAX else raw


def _gold_indices(tagger: BiLstmTagger, ts: TaggedSentence) -> np.ndarray:
    try:
        return np.array([tagger.label_index[t] for t in ts.tags], dtype=np.intp)
    except KeyError as err:
        raise ValueError(f"unknown label in gold tags: {err}") from None


def loss(tagger: BiLstmTagger, batch: list[TaggedSentence]) -> float:
    """Mean per-token cross-entropy (softmax head) or mean per-sentence
    sequence NLL (CRF head)."""
    value, _ = _loss_impl(tagger, batch, want_grads=False)
    return value


def loss_and_gradients(
    tagger: BiLstmTagger, batch: list[TaggedSentence]
) -> tuple[float, dict[str, np.ndarray]]:
    return _loss_impl(tagger, batch, want_grads=True)


def _loss_impl(tagger, batch, want_grads):
    if not batch:
        raise ValueError("empty batch")
    L = len(tagger.label_set)
    grads: dict[str, np.ndarray] = {}
    if want_grads:
        grads = {k: np.zeros_like(v) for k, v in tagger.parameters().items()}
    total_tokens = sum(len(ts.tokens) for ts in batch)
    denom = total_tokens if tagger.head_kind == HEAD_SOFTMAX else len(batch)
    total = 0.0
    for ts in batch:
        gold = _gold_indices(tagger, ts)
        raw, cache = _forward_raw(tagger, ts.tokens)
        T = raw.shape[0]
        if tagger.head_kind == HEAD_SOFTMAX:
            probs = _softmax_rows(raw)
            picked = probs[np.arange(T), gold]
            total += float(-np.log(picked).sum())
            if want_grads:
                d_raw = probs.copy()
                d_raw[np.arange(T), gold] -= 1.0
                d_raw /= denom
        else:
            log_z, unary, pairwise = chain.forward_backward(raw, tagger.transitions)
            total += log_z - chain.sequence_score(raw, tagger.transitions, gold)
            if want_grads:
                d_raw = unary.copy()
                d_raw[np.arange(T), gold] -= 1.0
                d_raw /= denom
                if T > 1:
                    d_trans = pairwise.sum(axis=0)
                    np.add.at(d_trans, (gold[:-1], gold[1:]), -1.0)
                    grads["transitions"] += d_trans / denom
        if want_grads:
            _backprop_sentence(tagger, cache, d_raw, grads)
    value = total / denom
    if not math.isfinite(value):
        raise FloatingPointError(f"non-finite loss {value!r}")
    return value, grads


def _backprop_sentence(tagger, cache, d_raw, grads):
    X, rows, caches_f, caches_b, H = cache
    hidden = tagger.hidden_dim
    grads["head.W"] += d_raw.T @ H
    grads["head.b"] += d_raw.sum(axis=0)
    dH = d_raw @ tagger.head_W  # [T, 2*hidden]
    cell_grads_f, dX_f = backprop_sequence(
        tagger.forward_cell, caches_f, dH[:, :hidden]
    )
    cell_grads_b, dX_b = backprop_sequence(
        tagger.backward_cell, caches_b, dH[:, hidden:], reverse=True
    )
    for key, grad in cell_grads_f.items():
        grads[f"fw.{key}"] += grad
    for key, grad in cell_grads_b.items():
        grads[f"bw.{key}"] += grad
    if tagger.embedding_trainable:
        dX = dX_f + dX_b
        for t, row in enumerate(rows):
            if row >= 0:
                grads["embedding"][row] += dX[t]


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm and total > 0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


class AdamOptimizer:
    def __init__(self, params: dict[str, np.ndarray], config: FitConfig):
        self.params = params
        self.config = config
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        c = self.config
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for key, param in self.params.items():
            g = grads[key]
            m = self.m[key]
            v = self.v[key]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * (g * g)
            param -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.epsilon)


class EarlyStopping:
    """Stop after `patience` consecutive epochs without improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.stale = 0

    def update(self, epoch: int, value: float) -> bool:
        """Record an epoch's monitored value; True means stop now."""
        if value < self.best:
            self.best = value
            self.best_epoch = epoch
            self.stale = 0
            return False
        self.stale += 1
        return self.stale >= self.patience


@dataclass
class FitHistory:
    epochs: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for e, tr, va in zip(self.epochs, self.train_loss, self.val_loss):
            writer.writerow([e, f"{tr:.10g}", f"{va:.10g}"])
        return buf.getvalue()


def _snapshot(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in params.items()}


def _restore(params: dict[str, np.ndarray], snap: dict[str, np.ndarray]) -> None:
    for k, v in params.items():
        v[...] = snap[k]


def fit(
    tagger: BiLstmTagger,
    train: list[TaggedSentence],
    validation: list[TaggedSentence],
    config: FitConfig,
    progress=None,
) -> tuple[BiLstmTagger, FitHistory]:
    """Train in place; returns the tagger holding the best-epoch weights.

    Stops when the validation loss has not improved for `patience`
    consecutive epochs (or at max_epochs) and restores the parameters
    from the best epoch.
    """
    if not train or not validation:
        raise ValueError("train and validation splits must be non-empty")
    params = tagger.parameters()
    optimizer = AdamOptimizer(params, config)
    stopper = EarlyStopping(config.patience)
    rng = np.random.default_rng(config.seed)
    history = FitHistory()
    best_params = _snapshot(params)

    order = np.arange(len(train))
    for epoch in range(1, config.max_epochs + 1):
        rng.shuffle(order)
        loss_sum = 0.0
        weight_sum = 0
        for start in range(0, len(order), config.batch_size):
            batch = [train[i] for i in order[start : start + config.batch_size]]
            try:
                value, grads = loss_and_gradients(tagger, batch)
            except FloatingPointError as err:
                raise FloatingPointError(
                    f"epoch {epoch}, batch at index {start}: {err}"
                ) from None
            clip_gradients(grads, config.gradient_clip_norm)
            optimizer.step(grads)
            # weight by the batch's own denominator so the epoch loss is a
            # true dataset mean (and batch-partition invariant at lr=0)
            weight = (sum(len(ts.tokens) for ts in batch)
                      if tagger.head_kind == HEAD_SOFTMAX else len(batch))
            loss_sum += value * weight
            weight_sum += weight
        train_loss = loss_sum / weight_sum
        val_loss = loss(tagger, validation)
        history.epochs.append(epoch)
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        improved = val_loss < stopper.best
        stop = stopper.update(epoch, val_loss)
        if improved:
            best_params = _snapshot(params)
        if progress is not None:
            progress(epoch, train_loss, val_loss)
        if stop:
            break
    history.best_epoch = stopper.best_epoch
    history.stopped_epoch = history.epochs[-1] if history.epochs else 0
    _restore(params, best_params)
    return tagger, history


def predict(
    tagger: BiLstmTagger, tokens: list[Token], constrained: bool = False
) -> list[str]:
    """IOB tags for one sentence.

    Softmax head: per-token argmax (ties go to the lower label index).
    CRF head: Viterbi over the projected scores and transition matrix,
    optionally with hard IOB2 constraints.
    """
    raw, _ = _forward_raw(tagger, tokens)
    if tagger.head_kind == HEAD_SOFTMAX:
        indices = np.argmax(raw, axis=1)
        return [tagger.label_set[i] for i in indices]
    start_mask = trans_mask = None
    if constrained:
        start_mask, trans_mask = iob_decode_masks(tagger.label_set)
    path = chain.viterbi(raw, tagger.transitions, start_mask, trans_mask)
    return [tagger.label_set[i] for i in path]
