"""Single LSTM cell in float64 numpy, with the reverse-mode pass needed
for training. Gate order is input (i), forget (f), output (o), candidate
(g); the forget-gate bias starts at 1.0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GATES = ("i", "f", "o", "g")


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LstmCell:
    input_dim: int
    hidden_dim: int
    W: dict[str, np.ndarray]  # gate -> [hidden, input]
    U: dict[str, np.ndarray]  # gate -> [hidden, hidden]
    b: dict[str, np.ndarray]  # gate -> [hidden]

    def __post_init__(self):
        for gate in GATES:
            if self.W[gate].shape != (self.hidden_dim, self.input_dim):
                raise ValueError(f"W_{gate} shape {self.W[gate].shape}")
            if self.U[gate].shape != (self.hidden_dim, self.hidden_dim):
                raise ValueError(f"U_{gate} shape {self.U[gate].shape}")
            if self.b[gate].shape != (self.hidden_dim,):
                raise ValueError(f"b_{gate} shape {self.b[gate].shape}")

    @classmethod
    def create(cls, input_dim: int, hidden_dim: int,
               rng: np.random.Generator) -> "LstmCell":
        scale = 0.1
        W = {g: rng.uniform(-scale, scale, (hidden_dim, input_dim)) for g in GATES}
        U = {g: rng.uniform(-scale, scale, (hidden_dim, hidden_dim)) for g in GATES}
        b = {g: np.zeros(hidden_dim) for g in GATES}
        b["f"][:] = 1.0
        return cls(input_dim, hidden_dim, W, U, b)

    def zero_like_grads(self) -> dict[str, np.ndarray]:
        grads = {}
        for g in GATES:
            grads[f"W_{g}"] = np.zeros_like(self.W[g])
            grads[f"U_{g}"] = np.zeros_like(self.U[g])
            grads[f"b_{g}"] = np.zeros_like(self.b[g])
        return grads


def lstm_step(
    cell: LstmCell, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """One recurrence step; returns (h, c)."""
    h, c, _ = _step_cached(cell, x, h_prev, c_prev)
    return h, c


def _step_cached(cell, x, h_prev, c_prev):
    if x.shape != (cell.input_dim,) or h_prev.shape != (cell.hidden_dim,):
        raise ValueError(
            f"shape mismatch: x{x.shape}, h{h_prev.shape} for cell "
            f"({cell.input_dim} -> {cell.hidden_dim})"
        )
    pre = {
        g: cell.W[g] @ x + cell.U[g] @ h_prev + cell.b[g] for g in GATES
    }
    i = sigmoid(pre["i"])
    f = sigmoid(pre["f"])
    o = sigmoid(pre["o"])
    g = np.tanh(pre["g"])
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    cache = (x, h_prev, c_prev, i, f, o, g, tanh_c)
    return h, c, cache


def run_sequence(
    cell: LstmCell, inputs: np.ndarray, reverse: bool = False
) -> tuple[np.ndarray, list]:
    """Run over [T, input_dim] rows; returns hidden states [T, hidden] and
    the per-step caches (in time order) for backprop."""
    T = inputs.shape[0]
    hs = np.zeros((T, cell.hidden_dim))
    caches: list = [None] * T
    h = np.zeros(cell.hidden_dim)
    c = np.zeros(cell.hidden_dim)
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        h, c, cache = _step_cached(cell, inputs[t], h, c)
        hs[t] = h
        caches[t] = cache
    return hs, caches


def backprop_sequence(
    cell: LstmCell, caches: list, dh_seq: np.ndarray, reverse: bool = False
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Reverse-mode pass; dh_seq[t] is dLoss/dh_t from above.

    Returns the cell parameter gradients and dLoss/dinputs [T, input_dim].
    """
    T = dh_seq.shape[0]
    grads = cell.zero_like_grads()
    dx = np.zeros((T, cell.input_dim))
    dh_carry = np.zeros(cell.hidden_dim)
    dc_carry = np.zeros(cell.hidden_dim)
    order = range(T) if reverse else range(T - 1, -1, -1)
    for t in order:
        x, h_prev, c_prev, i, f, o, g, tanh_c = caches[t]
        dh = dh_seq[t] + dh_carry
        dc = dc_carry + dh * o * (1.0 - tanh_c * tanh_c)
        da = {
            "o": dh * tanh_c * o * (1.0 - o),
            "f": dc * c_prev * f * (1.0 - f),
            "i": dc * g * i * (1.0 - i),
            "g": dc * i * (1.0 - g * g),
        }
        dh_carry = np.zeros(cell.hidden_dim)
        for gate in GATES:
            grads[f"W_{gate}"] += np.outer(da[gate], x)
            grads[f"U_{gate}"] += np.outer(da[gate], h_prev)
            grads[f"b_{gate}"] += da[gate]
            dh_carry += cell.U[gate].T @ da[gate]
            dx[t] += cell.W[gate].T @ da[gate]
        dc_carry = dc * f
    return grads, dx
