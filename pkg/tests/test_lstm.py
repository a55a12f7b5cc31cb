import numpy as np
import pytest

from oracles import central_difference_gradient, max_relative_error
from raretag.lstm import GATES, LstmCell, backprop_sequence, lstm_step, run_sequence


def zero_cell(input_dim=3, hidden_dim=4, forget_bias=0.0):
    W = {g: np.zeros((hidden_dim, input_dim)) for g in GATES}
    U = {g: np.zeros((hidden_dim, hidden_dim)) for g in GATES}
    b = {g: np.zeros(hidden_dim) for g in GATES}
    b["f"][:] = forget_bias
    return LstmCell(input_dim, hidden_dim, W, U, b)


class TestStep:
    def test_zero_weights_give_zero_state(self):
        cell = zero_cell()
        h, c = lstm_step(cell, np.array([1.0, -2.0, 3.0]), np.zeros(4), np.zeros(4))
        assert np.array_equal(h, np.zeros(4))
        assert np.array_equal(c, np.zeros(4))

    def test_forget_bias_one_with_zero_memory(self):
        cell = zero_cell(forget_bias=1.0)
        h, c = lstm_step(cell, np.zeros(3), np.zeros(4), np.zeros(4))
        assert np.array_equal(c, np.zeros(4))
        assert np.array_equal(h, np.zeros(4))

    def test_forget_gate_carries_memory(self):
        cell = zero_cell(forget_bias=20.0)  # saturated forget gate
        c_prev = np.array([1.0, -1.0, 0.5, 0.0])
        _, c = lstm_step(cell, np.zeros(3), np.zeros(4), c_prev)
        assert np.allclose(c, c_prev, atol=1e-8)

    def test_shape_mismatch_rejected(self):
        cell = zero_cell()
        with pytest.raises(ValueError):
            lstm_step(cell, np.zeros(5), np.zeros(4), np.zeros(4))

    def test_create_initializes_forget_bias_to_one(self):
        cell = LstmCell.create(3, 4, np.random.default_rng(0))
        assert np.all(cell.b["f"] == 1.0)
        assert np.all(cell.b["i"] == 0.0)


class TestSequence:
    def test_reverse_processes_right_to_left(self):
        rng = np.random.default_rng(1)
        cell = LstmCell.create(2, 3, rng)
        X = rng.normal(0, 1, (4, 2))
        hs_rev, _ = run_sequence(cell, X, reverse=True)
        hs_flip, _ = run_sequence(cell, X[::-1])
        assert np.allclose(hs_rev, hs_flip[::-1], atol=1e-12)

    def test_gradient_wrt_inputs_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        cell = LstmCell.create(3, 4, rng)
        X = rng.normal(0, 1, (5, 3))
        weights = rng.normal(0, 1, (5, 4))

        def value():
            hs, _ = run_sequence(cell, X)
            return float(np.sum(hs * weights))

        _, caches = run_sequence(cell, X)
        _, dx = backprop_sequence(cell, caches, weights)
        fd = central_difference_gradient(value, X)
        assert max_relative_error(dx, fd) < 1e-4

    def test_gradient_wrt_parameters_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        cell = LstmCell.create(2, 3, rng)
        X = rng.normal(0, 1, (4, 2))
        weights = rng.normal(0, 1, (4, 3))

        def value():
            hs, _ = run_sequence(cell, X)
            return float(np.sum(hs * weights))

        _, caches = run_sequence(cell, X)
        grads, _ = backprop_sequence(cell, caches, weights)
        for gate in GATES:
            for kind, store in (("W", cell.W), ("U", cell.U), ("b", cell.b)):
                fd = central_difference_gradient(value, store[gate])
                assert max_relative_error(grads[f"{kind}_{gate}"], fd) < 1e-4, (
                    f"{kind}_{gate}"
                )

    def test_reverse_backprop_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        cell = LstmCell.create(2, 3, rng)
        X = rng.normal(0, 1, (4, 2))
        weights = rng.normal(0, 1, (4, 3))

        def value():
            hs, _ = run_sequence(cell, X, reverse=True)
            return float(np.sum(hs * weights))

        _, caches = run_sequence(cell, X, reverse=True)
        grads, dx = backprop_sequence(cell, caches, weights, reverse=True)
        assert max_relative_error(dx, central_difference_gradient(value, X)) < 1e-4
        fd_w = central_difference_gradient(value, cell.W["i"])
        assert max_relative_error(grads["W_i"], fd_w) < 1e-4
