"""Tensor-library oracles: frozen forward values, hand chain-rule gradients,
the finite-difference checker, and checkpoint round-trips."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sentorder import autodiff as ad

SIGMOID_1 = 0.7310585786300049


def param(data, name="p"):
    return ad.Parameter(np.asarray(data, dtype=np.float64), name)


class TestElementwise:
    def test_sigmoid_zero(self):
        assert ad.sigmoid(ad.Tensor([[0.0]])).item() == 0.5

    def test_sigmoid_one(self):
        assert ad.sigmoid(ad.Tensor([[1.0]])).item() == pytest.approx(SIGMOID_1, abs=1e-12)

    def test_softmax_uniform(self):
        out = ad.softmax_rows(ad.Tensor([[0.0, 0.0]]))
        np.testing.assert_allclose(out.data, [[0.5, 0.5]])

    @given(st.lists(st.lists(st.floats(-50, 50), min_size=1, max_size=6),
                    min_size=1, max_size=5).filter(
                        lambda rows: len({len(r) for r in rows}) == 1))
    def test_softmax_rows_sum_to_one(self, rows):
        out = ad.softmax_rows(ad.Tensor(np.asarray(rows)))
        np.testing.assert_allclose(out.data.sum(axis=1), 1.0, atol=1e-12)

    def test_activation_rejects_non_finite(self):
        with pytest.raises(ad.NumericError):
            ad.activation("tanh", ad.Tensor([[np.nan]]))


class TestAffine:
    def test_zero_weights(self):
        out = ad.affine(ad.Tensor([[1.0, 2.0]]), param(np.zeros((2, 3))),
                        param(np.zeros(3)))
        np.testing.assert_array_equal(out.data, [[0.0, 0.0, 0.0]])

    def test_identity(self):
        out = ad.affine(ad.Tensor([[1.0, 0.0]]), param(np.eye(2)), param(np.zeros(2)))
        np.testing.assert_array_equal(out.data, [[1.0, 0.0]])

    def test_hand_case(self):
        out = ad.affine(ad.Tensor([[1.0, 2.0]]), param(np.ones((2, 2))),
                        param([0.5, 0.5]))
        np.testing.assert_array_equal(out.data, [[3.5, 3.5]])


class TestGruCell:
    def grus(self, **named):
        # all-zero gates unless overridden
        vals = {f"{w}{g}": np.zeros((1, 1)) for w in "wu" for g in "zrh"}
        vals.update({f"b{g}": np.zeros(1) for g in "zrh"})
        vals.update(named)
        return ad.GruParams({k: param(v, k) for k, v in vals.items()})

    def test_zero_params_halve_state(self):
        p = self.grus()
        h = ad.gru_cell(ad.Tensor([[2.0]]), ad.Tensor([[1.0]]), p)
        assert h.item() == 0.5
        h0 = ad.gru_cell(ad.Tensor([[2.0]]), ad.Tensor([[0.0]]), p)
        assert h0.item() == 0.0

    def test_scalar_hand_case(self):
        # only the candidate input weight is live: h' = 0.5 * tanh(x)
        p = self.grus(wh=np.ones((1, 1)))
        h = ad.gru_cell(ad.Tensor([[1.0]]), ad.Tensor([[0.0]]), p)
        assert h.item() == pytest.approx(0.3807970779778824, abs=1e-12)

    @given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**32 - 1))
    def test_output_between_prev_and_candidate(self, x, h_prev, seed):
        # h' = (1-z) h + z hhat is a convex combination of the two
        rng = np.random.default_rng(seed)
        vals = {f"{w}{g}": rng.uniform(-1, 1, (1, 1)) for w in "wu" for g in "zrh"}
        vals.update({f"b{g}": rng.uniform(-1, 1, 1) for g in "zrh"})
        p = ad.GruParams({k: param(v, k) for k, v in vals.items()})
        r = 1.0 / (1.0 + np.exp(-(x * p.wr.data[0, 0] + h_prev * p.ur.data[0, 0]
                                  + p.br.data[0])))
        hhat = np.tanh(x * p.wh.data[0, 0] + r * h_prev * p.uh.data[0, 0]
                       + p.bh.data[0])
        h = ad.gru_cell(ad.Tensor([[x]]), ad.Tensor([[h_prev]]), p).item()
        lo, hi = min(h_prev, hhat), max(h_prev, hhat)
        assert lo - 1e-12 <= h <= hi + 1e-12


class TestLstm:
    def zeros(self, hidden=1, in_dim=1):
        return ad.LstmParams(param(np.zeros((in_dim, 4 * hidden)), "wx"),
                             param(np.zeros((hidden, 4 * hidden)), "wh"),
                             param(np.zeros(4 * hidden), "b"))

    def test_zero_state_fixed_point(self):
        h, c = ad.lstm_step(ad.Tensor([[3.0]]),
                            (ad.Tensor([[0.0]]), ad.Tensor([[0.0]])), self.zeros())
        assert h.item() == 0.0 and c.item() == 0.0

    def test_zero_params_carry_half_cell(self):
        h, c = ad.lstm_step(ad.Tensor([[3.0]]),
                            (ad.Tensor([[0.0]]), ad.Tensor([[1.0]])), self.zeros())
        assert c.item() == pytest.approx(0.5, abs=1e-15)
        assert h.item() == pytest.approx(0.23105857863000487, abs=1e-12)

    def test_saturated_forget_gate_preserves_cell(self):
        p = self.zeros()
        p.b.data[1] = 50.0  # forget gate pinned open
        h, c = ad.lstm_step(ad.Tensor([[0.0]]),
                            (ad.Tensor([[0.0]]), ad.Tensor([[2.0]])), p)
        assert c.item() == pytest.approx(2.0, abs=1e-9)
        assert h.item() == pytest.approx(0.5 * np.tanh(2.0), abs=1e-9)

    def test_seq_matches_stepwise(self):
        rng = np.random.default_rng(5)
        p = ad.LstmParams(param(rng.uniform(-0.5, 0.5, (3, 8)), "wx"),
                          param(rng.uniform(-0.5, 0.5, (2, 8)), "wh"),
                          param(rng.uniform(-0.5, 0.5, 8), "b"))
        x = rng.uniform(-1, 1, (6, 3))
        h_all = ad.lstm_seq(ad.Tensor(x), p)
        h = ad.Tensor(np.zeros((1, 2)))
        c = ad.Tensor(np.zeros((1, 2)))
        for t in range(6):
            h, c = ad.lstm_step(ad.Tensor(x[t:t + 1]), (h, c), p)
            np.testing.assert_allclose(h_all.data[t], h.data[0], atol=1e-12)

    def test_seq_reverse_runs_backward_in_time(self):
        rng = np.random.default_rng(6)
        p = ad.LstmParams(param(rng.uniform(-0.5, 0.5, (2, 4)), "wx"),
                          param(rng.uniform(-0.5, 0.5, (1, 4)), "wh"),
                          param(rng.uniform(-0.5, 0.5, 4), "b"))
        x = rng.uniform(-1, 1, (4, 2))
        fwd_on_flipped = ad.lstm_seq(ad.Tensor(x[::-1].copy()), p)
        rev = ad.lstm_seq(ad.Tensor(x), p, reverse=True)
        np.testing.assert_allclose(rev.data, fwd_on_flipped.data[::-1], atol=1e-15)


class TestBackward:
    def test_affine_weight_gradient(self):
        w = param(np.zeros((2, 3)), "w")
        loss = ad.sum_all(ad.affine(ad.Tensor([[1.0, 2.0]]), w, param(np.zeros(3), "b")))
        ad.backward(loss)
        np.testing.assert_array_equal(w.grad, [[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])

    def test_unused_parameter_gets_no_gradient(self):
        w = param([[1.0]], "w")
        unused = param([[5.0]], "unused")
        ad.backward(ad.sum_all(ad.mul(w, w)))
        assert unused.grad is None

    def test_sigmoid_slope_at_zero(self):
        w = param([[0.0]], "w")
        ad.backward(ad.sigmoid(ad.mul(w, ad.Tensor([[1.0]]))))
        assert w.grad[0, 0] == pytest.approx(0.25, abs=1e-15)

    def test_backward_requires_scalar(self):
        w = param([[1.0, 2.0]], "w")
        with pytest.raises(ad.ShapeError):
            ad.backward(ad.mul(w, w))

    def test_gradients_accumulate_until_zeroed(self):
        w = param([[1.0]], "w")
        for _ in range(2):
            ad.backward(ad.sum_all(ad.mul(w, ad.Tensor([[1.0]]))))
        assert w.grad[0, 0] == 2.0
        w.zero_grad()
        assert w.grad is None

    def test_backward_consumes_tape(self):
        w = param([[1.0]], "w")
        ad.backward(ad.sum_all(ad.mul(w, w)))
        assert ad.tape_size() == 0

    def test_no_grad_records_nothing(self):
        w = param([[1.0]], "w")
        with ad.no_grad():
            ad.mul(w, w)
        assert ad.tape_size() == 0


class TestGradCheck:
    def test_square_function(self):
        w = param([[3.0]], "w")
        err = ad.grad_check(lambda: ad.sum_all(ad.mul(w, w)), [w], eps=1e-5)
        assert err <= 1e-7

    def test_constant_function(self):
        w = param([[3.0]], "w")
        err = ad.grad_check(lambda: ad.sum_all(ad.Tensor([[1.0]])), [w])
        assert err == 0.0

    def test_composite_network(self):
        rng = np.random.default_rng(11)
        w1 = param(rng.uniform(-0.5, 0.5, (3, 4)), "w1")
        b1 = param(rng.uniform(-0.5, 0.5, 4), "b1")
        w2 = param(rng.uniform(-0.5, 0.5, (4, 1)), "w2")
        x = ad.Tensor(rng.uniform(-1, 1, (2, 3)))

        def f():
            h = ad.tanh(ad.affine(x, w1, b1))
            return ad.sum_all(ad.sigmoid(ad.matmul(h, w2)))

        assert ad.grad_check(f, [w1, b1, w2], eps=1e-5) <= 1e-7

    def test_rejects_bad_eps(self):
        w = param([[1.0]], "w")
        with pytest.raises(ValueError):
            ad.grad_check(lambda: ad.sum_all(w), [w], eps=0.0)


class TestParamsAndCheckpoints:
    def test_init_range_and_determinism(self):
        a = ad.ModelParams(seed=3).new("w", (50, 40))
        b = ad.ModelParams(seed=3).new("w", (50, 40))
        assert np.abs(a.data).max() <= 0.08
        assert a.data.std() > 0.01
        np.testing.assert_array_equal(a.data, b.data)

    def test_duplicate_name_rejected(self):
        mp = ad.ModelParams()
        mp.new("w", (1,))
        with pytest.raises(ValueError):
            mp.new("w", (1,))

    def test_save_load_round_trip(self, tmp_path):
        mp = ad.ModelParams(seed=1)
        mp.new("a", (2, 3))
        mp.new("b", (4,))
        path = tmp_path / "ckpt.json"
        mp.save(str(path))
        other = ad.ModelParams(seed=99)
        other.new("a", (2, 3))
        other.new("b", (4,))
        other.load_state(ad.load_checkpoint_doc(str(path))["params"])
        np.testing.assert_array_equal(other["a"].data, mp["a"].data)
        np.testing.assert_array_equal(other["b"].data, mp["b"].data)

    def test_name_mismatch_rejected(self):
        mp = ad.ModelParams()
        mp.new("a", (1,))
        with pytest.raises(ad.CheckpointError, match="name mismatch"):
            mp.load_state({"z": {"shape": [1], "values": [0.0]}})

    def test_shape_mismatch_rejected(self):
        mp = ad.ModelParams()
        mp.new("a", (2,))
        with pytest.raises(ad.CheckpointError, match="shape mismatch"):
            mp.load_state({"a": {"shape": [3], "values": [0.0, 0.0, 0.0]}})

    def test_unknown_format_version_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format_version": 99, "params": {}}')
        with pytest.raises(ad.CheckpointError, match="format_version"):
            ad.load_checkpoint_doc(str(path))
