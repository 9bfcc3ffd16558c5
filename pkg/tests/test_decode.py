"""Pointer decoder: masking, tie rules, teacher forcing, greedy and beam
search, and agreement with the exhaustive reference."""

import math

import numpy as np
import pytest

from sentorder import autodiff as ad
from sentorder.data import SizeError
from sentorder.decode import (MASKED_SCORE, beam_decode, decoder_init,
                              decoder_step, decoder_input, forced_path_probs,
                              gold_step_probs, greedy_decode)
from sentorder.encode import encode_base
from sentorder.graph import StateError, build_graph
from sentorder.grn import GrnState, grn_encode
from sentorder.metrics import MAX_EXHAUSTIVE, oracle_best_order

from conftest import make_chain_record, tiny_model, zero_params


def flat_state(n, ds, kappa=None):
    """Hand-built encoder output with zero layer-0 states and global."""
    k = np.zeros((n, ds)) if kappa is None else np.asarray(kappa, dtype=np.float64)
    return GrnState(kappa0=ad.Tensor(np.zeros((n, ds))), kappa=ad.Tensor(k),
                    eps=None, g=ad.Tensor(np.zeros((1, ds))))


def encoded_state(model, record):
    graph, _ = build_graph(record, None)
    return grn_encode(model, graph, encode_base(model, graph))


def seq_logp(model, state, seq):
    rows = forced_path_probs(model, state, seq)
    return sum(math.log(max(row[s], 1e-300)) for row, s in zip(rows, seq))


class TestGreedy:
    def test_zero_params_tie_to_lowest_index(self):
        model = tiny_model(lstm_hidden=1, decoder_hidden=1, attn_dim=1)
        zero_params(model)
        assert greedy_decode(model, flat_state(3, 2)) == [0, 1, 2]

    def test_single_sentence(self):
        model = tiny_model(lstm_hidden=1, decoder_hidden=1, attn_dim=1)
        zero_params(model)
        state = flat_state(1, 2)
        assert greedy_decode(model, state) == [0]
        assert beam_decode(model, state, 4) == [0]


class TestHandAttention:
    """Zero parameters except an attention path reading kappa column 0."""

    def build(self):
        model = tiny_model(lstm_hidden=1, decoder_hidden=1, attn_dim=1)
        zero_params(model)
        model.attn_u.data = np.array([[1.0], [0.0]])
        model.attn_q.data = np.array([[1.0]])
        state = flat_state(3, 2, kappa=[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        return model, state

    def test_step_probs_match_softmax_of_tanh(self):
        model, state = self.build()
        rows = forced_path_probs(model, state, [2, 1, 0])
        np.testing.assert_allclose(
            rows[0],
            [0.1734929134611954, 0.37156763615112687, 0.45493945038767764],
            atol=1e-15)

    def test_greedy_follows_scores(self):
        model, state = self.build()
        assert greedy_decode(model, state) == [2, 1, 0]


class TestMasking:
    def test_visited_probability_exactly_zero(self):
        model = tiny_model(seed=5)
        state = encoded_state(model, make_chain_record())
        rows = forced_path_probs(model, state, [2, 0, 3, 1])
        for t, row in enumerate(rows):
            assert row.sum() == pytest.approx(1.0, abs=1e-12)
            for visited in [2, 0, 3, 1][:t]:
                assert row[visited] == 0.0
            assert all(row[s] > 0.0 for s in range(4) if s not in [2, 0, 3, 1][:t])

    def test_last_step_is_certain(self):
        model = tiny_model(seed=5)
        state = encoded_state(model, make_chain_record())
        rows = forced_path_probs(model, state, [1, 3, 0, 2])
        assert rows[-1][2] == 1.0

    def test_exhausted_slots_raise(self):
        model = tiny_model(lstm_hidden=1, decoder_hidden=1, attn_dim=1)
        zero_params(model)
        state = flat_state(3, 2)
        h, c = decoder_init(model, state)
        x = decoder_input(model, state, None)
        with pytest.raises(StateError, match="visited"):
            decoder_step(model, state, h, c, x, [0, 1, 2])

    def test_masked_score_is_effectively_minus_inf(self):
        assert MASKED_SCORE == -1e30


class TestTeacherForcing:
    def test_uniform_nll_is_log_factorial(self):
        model = tiny_model(lstm_hidden=1, decoder_hidden=1, attn_dim=1)
        zero_params(model)
        state = flat_state(4, 2)
        picks = gold_step_probs(model, state, [0, 1, 2, 3])
        assert picks[0].data.item() == 0.25
        nll = -sum(math.log(p.data.item()) for p in picks)
        assert nll == pytest.approx(3.1780538303479458, abs=1e-12)

    def test_gold_must_be_permutation(self):
        model = tiny_model(seed=5)
        state = encoded_state(model, make_chain_record())
        with pytest.raises(ValueError, match="permutation"):
            gold_step_probs(model, state, [0, 0, 1, 2])

    def test_forced_path_validates_slots(self):
        model = tiny_model(seed=5)
        state = encoded_state(model, make_chain_record())
        with pytest.raises(ValueError, match="distinct"):
            forced_path_probs(model, state, [0, 0])
        with pytest.raises(ValueError, match="distinct"):
            forced_path_probs(model, state, [5])

    def test_prefix_allowed(self):
        model = tiny_model(seed=5)
        state = encoded_state(model, make_chain_record())
        rows = forced_path_probs(model, state, [3, 1])
        assert len(rows) == 2


class TestBeamAndOracle:
    def test_width_validation(self):
        model = tiny_model(seed=5)
        state = encoded_state(model, make_chain_record())
        with pytest.raises(ValueError, match="width"):
            beam_decode(model, state, 0)

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_logp_ordering(self, seed):
        model = tiny_model(seed=seed)
        state = encoded_state(model, make_chain_record())
        lp_greedy = seq_logp(model, state, greedy_decode(model, state))
        lp_beam = seq_logp(model, state, beam_decode(model, state, 4))
        lp_oracle = seq_logp(model, state, oracle_best_order(model, state))
        assert lp_greedy <= lp_beam + 1e-12
        assert lp_beam <= lp_oracle + 1e-12

    @pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
    def test_saturated_beam_equals_exhaustive(self, seed):
        # width 24 >= 4! keeps every hypothesis alive
        model = tiny_model(seed=seed)
        state = encoded_state(model, make_chain_record())
        assert beam_decode(model, state, 24) == oracle_best_order(model, state)

    def test_oracle_tie_rule_and_trivial_case(self):
        model = tiny_model(lstm_hidden=1, decoder_hidden=1, attn_dim=1)
        zero_params(model)
        # all orders score log(1/6); strict improvement keeps the first seen
        assert oracle_best_order(model, flat_state(3, 2)) == [0, 1, 2]
        assert oracle_best_order(model, flat_state(1, 2)) == [0]

    def test_oracle_size_limit(self):
        model = tiny_model(lstm_hidden=1, decoder_hidden=1, attn_dim=1)
        zero_params(model)
        with pytest.raises(SizeError, match=str(MAX_EXHAUSTIVE)):
            oracle_best_order(model, flat_state(MAX_EXHAUSTIVE + 1, 2))
