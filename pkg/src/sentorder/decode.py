"""Pointer decoder: emits the predicted reading order over presented slots.

An LSTM cell consumes the layer-0 vector of the previously chosen sentence
(a learned start vector at step one) and attends over the final-layer
sentence states; visited slots are masked out.  Ties break toward the
lowest slot index, and beam search orders equal-score hypotheses
lexicographically, matching the exhaustive reference ordering.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .graph import StateError
from .grn import GrnState
from .model import Model

MASKED_SCORE = -1e30


def decoder_init(model: Model, state: GrnState):
    """Initial (h, c) from the final global state."""
    w, b = model.dec_h0
    h = ad.tanh(ad.affine(state.g, w, b))
    c = ad.Tensor(np.zeros((1, model.dims.decoder_hidden)))
    return h, c


def decoder_input(model: Model, state: GrnState, prev_slot: int | None) -> ad.Tensor:
    if prev_slot is None:
        return model.dec_start
    return ad.gather_rows(state.kappa0, [prev_slot])


def decoder_step(model: Model, state: GrnState, h, c, x: ad.Tensor, visited):
    """One step: returns (h', c', probs (1, I)) with visited slots masked."""
    if len(set(visited)) >= state.kappa.data.shape[0]:
        raise StateError("decoder step with every slot already visited")
    h, c = ad.lstm_step(x, (h, c), model.dec_lstm)
    mix = ad.add(ad.affine(h, model.attn_w, model.attn_b),
                 ad.matmul(state.kappa, model.attn_u))
    scores = ad.transpose(ad.matmul(ad.tanh(mix), model.attn_q))
    mask = np.zeros((1, state.kappa.data.shape[0]), dtype=bool)
    mask[0, list(visited)] = True
    probs = ad.softmax_rows(ad.mask_fill(scores, mask, MASKED_SCORE))
    return h, c, probs


def gold_step_probs(model: Model, state: GrnState, gold_seq: list[int],
                    dropout: float = 0.0, rng: np.random.Generator | None = None):
    """Teacher-forced probability of each gold pick; one scalar tensor per step."""
    n = state.kappa.data.shape[0]
    if sorted(gold_seq) != list(range(n)):
        raise ValueError(f"gold_seq is not a permutation of 0..{n - 1}")
    h, c = decoder_init(model, state)
    visited: list[int] = []
    out = []
    for t, slot in enumerate(gold_seq):
        x = decoder_input(model, state, gold_seq[t - 1] if t else None)
        if dropout > 0.0:
            x = ad.dropout(x, dropout, rng)
        h, c, probs = decoder_step(model, state, h, c, x, visited)
        out.append(ad.pick(probs, 0, slot))
        visited.append(slot)
    return out


def forced_path_probs(model: Model, state: GrnState, seq: list[int]) -> list[np.ndarray]:
    """Full masked distribution at each step while forcing the given picks.

    ``seq`` may be any prefix of distinct slots (a full permutation included);
    entry t is the (I,) probability row the decoder saw before pick t.
    """
    n = state.kappa.data.shape[0]
    if len(set(seq)) != len(seq) or any(not 0 <= s < n for s in seq):
        raise ValueError(f"seq must hold distinct slots in 0..{n - 1}, got {seq}")
    out = []
    with ad.no_grad():
        h, c = decoder_init(model, state)
        visited: list[int] = []
        for t, slot in enumerate(seq):
            x = decoder_input(model, state, seq[t - 1] if t else None)
            h, c, probs = decoder_step(model, state, h, c, x, visited)
            out.append(probs.data[0].copy())
            visited.append(slot)
    return out


def greedy_decode(model: Model, state: GrnState) -> list[int]:
    """Highest-probability slot each step; exact ties pick the lowest index."""
    n = state.kappa.data.shape[0]
    with ad.no_grad():
        h, c = decoder_init(model, state)
        visited: list[int] = []
        for t in range(n):
            x = decoder_input(model, state, visited[-1] if visited else None)
            h, c, probs = decoder_step(model, state, h, c, x, visited)
            visited.append(int(np.argmax(probs.data[0])))
    return visited


def beam_decode(model: Model, state: GrnState, width: int) -> list[int]:
    """Beam search over orders; returns the lowest-cost (then lexicographically
    smallest) complete sequence."""
    if width < 1:
        raise ValueError(f"beam width must be >= 1, got {width}")
    n = state.kappa.data.shape[0]
    with ad.no_grad():
        h0, c0 = decoder_init(model, state)
        beams = [(0.0, (), h0, c0)]
        for _ in range(n):
            grown = []
            for cost, seq, h, c in beams:
                x = decoder_input(model, state, seq[-1] if seq else None)
                h2, c2, probs = decoder_step(model, state, h, c, x, seq)
                for slot in range(n):
                    if slot in seq:
                        continue
                    p = max(float(probs.data[0, slot]), 1e-300)
                    grown.append((cost - np.log(p), seq + (slot,), h2, c2))
            grown.sort(key=lambda b: (b[0], b[1]))
            beams = grown[:width]
    return list(beams[0][1])
