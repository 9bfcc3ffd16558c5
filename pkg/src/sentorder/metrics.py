"""Ordering metrics and the exhaustive best-order reference.

A predicted order is a list of presented-slot indices; gold_positions maps
each slot to its gold rank, so the gold order is its argsort.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .data import SizeError
from .decode import decoder_init, decoder_input, decoder_step


def _check_lengths(pred_seq: list[int], gold_positions: list[int]) -> None:
    if len(pred_seq) != len(gold_positions):
        raise ValueError(
            f"prediction covers {len(pred_seq)} slots, gold has {len(gold_positions)}")
    if sorted(pred_seq) != list(range(len(gold_positions))):
        raise ValueError("pred_seq is not a permutation of the presented slots")


def gold_sequence(gold_positions: list[int]) -> list[int]:
    """Slots sorted by gold rank: the sequence a perfect model emits."""
    return sorted(range(len(gold_positions)), key=lambda k: gold_positions[k])


def inversions(ranks: list[int]) -> int:
    n = len(ranks)
    return sum(1 for a in range(n) for b in range(a + 1, n) if ranks[a] > ranks[b])


def kendall_tau(pred_seq: list[int], gold_positions: list[int]) -> float:
    """1 - 2 * inversions / C(n, 2); degenerate lengths (< 2) score 1.0."""
    _check_lengths(pred_seq, gold_positions)
    n = len(pred_seq)
    if n < 2:
        return 1.0
    ranks = [gold_positions[s] for s in pred_seq]
    return 1.0 - 2.0 * inversions(ranks) / (n * (n - 1) / 2)


def perfect_match(pred_seq: list[int], gold_positions: list[int]) -> bool:
    _check_lengths(pred_seq, gold_positions)
    return pred_seq == gold_sequence(gold_positions)


def pmr(pred_seqs: list, gold_positions_list: list) -> float:
    """Fraction of paragraphs reproduced exactly."""
    if len(pred_seqs) != len(gold_positions_list):
        raise ValueError(
            f"{len(pred_seqs)} predictions against {len(gold_positions_list)} golds")
    if not pred_seqs:
        raise ValueError("pmr over an empty collection")
    return sum(perfect_match(p, g) for p, g in
               zip(pred_seqs, gold_positions_list)) / len(pred_seqs)


def positional_accuracy(pred_seq: list[int], gold_positions: list[int]) -> float:
    _check_lengths(pred_seq, gold_positions)
    gold = gold_sequence(gold_positions)
    return sum(1 for a, b in zip(pred_seq, gold) if a == b) / len(gold)


def head_tail(pred_seq: list[int], gold_positions: list[int]) -> tuple[bool, bool]:
    _check_lengths(pred_seq, gold_positions)
    gold = gold_sequence(gold_positions)
    return pred_seq[0] == gold[0], pred_seq[-1] == gold[-1]


def pairwise_counts(graph, gold_positions: list[int]) -> tuple[int, int]:
    """(correctly oriented linked pairs, linked pairs); 0.5 is never correct."""
    correct = 0
    pairs = graph.linked_pairs()
    for (i, j) in pairs:
        gold_forward = gold_positions[i] < gold_positions[j]
        w = graph.weight(i, j)
        if (w > 0.5) == gold_forward and w != 0.5:
            correct += 1
    return correct, len(pairs)


def pairwise_accuracy(graph, gold_positions: list[int]) -> float:
    correct, total = pairwise_counts(graph, gold_positions)
    return correct / total if total else 1.0


MAX_EXHAUSTIVE = 7


def oracle_best_order(model, state) -> list[int]:
    """Sequence maximizing the decoder's total log-probability, by forcing
    every permutation and keeping the best.

    Prefix states are shared across permutations, ties resolve to the
    lexicographically smallest sequence (strict improvement only, no
    tolerance), and paragraphs beyond MAX_EXHAUSTIVE sentences raise
    SizeError; growth is factorial past that.
    """
    n = state.kappa.data.shape[0]
    if n > MAX_EXHAUSTIVE:
        raise SizeError(
            f"exhaustive decoding limited to {MAX_EXHAUSTIVE} sentences, got {n}")
    best: dict = {"seq": None, "logp": -np.inf}

    def extend(seq, h, c, logp):
        if len(seq) == n:
            if logp > best["logp"]:
                best["seq"], best["logp"] = list(seq), logp
            return
        x = decoder_input(model, state, seq[-1] if seq else None)
        h2, c2, probs = decoder_step(model, state, h, c, x, seq)
        for slot in range(n):
            if slot in seq:
                continue
            p = max(float(probs.data[0, slot]), 1e-300)
            extend(seq + [slot], h2, c2, logp + np.log(p))

    with ad.no_grad():
        h0, c0 = decoder_init(model, state)
        extend([], h0, c0, 0.0)
    return best["seq"]
