"""Losses, Adadelta, the three-phase training pipeline, and corpus evaluation.

Phase A fits the initial classifier (with the encoder and graph layers) on
all linked pairs of each paragraph under neutral weights.  Phase B fits the
iterative classifier on held-out pairs of gold-weighted graphs corrupted
with order-contradicting noise.  Phase C fits the decoder through the full
refinement loop; the classifiers receive no gradients there because
refinement runs untracked.

Early stopping watches validation pairwise direction accuracy in A and B
and validation Kendall tau in C; the best-epoch parameters are restored
when a phase ends.
"""

from __future__ import annotations

import json
import os
import time
import warnings
from dataclasses import replace

import numpy as np

from . import autodiff as ad
from .config import ConfigError, RunConfig
from .data import split_corpus
from .decode import beam_decode, gold_step_probs, greedy_decode
from .encode import encode_base, load_embedding_file
from .graph import assign_gold_weights, build_graph, inject_noise, uncertain_reset
from .grn import grn_encode
from .metrics import (gold_sequence, head_tail, kendall_tau, pairwise_counts,
                      perfect_match, positional_accuracy)
from .model import Model, build_vocab
from .refine import construct_irse_graph, score_pairs, weights_from_scores

# distinct stream tags so no two rngs in the pipeline share a seed
_ORDER_A, _DROP_A = 101, 102
_ORDER_B, _DROP_B, _CORRUPT_B = 201, 202, 203
_ORDER_C, _DROP_C = 301, 302
_VAL_CORRUPT, _EVAL_ORDER = 210, 999

_CLF = {"A": "initial", "B": "iterative"}

POINTER_CLAMP_EVENTS = 0


def reset_clamp_counter() -> None:
    global POINTER_CLAMP_EVENTS
    POINTER_CLAMP_EVENTS = 0


def derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def bce_loss(probs: ad.Tensor, targets: np.ndarray) -> ad.Tensor:
    """Mean binary cross-entropy of stacked probabilities against 0/1 targets."""
    n = probs.data.shape[0]
    y = ad.Tensor(np.asarray(targets, dtype=np.float64).reshape(n, 1))
    one_minus_y = ad.Tensor(1.0 - y.data)
    p = ad.clamp(probs, 1e-12, 1.0 - 1e-12)
    one_minus_p = ad.sub(ad.Tensor(np.ones((n, 1))), p)
    ll = ad.add(ad.mul(y, ad.log(p)), ad.mul(one_minus_y, ad.log(one_minus_p)))
    return ad.scale(ad.sum_all(ll), -1.0 / n)


def loss_pointer(model: Model, state, gold_seq: list[int], dropout: float = 0.0,
                 rng: np.random.Generator | None = None) -> ad.Tensor:
    """Sum of negative log-probabilities of the gold picks (teacher forcing)."""
    global POINTER_CLAMP_EVENTS
    steps = gold_step_probs(model, state, gold_seq, dropout, rng)
    total = None
    for p in steps:
        if p.data < 1e-12:
            POINTER_CLAMP_EVENTS += 1
            warnings.warn("pointer step probability clamped to 1e-12", RuntimeWarning)
        nll = ad.scale(ad.log(ad.clamp(p, 1e-12, 1.0)), -1.0)
        total = nll if total is None else ad.add(total, nll)
    return total


def adadelta_step(params, lr: float = 1.0, rho: float = 0.95, eps: float = 1e-6,
                  l2: float = 0.0, allow=None) -> None:
    """Accumulator-based per-parameter update; parameters without gradients
    are left untouched (their accumulators do not decay either).  ``allow``
    restricts updates to parameters whose name starts with a listed prefix."""
    for p in params:
        if p.grad is None:
            continue
        if allow is not None and not any(p.name.startswith(pre) for pre in allow):
            continue
        g = p.grad + l2 * p.data
        p.sq_grad_avg = rho * p.sq_grad_avg + (1.0 - rho) * g * g
        update = np.sqrt((p.sq_update_avg + eps) / (p.sq_grad_avg + eps)) * g
        p.sq_update_avg = rho * p.sq_update_avg + (1.0 - rho) * update * update
        p.data = p.data - lr * update


def _pair_targets(pairs, gold_positions) -> np.ndarray:
    rows = []
    for (i, j) in pairs:
        y = 1.0 if gold_positions[i] < gold_positions[j] else 0.0
        rows += [y, 1.0 - y]
    return np.asarray(rows).reshape(-1, 1)


def _prepared_pairs(cfg: RunConfig, record, phase: str, epoch: int, idx: int,
                    train: bool):
    """Presented graph, gold positions, and the pairs the phase scores.

    Phase A keeps construction weights and scores every linked pair.  Phase B
    assigns gold weights, injects contradicting noise, then holds out a
    random 20-60% of pairs at 0.5 for the iterative classifier.  Validation
    corruption is epoch-independent so the metric stays comparable.
    """
    if phase == "A":
        graph, gold = build_graph(record, derived_seed(cfg.seed, _ORDER_A, epoch, idx))
        return graph, gold, graph.linked_pairs()
    graph, gold = build_graph(record, derived_seed(cfg.seed, _ORDER_B, epoch, idx))
    pairs = graph.linked_pairs()
    if not pairs:
        return graph, gold, []
    tag = [cfg.seed, _CORRUPT_B, epoch, idx] if train else [cfg.seed, _VAL_CORRUPT, idx]
    rng = np.random.default_rng(tag)
    assign_gold_weights(graph, gold)
    inject_noise(graph, cfg.noise_eta, rng)
    frac = rng.uniform(0.2, 0.6)
    n_held = max(1, int(round(frac * len(pairs))))
    held = [pairs[int(k)] for k in rng.choice(len(pairs), size=n_held, replace=False)]
    uncertain_reset(graph, held)
    return graph, gold, held


def _example_loss_ab(model: Model, cfg: RunConfig, record, phase: str, epoch: int,
                     idx: int, train: bool):
    graph, gold, pairs = _prepared_pairs(cfg, record, phase, epoch, idx, train)
    if not pairs:
        return None
    drop_tag = _DROP_A if phase == "A" else _DROP_B
    rng = np.random.default_rng([cfg.seed, drop_tag, epoch, idx])
    state = grn_encode(model, graph, encode_base(model, graph))
    probs = score_pairs(model, state.kappa, pairs, _CLF[phase],
                        dropout=cfg.dropout if train else 0.0, rng=rng)
    return bce_loss(probs, _pair_targets(pairs, gold))


def _example_loss_a(model, cfg, record, epoch, idx, train):
    return _example_loss_ab(model, cfg, record, "A", epoch, idx, train)


def _example_loss_b(model, cfg, record, epoch, idx, train):
    return _example_loss_ab(model, cfg, record, "B", epoch, idx, train)


def _example_loss_c(model: Model, cfg: RunConfig, record, epoch: int, idx: int,
                    train: bool):
    graph, gold = build_graph(record, derived_seed(cfg.seed, _ORDER_C, epoch, idx))
    state, _ = construct_irse_graph(model, graph, cfg.delta_min, cfg.delta_max,
                                    cfg.k_max, cfg.refine_mode)
    rng = np.random.default_rng([cfg.seed, _DROP_C, epoch, idx])
    return loss_pointer(model, state, gold_sequence(gold),
                        cfg.dropout if train else 0.0, rng)


_PHASE_LOSS = {"A": _example_loss_a, "B": _example_loss_b, "C": _example_loss_c}


def _phase_allow(cfg: RunConfig, phase: str):
    """Name prefixes the optimizer may update, or None for everything."""
    if not cfg.freeze_encoder_after_a or phase == "A":
        return None
    return ("clf_iter.",) if phase == "B" else ("dec.",)


def _train_epoch(model: Model, cfg: RunConfig, records, phase: str, epoch: int,
                 allow=None) -> float:
    example_loss = _PHASE_LOSS[phase]
    order = np.random.default_rng([cfg.seed, ord(phase), epoch]).permutation(len(records))
    losses = []
    for at in range(0, len(order), cfg.batch_size):
        block = [int(k) for k in order[at:at + cfg.batch_size]]
        n_live = 0
        for idx in block:
            ad.clear_tape()
            loss = example_loss(model, cfg, records[idx], epoch, idx, train=True)
            if loss is None:
                continue
            loss_val = loss.item()
            if not np.isfinite(loss_val):
                raise ad.NumericError(
                    f"non-finite loss in phase {phase}, epoch {epoch}, example {idx}")
            losses.append(loss_val)
            ad.backward(ad.scale(loss, 1.0 / len(block)))
            n_live += 1
        if n_live:
            adadelta_step(model.params, cfg.lr, cfg.rho, cfg.adadelta_eps, cfg.l2,
                          allow=allow)
            model.params.zero_grads()
    return float(np.mean(losses)) if losses else 0.0


def _val_pairwise(model: Model, cfg: RunConfig, records, phase: str) -> float:
    """Micro-averaged direction accuracy of the phase's classifier on its
    validation pairs; a 0.5 output never counts as correct."""
    correct = total = 0
    with ad.no_grad():
        for idx, record in enumerate(records):
            graph, gold, pairs = _prepared_pairs(cfg, record, phase, 0, idx, train=False)
            if not pairs:
                continue
            state = grn_encode(model, graph, encode_base(model, graph))
            probs = score_pairs(model, state.kappa, pairs, _CLF[phase])
            for (i, j), w in weights_from_scores(pairs, probs.data).items():
                if w != 0.5 and (w > 0.5) == (gold[i] < gold[j]):
                    correct += 1
                total += 1
    return correct / total if total else 1.0


def _val_tau(model: Model, cfg: RunConfig, records) -> float:
    taus = []
    with ad.no_grad():
        for idx, record in enumerate(records):
            graph, gold = build_graph(record, derived_seed(cfg.seed, _ORDER_C, 0, idx))
            state, _ = construct_irse_graph(model, graph, cfg.delta_min, cfg.delta_max,
                                            cfg.k_max, cfg.refine_mode)
            taus.append(kendall_tau(greedy_decode(model, state), gold))
    return float(np.mean(taus)) if taus else 0.0


def _val_metric(model: Model, cfg: RunConfig, records, phase: str) -> float:
    if phase == "C":
        return _val_tau(model, cfg, records)
    return _val_pairwise(model, cfg, records, phase)


def _snapshot(model: Model) -> dict:
    return {p.name: p.data.copy() for p in model.params}


def _restore(model: Model, snap: dict) -> None:
    for p in model.params:
        p.data = snap[p.name].copy()


def _reset_optimizer(model: Model) -> None:
    for p in model.params:
        p.sq_grad_avg = np.zeros_like(p.data)
        p.sq_update_avg = np.zeros_like(p.data)
        p.zero_grad()


def _run_phase(model: Model, cfg: RunConfig, phase: str, train_recs, val_recs,
               log) -> list[dict]:
    n_epochs = {"A": cfg.epochs_a, "B": cfg.epochs_b, "C": cfg.epochs_c}[phase]
    allow = _phase_allow(cfg, phase)
    _reset_optimizer(model)
    best_metric, best_snap, stall = None, None, 0
    history = []
    for epoch in range(n_epochs):
        started = time.monotonic()
        train_loss = _train_epoch(model, cfg, train_recs, phase, epoch, allow=allow)
        val_metric = _val_metric(model, cfg, val_recs, phase)
        entry = {"phase": phase, "epoch": epoch, "train_loss": round(train_loss, 6),
                 "val_metric": round(val_metric, 6),
                 "seconds": round(time.monotonic() - started, 3)}
        history.append(entry)
        log(entry)
        if best_metric is None or val_metric > best_metric:
            best_metric, best_snap, stall = val_metric, _snapshot(model), 0
        else:
            stall += 1
            if stall >= cfg.patience:
                break
    if best_snap is not None:
        _restore(model, best_snap)
    return history


def train_pipeline(cfg: RunConfig, records, out_dir: str | None = None,
                   phases: str = "ABC", model: Model | None = None,
                   splits=None, resume: bool = False):
    """Run the requested phases over a split corpus; returns (model, history).

    ``splits`` overrides the seeded split with explicit (train, val, test)
    record lists.  With ``out_dir``, per-epoch JSONL lines land in
    train_log.jsonl and each phase saves checkpoint_<phase>.json plus a
    final checkpoint.json; ``resume`` then skips any phase whose checkpoint
    already exists, reloading its parameters instead.
    """
    cfg.validate()
    for phase in phases:
        if phase not in "ABC":
            raise ValueError(f"unknown phase {phase!r} (expected letters from 'ABC')")
    if splits is not None:
        train_recs, val_recs, _ = splits
    else:
        train_recs, val_recs, _ = split_corpus(records, seed=cfg.seed)
    if not train_recs or not val_recs:
        raise ConfigError("training requires non-empty train and validation splits")
    if model is None:
        model = Model(cfg.dims(), build_vocab(train_recs), seed=cfg.seed)
        if cfg.embedding_file:
            load_embedding_file(cfg.embedding_file, model)

    log_fh = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        log_fh = open(os.path.join(out_dir, "train_log.jsonl"), "a", encoding="utf-8")

    def log(entry: dict) -> None:
        if log_fh is not None:
            log_fh.write(json.dumps(entry) + "\n")
            log_fh.flush()

    history = {}
    try:
        for phase in phases:
            ckpt = (os.path.join(out_dir, f"checkpoint_{phase}.json")
                    if out_dir is not None else None)
            if resume and ckpt is not None and os.path.exists(ckpt):
                model = Model.load(ckpt)
                entry = {"phase": phase, "resumed_from": ckpt}
                history[phase] = [entry]
                log(entry)
                continue
            history[phase] = _run_phase(model, cfg, phase, train_recs, val_recs, log)
            if ckpt is not None:
                model.save(ckpt)
    finally:
        if log_fh is not None:
            log_fh.close()
    if out_dir is not None:
        model.save(os.path.join(out_dir, "checkpoint.json"))
    return model, history


def eval_one(model: Model, cfg: RunConfig, record, idx: int, mode: str,
             width: int) -> dict:
    """Per-record metrics row; presentation order depends only on cfg.seed
    and the record index, so refinement modes stay comparable."""
    with ad.no_grad():
        graph, gold = build_graph(record, derived_seed(cfg.seed, _EVAL_ORDER, idx))
        state, _ = construct_irse_graph(model, graph, cfg.delta_min, cfg.delta_max,
                                        cfg.k_max, mode)
        seq = beam_decode(model, state, width) if width > 1 else greedy_decode(model, state)
    h, t = head_tail(seq, gold)
    c, n = pairwise_counts(graph, gold)
    return {"tau": kendall_tau(seq, gold),
            "pm": 1.0 if perfect_match(seq, gold) else 0.0,
            "acc": positional_accuracy(seq, gold),
            "head": 1.0 if h else 0.0, "tail": 1.0 if t else 0.0,
            "pair_correct": c, "pair_total": n}


def aggregate_eval(rows: list[dict]) -> dict:
    def mean(key):
        return float(np.mean([r[key] for r in rows])) if rows else 0.0

    pair_total = sum(r["pair_total"] for r in rows)
    return {"n_paragraphs": len(rows), "tau": mean("tau"), "pmr": mean("pm"),
            "acc": mean("acc"), "head_acc": mean("head"), "tail_acc": mean("tail"),
            "pairwise_acc": (sum(r["pair_correct"] for r in rows) / pair_total
                             if pair_total else 1.0)}


def evaluate_corpus(model: Model, records, cfg: RunConfig, mode: str | None = None,
                    beam_width: int | None = None) -> dict:
    mode = mode or cfg.refine_mode
    width = cfg.beam_width if beam_width is None else beam_width
    rows = [eval_one(model, cfg, record, idx, mode, width)
            for idx, record in enumerate(records)]
    return aggregate_eval(rows)


def pairwise_eval(model: Model, records, cfg: RunConfig, mode: str) -> float:
    """Micro-averaged pairwise direction accuracy after refinement in a mode."""
    correct = total = 0
    with ad.no_grad():
        for idx, record in enumerate(records):
            graph, gold = build_graph(record, derived_seed(cfg.seed, _EVAL_ORDER, idx))
            construct_irse_graph(model, graph, cfg.delta_min, cfg.delta_max,
                                 cfg.k_max, mode)
            c, n = pairwise_counts(graph, gold)
            correct += c
            total += n
    return correct / total if total else 1.0


def ablation_phase_c(cfg: RunConfig, records, modes=("full", "initial_only", "frozen"),
                     out_dir: str | None = None, splits=None):
    """Train phases A and B once, then branch phase C per refinement mode.

    Returns (base_model, models, history): the shared post-B parameters and a
    mode -> trained model map; every branch starts from identical post-B
    parameters, and phase C never updates the classifiers themselves.
    """
    model, history = train_pipeline(cfg, records, out_dir=out_dir, phases="AB",
                                    splits=splits)
    post_b = model.params.state_dict()
    models = {}
    for mode in modes:
        branch = Model(cfg.dims(), model.vocab, seed=cfg.seed)
        branch.params.load_state(post_b)
        branch_cfg = replace(cfg, refine_mode=mode)
        _, h = train_pipeline(branch_cfg, records, out_dir=None, phases="C",
                              model=branch, splits=splits)
        history[f"C:{mode}"] = h["C"]
        models[mode] = branch
    return model, models, history
