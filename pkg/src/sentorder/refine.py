"""Pairwise order classifiers and iterative edge-weight refinement.

Both classifiers read final-layer sentence states and score each linked
pair in both directions; the two directed scores are normalized to sum to
one.  Pairs whose weight lands in the uncertainty band are reset to 0.5 and
re-scored after re-encoding, shrinking the uncertain set monotonically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .encode import BaseEncodings, encode_base
from .graph import IrseGraph, NoEdgeError, StateError
from .grn import GrnState, grn_encode
from .model import Model

REFINE_MODES = ("full", "initial_only", "frozen")


def normalize_pair(p: float, q: float) -> tuple[float, float]:
    """Scale two directed scores to sum to one; degenerate sums give (0.5, 0.5)."""
    s = p + q
    if s < 1e-12:
        return 0.5, 0.5
    return p / s, q / s


def score_pairs(model: Model, kappa: ad.Tensor, pairs: list, which: str,
                dropout: float = 0.0, rng: np.random.Generator | None = None) -> ad.Tensor:
    """Directed order probabilities, rows (i,j),(j,i) per pair: shape (2P, 1)."""
    if which == "initial":
        hw, hb, ow, ob = model.clf_init
    elif which == "iterative":
        hw, hb, ow, ob = model.clf_iter
    else:
        raise ValueError(f"unknown classifier {which!r}")
    firsts, seconds = [], []
    for (i, j) in pairs:
        firsts += [i, j]
        seconds += [j, i]
    x = ad.concat_cols([ad.gather_rows(kappa, firsts), ad.gather_rows(kappa, seconds)])
    h = ad.tanh(ad.affine(x, hw, hb))
    if dropout > 0.0:
        h = ad.dropout(h, dropout, rng)
    return ad.sigmoid(ad.affine(h, ow, ob))


def weights_from_scores(pairs: list, probs: np.ndarray) -> dict:
    """Normalized canonical-direction weight per pair from stacked scores."""
    out = {}
    for k, (i, j) in enumerate(pairs):
        w_ij, _ = normalize_pair(float(probs[2 * k, 0]), float(probs[2 * k + 1, 0]))
        out[(i, j)] = w_ij
    return out


def uncertain_pairs(weights: dict, delta_min: float, delta_max: float) -> list:
    return [p for p, w in sorted(weights.items()) if delta_min <= w <= delta_max]


def _commit_or_defer(graph: IrseGraph, weights: dict, delta_min: float,
                     delta_max: float) -> list:
    """Write certain weights, reset in-band pairs to 0.5, return the band."""
    vp = []
    for (i, j), w in sorted(weights.items()):
        if delta_min <= w <= delta_max:
            vp.append((i, j))
            graph.set_pair_weight(i, j, 0.5)
        else:
            graph.set_pair_weight(i, j, w)
    return vp


def initial_pass(model: Model, graph: IrseGraph, base: BaseEncodings,
                 delta_min: float = 0.2, delta_max: float = 0.8) -> list:
    """Score every linked pair once on the neutral graph; returns the pairs
    whose normalized weight fell inside the uncertainty band (now at 0.5,
    while the rest carry their scored weights).

    The graph must still be in its construction state (every pair at 0.5);
    scoring a partially refined graph with the initial classifier would mix
    the two passes, so that raises StateError.
    """
    pairs = graph.linked_pairs()
    for (i, j) in pairs:
        if graph.weight(i, j) != 0.5:
            raise StateError(
                f"initial pass requires all pair weights at 0.5; pair {(i, j)} has "
                f"{graph.weight(i, j)}")
    if not pairs:
        return []
    state = grn_encode(model, graph, base)
    probs = score_pairs(model, state.kappa, pairs, "initial")
    return _commit_or_defer(graph, weights_from_scores(pairs, probs.data),
                            delta_min, delta_max)


def iterative_pass(model: Model, graph: IrseGraph, base: BaseEncodings, vp: list,
                   delta_min: float = 0.2, delta_max: float = 0.8) -> list:
    """Re-encode the graph as it stands, re-score only the uncertain pairs
    with the iterative classifier, and return the still-uncertain subset
    (reset to 0.5; newly certain pairs get their weights written)."""
    for (i, j) in vp:
        if not graph.has_edge(i, j):
            raise NoEdgeError((i, j))
    if not vp:
        return []
    state = grn_encode(model, graph, base)
    probs = score_pairs(model, state.kappa, vp, "iterative")
    return _commit_or_defer(graph, weights_from_scores(vp, probs.data),
                            delta_min, delta_max)


@dataclass
class RefineInfo:
    """Trace of one refinement run."""

    initial_weights: dict = field(default_factory=dict)
    final_weights: dict = field(default_factory=dict)
    uncertain_initial: list = field(default_factory=list)
    uncertain_final: list = field(default_factory=list)
    vp_history: list = field(default_factory=list)
    vp_sizes: list = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = True
    mode: str = "full"


def refine_graph(model: Model, graph: IrseGraph, base, delta_min: float = 0.2,
                 delta_max: float = 0.8, k_max: int = 10, mode: str = "full") -> RefineInfo:
    """Run the classifier passes, mutating the graph's pair weights.

    mode "frozen" leaves all weights untouched, "initial_only" stops after
    the first pass, "full" iterates on the uncertain set until it is empty,
    stops shrinking, or k_max passes have run.  Runs without gradient
    tracking; training losses score pairs directly instead.
    """
    if mode not in REFINE_MODES:
        raise ValueError(f"mode {mode!r} not in {REFINE_MODES}")
    if not (0.0 < delta_min <= 0.5 <= delta_max < 1.0):
        raise ValueError(
            f"uncertainty band [{delta_min}, {delta_max}] must straddle 0.5 inside (0, 1)")
    if k_max < 1:
        raise ValueError(f"k_max must be at least 1, got {k_max}")
    info = RefineInfo(mode=mode)
    if mode == "frozen" or not graph.linked_pairs():
        info.final_weights = graph.weight_map()
        return info

    with ad.no_grad():
        vp = initial_pass(model, graph, base, delta_min, delta_max)
        info.initial_weights = graph.weight_map()
        info.uncertain_initial = list(vp)
        info.vp_history.append(list(vp))
        info.vp_sizes.append(len(vp))

        if mode == "full":
            while vp and info.iterations_run < k_max:
                vp_next = iterative_pass(model, graph, base, vp, delta_min, delta_max)
                info.iterations_run += 1
                info.vp_history.append(list(vp_next))
                info.vp_sizes.append(len(vp_next))
                if vp_next == vp:
                    break
                vp = vp_next

        info.uncertain_final = list(vp)
        info.converged = not vp
    info.final_weights = graph.weight_map()
    return info


def construct_irse_graph(model: Model, graph: IrseGraph, delta_min: float = 0.2,
                         delta_max: float = 0.8, k_max: int = 10,
                         mode: str = "full") -> tuple[GrnState, RefineInfo]:
    """Refine the graph's weights, then encode it once more for downstream use.

    Refinement runs without gradient tracking; the closing encode runs in
    the caller's context, so calling this while recording yields a state
    ready for decoder losses.
    """
    with ad.no_grad():
        base = encode_base(model, graph)
    info = refine_graph(model, graph, base, delta_min, delta_max, k_max, mode)
    final_base = encode_base(model, graph)
    state = grn_encode(model, graph, final_base)
    return state, info
