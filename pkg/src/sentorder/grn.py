"""Gated recurrent encoder over the sentence-entity graph.

Each layer exchanges gated messages along ss, se, and ee edges plus the
virtual global node, then applies GRU updates.  All updates in a layer read
the previous layer's states (synchronous), and layer weights are shared.
Sentence-to-sentence messages are scaled by the directed edge weights, so
re-encoding after a weight change shifts the sentence states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .encode import BaseEncodings, role_onehot
from .graph import IrseGraph
from .model import Model


@dataclass
class GrnState:
    """Final-layer node states, plus the layer-0 sentence vectors."""

    kappa0: ad.Tensor
    kappa: ad.Tensor           # (I, 2H) after n_layers
    eps: ad.Tensor | None      # (J, De) after n_layers
    g: ad.Tensor               # (1, 2H) after n_layers


def directed_ss_edges(graph: IrseGraph) -> tuple[list[int], list[int], list[float]]:
    """Both directions of every linked pair: receiver i hears sender j scaled
    by w(i, j), the probability that i precedes j."""
    recv, send, w = [], [], []
    for (i, j) in graph.linked_pairs():
        recv += [i, j]
        send += [j, i]
        w += [graph.weight(i, j), graph.weight(j, i)]
    return recv, send, w


def _gated_messages(gate_w, gate_b, receivers_x, values, recv_idx, n_out, extra=None,
                    weights=None):
    """sum over edges of sigma(W [recv; value; extra]) * value, grouped by receiver."""
    parts = [receivers_x, values]
    if extra is not None:
        parts.append(extra)
    gate = ad.sigmoid(ad.affine(ad.concat_cols(parts), gate_w, gate_b))
    msg = ad.mul(gate, values)
    if weights is not None:
        msg = ad.mul(msg, ad.Tensor(np.asarray(weights, dtype=np.float64).reshape(-1, 1)))
    return ad.scatter_sum(msg, recv_idx, n_out)


def sentence_messages(model: Model, graph: IrseGraph, kappa: ad.Tensor,
                      eps: ad.Tensor | None, ss_weights=None,
                      weighted: bool = True) -> tuple[ad.Tensor, ad.Tensor]:
    """Per-sentence message sums (from other sentences, from entities).

    The first sum scales each gated neighbor message by the directed edge
    weight; ``ss_weights`` overrides the graph's weights (order matching
    ``directed_ss_edges``) and ``weighted=False`` skips scaling entirely.
    Entity messages never depend on the pair weights.
    """
    I = graph.n_sentences
    zeros = ad.Tensor(np.zeros((I, model.dims.sent_dim)))
    recv, send, w = directed_ss_edges(graph)
    if recv:
        if ss_weights is not None:
            if len(ss_weights) != len(w):
                raise ValueError(f"expected {len(w)} directed weights, got {len(ss_weights)}")
            w = list(ss_weights)
        m_ss = _gated_messages(model.ss_gate[0], model.ss_gate[1],
                               ad.gather_rows(kappa, recv), ad.gather_rows(kappa, send),
                               recv, I, weights=w if weighted else None)
    else:
        m_ss = zeros
    if eps is not None and graph.se_edges:
        se_sent = [i for (i, _, _) in graph.se_edges]
        se_ent = [j for (_, j, _) in graph.se_edges]
        se_roles = role_onehot([r for (_, _, r) in graph.se_edges])
        ent_vals = ad.affine(eps, model.es_val[0], model.es_val[1])
        m_es = _gated_messages(model.es_gate[0], model.es_gate[1],
                               ad.gather_rows(kappa, se_sent),
                               ad.gather_rows(ent_vals, se_ent),
                               se_sent, I, extra=se_roles)
    else:
        m_es = zeros
    return m_ss, m_es


def grn_encode(model: Model, graph: IrseGraph, base: BaseEncodings) -> GrnState:
    """Run n_layers of message passing from the given base encodings."""
    I = graph.n_sentences
    J = graph.n_entities
    Ds = model.dims.sent_dim
    De = model.dims.entity_dim

    se_sent = [i for (i, _, _) in graph.se_edges]
    se_ent = [j for (_, j, _) in graph.se_edges]
    se_roles = role_onehot([r for (_, _, r) in graph.se_edges]) if graph.se_edges else None

    ee_recv, ee_send = [], []
    for (a, b) in graph.ee_edges:
        ee_recv += [a, b]
        ee_send += [b, a]

    kappa, eps, g = base.kappa0, base.eps0, base.g0

    for _ in range(model.dims.n_layers):
        # messages into sentences
        m_ss, m_es = sentence_messages(model, graph, kappa, eps)

        # messages into entities
        new_eps = None
        if J:
            if graph.se_edges:
                sent_vals = ad.affine(kappa, model.se_val[0], model.se_val[1])
                m_se = _gated_messages(model.se_gate[0], model.se_gate[1],
                                       ad.gather_rows(eps, se_ent),
                                       ad.gather_rows(sent_vals, se_sent),
                                       se_ent, J, extra=se_roles)
            else:
                m_se = ad.Tensor(np.zeros((J, De)))
            if ee_recv:
                m_ee = _gated_messages(model.ee_gate[0], model.ee_gate[1],
                                       ad.gather_rows(eps, ee_recv),
                                       ad.gather_rows(eps, ee_send),
                                       ee_recv, J)
            else:
                m_ee = ad.Tensor(np.zeros((J, De)))
            g_ent = ad.affine(g, model.glob_to_ent[0], model.glob_to_ent[1])
            xi_e = ad.concat_cols([base.eps0, m_se, m_ee, ad.repeat_rows(g_ent, J)])
            new_eps = ad.gru_cell(xi_e, eps, model.ent_gru)

        # sentence update reads the layer-0 vector, both message sums, global
        xi_s = ad.concat_cols([base.kappa0, m_ss, m_es, ad.repeat_rows(g, I)])
        new_kappa = ad.gru_cell(xi_s, kappa, model.sent_gru)

        # global update from mean node states
        if J:
            ent_summary = ad.affine(ad.mean_rows(eps), model.ent_to_glob[0],
                                    model.ent_to_glob[1])
        else:
            ent_summary = ad.Tensor(np.zeros((1, Ds)))
        xi_g = ad.concat_cols([ad.mean_rows(kappa), ent_summary])
        new_g = ad.gru_cell(xi_g, g, model.glob_gru)

        kappa, eps, g = new_kappa, new_eps, new_g

    return GrnState(base.kappa0, kappa, eps, g)
