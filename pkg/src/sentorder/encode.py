"""Base node encodings: BiLSTM sentence vectors, entity and global seeds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graph import IrseGraph, ValidationError
from .model import Model


def embed_tokens(model: Model, tokens: list[str]) -> ad.Tensor:
    idx = [model.lookup(t) for t in tokens]
    return ad.gather_rows(model.embed, idx)


def encode_sentence(model: Model, tokens: list[str]) -> ad.Tensor:
    """(1, 2H) concatenation of last forward and last backward LSTM states."""
    if not tokens:
        raise ValidationError("encode_sentence: empty token list")
    x = embed_tokens(model, tokens)
    h_f = ad.lstm_seq(x, model.enc_f)
    h_b = ad.lstm_seq(x, model.enc_b, reverse=True)
    last_f = ad.gather_rows(h_f, [len(tokens) - 1])
    first_b = ad.gather_rows(h_b, [0])
    return ad.concat_cols([last_f, first_b])


def init_entity(model: Model, surface: str) -> ad.Tensor:
    """Mean of the surface tokens' embeddings through the entity projection."""
    emb = ad.mean_rows(embed_tokens(model, surface.split()))
    w, b = model.ent_init
    return ad.affine(emb, w, b)


def init_global(model: Model, kappa0: ad.Tensor, eps0: ad.Tensor | None) -> ad.Tensor:
    """Affine map over the concatenated sentence and projected-entity means."""
    if eps0 is not None:
        pw, pb = model.glob_init_ent
        ent_mean = ad.mean_rows(ad.affine(eps0, pw, pb))
    else:
        ent_mean = ad.Tensor(np.zeros((1, model.dims.sent_dim)))
    w, b = model.glob_init
    return ad.affine(ad.concat_cols([ad.mean_rows(kappa0), ent_mean]), w, b)


@dataclass
class BaseEncodings:
    """Layer-0 node states for one presented paragraph."""

    kappa0: ad.Tensor          # (I, 2H) sentence vectors
    eps0: ad.Tensor | None     # (J, De) entity vectors, None when J == 0
    g0: ad.Tensor              # (1, 2H) global seed


def encode_base(model: Model, graph: IrseGraph) -> BaseEncodings:
    kappa0 = ad.concat_rows([encode_sentence(model, sent) for sent in graph.sentences])
    eps0 = None
    if graph.n_entities:
        eps0 = ad.concat_rows([init_entity(model, s) for s in graph.entity_surfaces])
    return BaseEncodings(kappa0, eps0, init_global(model, kappa0, eps0))


ROLE_INDEX = {"subject": 0, "object": 1, "other": 2}


def role_onehot(roles: list[str]) -> ad.Tensor:
    out = np.zeros((len(roles), 3))
    for k, r in enumerate(roles):
        out[k, ROLE_INDEX[r]] = 1.0
    return ad.Tensor(out)


def load_embedding_file(path: str, model: Model) -> int:
    """Overwrite embedding rows from `token v1 ... vd` lines; returns the
    number of vocabulary tokens that received vectors."""
    hits = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if len(values) != model.dims.embed_dim:
                raise ValidationError(
                    f"{path}:{lineno}: vector has {len(values)} dims, model expects {model.dims.embed_dim}")
            if token in model.vocab:
                model.embed.data[model.vocab[token]] = np.asarray(values, dtype=np.float64)
                hits += 1
    return hits
