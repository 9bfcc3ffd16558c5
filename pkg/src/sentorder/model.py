"""Model dimensions and the full named-parameter set.

One flat ``ModelParams`` collection backs checkpointing; typed views
(LstmParams, GruParams) are built on top for the forward code.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import (CheckpointError, GruParams, LstmParams, ModelParams,
                       NumericError, load_checkpoint_doc)

UNK_TOKEN = "<unk>"


@dataclass
class ModelDims:
    embed_dim: int = 32
    lstm_hidden: int = 64
    entity_dim: int = 32
    mlp_hidden: int = 128
    decoder_hidden: int = 128
    attn_dim: int = 64
    n_layers: int = 3

    @property
    def sent_dim(self) -> int:
        return 2 * self.lstm_hidden

    def validate(self) -> None:
        for field_name, v in asdict(self).items():
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"dims.{field_name}: expected positive int, got {v!r}")


def build_vocab(records) -> dict[str, int]:
    """Deterministic token index over sentence tokens and entity surfaces."""
    tokens = set()
    for r in records:
        for sent in r.sentences:
            tokens.update(sent)
        for m in r.entities:
            tokens.update(m.surface.lower().split())
    vocab = {UNK_TOKEN: 0}
    for t in sorted(tokens):
        if t not in vocab:
            vocab[t] = len(vocab)
    return vocab


def _lstm(mp: ModelParams, prefix: str, in_dim: int, hidden: int) -> LstmParams:
    return LstmParams(mp.new(f"{prefix}.wx", (in_dim, 4 * hidden)),
                      mp.new(f"{prefix}.wh", (hidden, 4 * hidden)),
                      mp.new(f"{prefix}.b", (4 * hidden,)))


def _gru(mp: ModelParams, prefix: str, in_dim: int, hidden: int) -> GruParams:
    names = {}
    for gate in ("z", "r", "h"):
        names[f"w{gate}"] = mp.new(f"{prefix}.w{gate}", (in_dim, hidden))
        names[f"u{gate}"] = mp.new(f"{prefix}.u{gate}", (hidden, hidden))
        names[f"b{gate}"] = mp.new(f"{prefix}.b{gate}", (hidden,))
    return GruParams(names)


def _mlp(mp: ModelParams, prefix: str, in_dim: int, hidden: int):
    return (mp.new(f"{prefix}.h.w", (in_dim, hidden)), mp.new(f"{prefix}.h.b", (hidden,)),
            mp.new(f"{prefix}.o.w", (hidden, 1)), mp.new(f"{prefix}.o.b", (1,)))


class Model:
    """All trainable state for the orderer, plus its vocabulary."""

    def __init__(self, dims: ModelDims, vocab: dict[str, int], seed: int = 0):
        dims.validate()
        if vocab.get(UNK_TOKEN) != 0:
            raise ValueError(f"vocab must map {UNK_TOKEN!r} to index 0")
        self.dims = dims
        self.vocab = vocab
        mp = ModelParams(seed)
        self.params = mp
        E, H, De = dims.embed_dim, dims.lstm_hidden, dims.entity_dim
        Ds = dims.sent_dim
        Dd, A, M = dims.decoder_hidden, dims.attn_dim, dims.mlp_hidden
        n_roles = 3

        self.embed = mp.new("embed", (len(vocab), E))
        self.enc_f = _lstm(mp, "enc_f", E, H)
        self.enc_b = _lstm(mp, "enc_b", E, H)
        self.ent_init = (mp.new("ent_init.w", (E, De)), mp.new("ent_init.b", (De,)))
        self.glob_init_ent = (mp.new("glob_init.ent.w", (De, Ds)), mp.new("glob_init.ent.b", (Ds,)))
        self.glob_init = (mp.new("glob_init.w", (2 * Ds, Ds)), mp.new("glob_init.b", (Ds,)))

        # message gates and value projections, named by sender->receiver
        self.ss_gate = (mp.new("grn.ss_gate.w", (2 * Ds, Ds)), mp.new("grn.ss_gate.b", (Ds,)))
        self.es_val = (mp.new("grn.es_val.w", (De, Ds)), mp.new("grn.es_val.b", (Ds,)))
        self.es_gate = (mp.new("grn.es_gate.w", (2 * Ds + n_roles, Ds)), mp.new("grn.es_gate.b", (Ds,)))
        self.se_val = (mp.new("grn.se_val.w", (Ds, De)), mp.new("grn.se_val.b", (De,)))
        self.se_gate = (mp.new("grn.se_gate.w", (2 * De + n_roles, De)), mp.new("grn.se_gate.b", (De,)))
        self.ee_gate = (mp.new("grn.ee_gate.w", (2 * De, De)), mp.new("grn.ee_gate.b", (De,)))
        self.glob_to_ent = (mp.new("grn.glob_to_ent.w", (Ds, De)), mp.new("grn.glob_to_ent.b", (De,)))
        self.ent_to_glob = (mp.new("grn.ent_to_glob.w", (De, Ds)), mp.new("grn.ent_to_glob.b", (Ds,)))
        self.sent_gru = _gru(mp, "grn.sent_gru", 4 * Ds, Ds)
        self.ent_gru = _gru(mp, "grn.ent_gru", 4 * De, De)
        self.glob_gru = _gru(mp, "grn.glob_gru", 2 * Ds, Ds)

        self.clf_init = _mlp(mp, "clf_init", 2 * Ds, M)
        self.clf_iter = _mlp(mp, "clf_iter", 2 * Ds, M)

        self.dec_lstm = _lstm(mp, "dec.lstm", Ds, Dd)
        self.dec_start = mp.new("dec.start", (1, Ds))
        self.dec_h0 = (mp.new("dec.h0.w", (Ds, Dd)), mp.new("dec.h0.b", (Dd,)))
        self.attn_w = mp.new("dec.attn_w", (Dd, A))
        self.attn_u = mp.new("dec.attn_u", (Ds, A))
        self.attn_b = mp.new("dec.attn_b", (A,))
        self.attn_q = mp.new("dec.attn_q", (A, 1))

    def lookup(self, token: str) -> int:
        return self.vocab.get(token, 0)

    def save(self, path: str) -> None:
        self.params.save(path, extra={"dims": asdict(self.dims), "vocab": self.vocab})

    @classmethod
    def load(cls, path: str) -> "Model":
        doc = load_checkpoint_doc(path)
        for key in ("dims", "vocab", "params"):
            if key not in doc:
                raise CheckpointError(f"checkpoint missing {key!r}")
        try:
            dims = ModelDims(**doc["dims"])
        except TypeError as exc:
            raise CheckpointError(f"checkpoint dims do not match this model: {exc}") from exc
        model = cls(dims, doc["vocab"])
        model.params.load_state(doc["params"])
        for p in model.params:
            if not np.isfinite(p.data).all():
                raise NumericError(f"checkpoint parameter {p.name!r} holds non-finite values")
        return model
