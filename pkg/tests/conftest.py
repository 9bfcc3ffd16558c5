"""Shared fixtures: tiny model dimensions, a hand-built 4-sentence record,
and tape hygiene between tests."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sentorder import autodiff as ad
from sentorder.graph import Mention, ParagraphRecord
from sentorder.model import Model, ModelDims, build_vocab

settings.register_profile(
    "suite", deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")

# small enough that grad checks and exhaustive decodes stay fast
TINY = dict(embed_dim=4, lstm_hidden=3, entity_dim=3, mlp_hidden=5,
            decoder_hidden=4, attn_dim=3, n_layers=2)


@pytest.fixture(autouse=True)
def _fresh_tape():
    ad.clear_tape()
    yield
    ad.clear_tape()


def make_chain_record(rid="chain4"):
    """Four sentences whose entity sharing yields exactly the linked pairs
    (0,1), (1,2), (1,3), (2,3)."""
    sentences = [
        ["the", "falcon", "waits"],
        ["the", "falcon", "meets", "the", "harbor", "near", "the", "ledger"],
        ["the", "harbor", "guides", "the", "anchor"],
        ["the", "ledger", "finds", "the", "anchor"],
    ]
    mentions = [
        Mention("falcon", 0, "subject"),
        Mention("falcon", 1, "object"),
        Mention("harbor", 1, "subject"),
        Mention("ledger", 1, "other"),
        Mention("harbor", 2, "subject"),
        Mention("anchor", 2, "object"),
        Mention("ledger", 3, "subject"),
        Mention("anchor", 3, "object"),
    ]
    return ParagraphRecord(rid, sentences, mentions, [])


def make_pair_record(rid="pair2"):
    """Two sentences sharing one entity: a single linked pair."""
    sentences = [["the", "network", "wakes"], ["the", "network", "sleeps"]]
    mentions = [Mention("network", 0, "subject"), Mention("network", 1, "subject")]
    return ParagraphRecord(rid, sentences, mentions, [])


def tiny_model(records=None, seed=0, **overrides) -> Model:
    records = records if records is not None else [make_chain_record()]
    dims = ModelDims(**{**TINY, **overrides})
    return Model(dims, build_vocab(records), seed=seed)


def zero_params(model: Model) -> None:
    for p in model.params:
        p.data = np.zeros_like(p.data)


@pytest.fixture
def chain_record():
    return make_chain_record()


@pytest.fixture
def pair_record():
    return make_pair_record()
