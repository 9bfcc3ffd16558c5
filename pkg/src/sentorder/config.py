"""Flat run configuration with strict JSON loading."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

from .data import SynthConfig
from .model import ModelDims


class ConfigError(ValueError):
    """Bad configuration file or value."""


@dataclass
class RunConfig:
    seed: int = 0

    # model dimensions
    embed_dim: int = 32
    lstm_hidden: int = 64
    entity_dim: int = 32
    mlp_hidden: int = 128
    decoder_hidden: int = 128
    attn_dim: int = 64
    n_layers: int = 3

    # refinement
    delta_min: float = 0.2
    delta_max: float = 0.8
    k_max: int = 10
    refine_mode: str = "full"

    # optimization
    lr: float = 1.0
    rho: float = 0.95
    adadelta_eps: float = 1e-6
    l2: float = 1e-5
    batch_size: int = 16
    dropout: float = 0.5
    epochs_a: int = 3
    epochs_b: int = 3
    epochs_c: int = 3
    patience: int = 3
    noise_eta: float = 0.2

    # decoding
    beam_width: int = 4

    # training extras
    freeze_encoder_after_a: bool = False
    embedding_file: str | None = None

    # default file locations, overridable on the command line
    data_path: str | None = None
    checkpoint_path: str | None = None
    out_dir: str | None = None

    # synthetic data
    synth_paragraphs: int = 100
    synth_min_sentences: int = 4
    synth_max_sentences: int = 6
    synth_entity_pool: int = 24
    synth_min_entities: int = 3
    synth_max_entities: int = 5
    synth_cue_probability: float = 0.8

    def dims(self) -> ModelDims:
        return ModelDims(embed_dim=self.embed_dim, lstm_hidden=self.lstm_hidden,
                         entity_dim=self.entity_dim, mlp_hidden=self.mlp_hidden,
                         decoder_hidden=self.decoder_hidden, attn_dim=self.attn_dim,
                         n_layers=self.n_layers)

    def synth(self) -> SynthConfig:
        return SynthConfig(n_paragraphs=self.synth_paragraphs,
                           min_sentences=self.synth_min_sentences,
                           max_sentences=self.synth_max_sentences,
                           entity_pool_size=self.synth_entity_pool,
                           min_entities=self.synth_min_entities,
                           max_entities=self.synth_max_entities,
                           cue_probability=self.synth_cue_probability,
                           seed=self.seed)

    def validate(self) -> None:
        # the band must straddle the neutral weight strictly inside (0, 1),
        # or refinement could never mark a pair certain
        if not (0.0 < self.delta_min <= 0.5 <= self.delta_max < 1.0):
            raise ConfigError(f"uncertainty band [{self.delta_min}, {self.delta_max}] is invalid")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError(f"dropout {self.dropout} outside [0, 1)")
        if not (0.0 <= self.noise_eta <= 1.0):
            raise ConfigError(f"noise_eta {self.noise_eta} outside [0, 1]")
        if self.refine_mode not in ("full", "initial_only", "frozen"):
            raise ConfigError(f"refine_mode {self.refine_mode!r} unknown")
        if self.batch_size < 1 or self.k_max < 1 or self.beam_width < 1:
            raise ConfigError("batch_size, beam_width, and k_max must be >= 1")
        for name in ("lr", "rho", "adadelta_eps"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        try:
            self.dims().validate()
            self.synth().validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return asdict(self)


def config_from_dict(doc: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**doc)
    cfg.validate()
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return config_from_dict(doc)
