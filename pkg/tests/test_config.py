"""Run configuration defaults, validation, and strict JSON loading."""

import json

import pytest

from sentorder.config import ConfigError, RunConfig, config_from_dict, load_config


class TestDefaults:
    def test_defaults_validate(self):
        RunConfig().validate()

    def test_dims_passthrough(self):
        cfg = RunConfig(embed_dim=8, lstm_hidden=5, n_layers=2)
        d = cfg.dims()
        assert (d.embed_dim, d.lstm_hidden, d.n_layers) == (8, 5, 2)
        assert d.sent_dim == 10

    def test_synth_passthrough(self):
        cfg = RunConfig(seed=11, synth_paragraphs=7, synth_cue_probability=0.5)
        s = cfg.synth()
        assert (s.n_paragraphs, s.cue_probability, s.seed) == (7, 0.5, 11)


class TestValidation:
    @pytest.mark.parametrize("field,value,fragment", [
        ("delta_min", 0.0, "band"),
        ("delta_min", 0.6, "band"),
        ("delta_max", 0.45, "band"),
        ("delta_max", 1.0, "band"),
        ("dropout", 1.0, "dropout"),
        ("dropout", -0.1, "dropout"),
        ("noise_eta", 1.5, "noise_eta"),
        ("refine_mode", "eager", "refine_mode"),
        ("batch_size", 0, ">= 1"),
        ("k_max", 0, ">= 1"),
        ("beam_width", 0, ">= 1"),
        ("lr", 0.0, "positive"),
        ("rho", -1.0, "positive"),
        ("adadelta_eps", 0.0, "positive"),
        ("n_layers", 0, "n_layers"),
        ("synth_min_sentences", 0, "sentence-count"),
    ])
    def test_bad_values_rejected(self, field, value, fragment):
        cfg = RunConfig(**{field: value})
        with pytest.raises(ConfigError, match=fragment):
            cfg.validate()

    def test_band_edges_allowed(self):
        RunConfig(delta_min=0.5, delta_max=0.5).validate()


class TestLoading:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys.*turbo"):
            config_from_dict({"seed": 1, "turbo": True})

    def test_round_trip(self):
        cfg = RunConfig(seed=3, beam_width=8, refine_mode="initial_only")
        again = config_from_dict(cfg.to_dict())
        assert again == cfg

    def test_load_config_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 5, "k_max": 2}), encoding="utf-8")
        cfg = load_config(str(path))
        assert (cfg.seed, cfg.k_max) == (5, 2)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope", encoding="utf-8")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(str(path))

    def test_non_object_json(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError, match="object"):
            load_config(str(path))

    def test_invalid_value_from_dict(self):
        with pytest.raises(ConfigError):
            config_from_dict({"dropout": 2.0})
