"""Corpus serialization, splits, presentation shuffles, and the generator."""

import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sentorder.data import (ParseError, SizeError, SynthConfig, generate_synthetic,
                            load_corpus, save_corpus, shuffle_paragraph, split_corpus)
from sentorder.graph import build_graph, canonical

from conftest import make_chain_record, make_pair_record


class TestCorpusIO:
    def test_round_trip(self, tmp_path):
        records = [make_chain_record("a"), make_pair_record("b")]
        records[0].relations = [("falcon", "harbor")]
        path = tmp_path / "corpus.jsonl"
        save_corpus(records, str(path))
        loaded = load_corpus(str(path))
        assert [r.id for r in loaded] == ["a", "b"]
        for orig, back in zip(records, loaded):
            assert back.sentences == orig.sentences
            assert back.entities == orig.entities
            assert back.relations == orig.relations

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert load_corpus(str(path)) == []

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "gaps.jsonl"
        doc = {"id": "x", "sentences": [["a", "b"], ["a"]],
               "entities": [{"surface": "a", "sentence_index": 0, "role": "subject"}]}
        path.write_text("\n" + json.dumps(doc) + "\n\n")
        assert len(load_corpus(str(path))) == 1

    def test_unknown_keys_ignored(self, tmp_path):
        path = tmp_path / "extra.jsonl"
        doc = {"id": "x", "sentences": [["a"], ["a"]],
               "entities": [{"surface": "a", "sentence_index": 0, "role": "subject"}],
               "annotator": "v2", "confidence": 0.9}
        path.write_text(json.dumps(doc) + "\n")
        assert load_corpus(str(path))[0].id == "x"

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("{not json\n")
        with pytest.raises(ParseError, match="line 1"):
            load_corpus(str(path))

    def test_bad_role_names_field(self, tmp_path):
        path = tmp_path / "role.jsonl"
        doc = {"id": "x", "sentences": [["a"], ["a"]],
               "entities": [{"surface": "a", "sentence_index": 0, "role": "verb"}]}
        path.write_text(json.dumps(doc) + "\n")
        with pytest.raises(ParseError, match="role"):
            load_corpus(str(path))

    def test_missing_key_rejected(self, tmp_path):
        path = tmp_path / "missing.jsonl"
        path.write_text(json.dumps({"id": "x", "sentences": [["a"], ["b"]]}) + "\n")
        with pytest.raises(ParseError, match="entities"):
            load_corpus(str(path))


class TestSplitCorpus:
    def test_default_ratio_on_ten(self):
        train, val, test = split_corpus(list(range(10)))
        assert (len(train), len(val), len(test)) == (8, 1, 1)
        assert sorted(train + val + test) == list(range(10))

    def test_three_records_one_each(self):
        train, val, test = split_corpus(list(range(3)))
        assert (len(train), len(val), len(test)) == (1, 1, 1)

    def test_remainder_goes_to_train(self):
        train, val, test = split_corpus(list(range(99)))
        assert (len(val), len(test)) == (9, 9)
        assert len(train) == 81

    def test_deterministic(self):
        a = split_corpus(list(range(20)), seed=5)
        b = split_corpus(list(range(20)), seed=5)
        assert a == b

    def test_too_few_records(self):
        with pytest.raises(SizeError):
            split_corpus([1, 2])

    def test_bad_ratios(self):
        with pytest.raises(ValueError):
            split_corpus(list(range(10)), ratios=(8, 0, 2))


class TestShuffleParagraph:
    def test_seeded_draw_is_stable(self):
        record = generate_synthetic(SynthConfig(n_paragraphs=1, min_sentences=5,
                                                max_sentences=5, seed=0))[0]
        _, gold = shuffle_paragraph(record, 3)
        assert gold == [4, 2, 1, 3, 0]  # frozen regression draw for seed 3

    def test_positions_invert_presentation(self):
        record = make_chain_record()
        presented, gold = shuffle_paragraph(record, 11)
        restored = [None] * len(presented)
        for slot, sentence in enumerate(presented):
            restored[gold[slot]] = sentence
        assert restored == record.sentences

    @given(st.integers(0, 10_000))
    def test_gold_positions_are_a_permutation(self, seed):
        record = make_chain_record()
        _, gold = shuffle_paragraph(record, seed)
        assert sorted(gold) == [0, 1, 2, 3]


class TestGenerator:
    def test_deterministic(self):
        cfg = SynthConfig(n_paragraphs=1, seed=7)
        a, b = generate_synthetic(cfg), generate_synthetic(cfg)
        assert a[0].sentences == b[0].sentences
        assert a[0].entities == b[0].entities

    def test_records_validate_and_build(self):
        for record in generate_synthetic(SynthConfig(n_paragraphs=25, seed=1)):
            record.validate()
            build_graph(record, 0)

    def test_adjacent_sentences_share_an_entity(self):
        for record in generate_synthetic(SynthConfig(n_paragraphs=30, seed=2)):
            by_sentence = {}
            for m in record.entities:
                by_sentence.setdefault(m.sentence_index, set()).add(canonical(m.surface))
            for k in range(len(record.sentences) - 1):
                assert by_sentence[k] & by_sentence[k + 1]

    def test_cue_probability_zero_emits_no_ordinals(self):
        records = generate_synthetic(SynthConfig(n_paragraphs=10, cue_probability=0.0,
                                                 seed=3))
        ordinals = {"first", "second", "third", "fourth", "fifth", "sixth"}
        for record in records:
            for sent in record.sentences:
                assert not ordinals & set(sent)

    def test_mean_linked_pairs_at_scale(self):
        records = generate_synthetic(SynthConfig(n_paragraphs=2000, min_sentences=4,
                                                 max_sentences=6, seed=7))
        counts = [len(build_graph(r, None)[0].linked_pairs()) for r in records]
        assert float(np.mean(counts)) >= 3.0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SynthConfig(min_sentences=1).validate()
        with pytest.raises(ValueError):
            SynthConfig(min_sentences=6, max_sentences=4).validate()
        with pytest.raises(ValueError):
            SynthConfig(cue_probability=1.5).validate()
        with pytest.raises(ValueError):
            SynthConfig(entity_pool_size=9999).validate()
