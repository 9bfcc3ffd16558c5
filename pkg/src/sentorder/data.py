"""Corpus ingestion, deterministic splits, and the synthetic generator.

Records are stored one JSON object per line: keys ``id``, ``sentences``
(array of arrays of strings), ``entities`` (array of {surface,
sentence_index, role}), optional ``relations`` (array of [surface,
surface]).  Unknown keys are ignored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .graph import ROLES, Mention, ParagraphRecord, ValidationError, canonical


class ParseError(ValueError):
    """Malformed corpus line; message carries line number and field."""


class SizeError(ValueError):
    """Too few records for the requested operation."""


def record_to_dict(record: ParagraphRecord) -> dict:
    doc = {
        "id": record.id,
        "sentences": record.sentences,
        "entities": [{"surface": m.surface, "sentence_index": m.sentence_index, "role": m.role}
                     for m in record.entities],
    }
    if record.relations:
        doc["relations"] = [list(pair) for pair in record.relations]
    return doc


def record_from_dict(doc: dict) -> ParagraphRecord:
    for key in ("id", "sentences", "entities"):
        if key not in doc:
            raise ParseError(f"missing key {key!r}")
    sentences = doc["sentences"]
    if not isinstance(sentences, list) or not all(
            isinstance(s, list) and all(isinstance(t, str) for t in s) for s in sentences):
        raise ParseError("field 'sentences': expected array of arrays of strings")
    mentions = []
    for e in doc["entities"]:
        if not isinstance(e, dict) or not {"surface", "sentence_index", "role"} <= set(e):
            raise ParseError("field 'entities': expected objects with surface/sentence_index/role")
        if e["role"] not in ROLES:
            raise ParseError(f"field 'role': {e['role']!r} not one of {ROLES}")
        mentions.append(Mention(str(e["surface"]), int(e["sentence_index"]), e["role"]))
    relations = []
    for pair in doc.get("relations", []):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ParseError("field 'relations': expected [surface, surface] pairs")
        relations.append((str(pair[0]), str(pair[1])))
    return ParagraphRecord(str(doc["id"]), sentences, mentions, relations)


def load_corpus(path: str) -> list[ParagraphRecord]:
    """Read and validate a JSONL corpus; errors carry the offending line."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {lineno}: invalid JSON ({exc})") from exc
            try:
                record = record_from_dict(doc)
                record.validate()
            except (ParseError, ValidationError) as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
            records.append(record)
    return records


def save_corpus(records: list[ParagraphRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record)) + "\n")


def split_corpus(records: list, ratios: tuple = (8, 1, 1), seed: int = 0):
    """Seeded shuffle then contiguous partition into (train, val, test).

    Sizes are floor(n * ratio / total) with the remainder going to train;
    every split then gets at least one record, taken back from train.
    """
    if any(r <= 0 for r in ratios) or len(ratios) != 3:
        raise ValueError(f"ratios must be three positive numbers, got {ratios}")
    n = len(records)
    if n < 3:
        raise SizeError(f"need at least 3 records to split, got {n}")
    total = sum(ratios)
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [records[int(k)] for k in order]
    n_val = int(n * ratios[1] // total)
    n_test = int(n * ratios[2] // total)
    n_train = n - n_val - n_test
    if n_val == 0:
        n_val, n_train = 1, n_train - 1
    if n_test == 0:
        n_test, n_train = 1, n_train - 1
    train = shuffled[:n_train]
    val = shuffled[n_train:n_train + n_val]
    test = shuffled[n_train + n_val:]
    return train, val, test


def shuffle_paragraph(record: ParagraphRecord, seed: int):
    """Seeded uniform presentation; returns (presented sentences, gold_positions).

    gold_positions[k] is the gold rank of the sentence presented at slot k;
    placing presented[k] at index gold_positions[k] restores the original.
    """
    n = len(record.sentences)
    perm = np.random.default_rng(seed).permutation(n)
    presented = [record.sentences[int(g)] for g in perm]
    return presented, [int(g) for g in perm]


# --------------------------------------------------------------------------
# synthetic corpus
# --------------------------------------------------------------------------

ENTITY_POOL = [
    "falcon", "harbor", "engine", "garden", "ledger", "signal", "marble", "bridge",
    "lantern", "orchard", "compass", "turbine", "meadow", "anchor", "beacon", "quarry",
    "saddle", "tunnel", "vessel", "windmill", "archive", "basin", "circuit", "dynamo",
    "furnace", "granary", "helm", "istmus", "jetty", "kiln", "lagoon", "mill",
]

VERBS = ["follows", "guides", "meets", "signals", "watches", "passes",
         "joins", "greets", "shadows", "circles", "crosses", "finds"]

# discourse connectives shared across every position, so a cue marks
# narrative flow but never ranks one sentence against another
CONNECTIVES = ["then", "later", "meanwhile", "soon", "next", "afterward"]


@dataclass
class SynthConfig:
    n_paragraphs: int = 100
    min_sentences: int = 4
    max_sentences: int = 6
    entity_pool_size: int = 24
    min_entities: int = 3
    max_entities: int = 5
    cue_probability: float = 0.8
    seed: int = 0

    def validate(self) -> None:
        if self.min_sentences < 2 or self.max_sentences < self.min_sentences:
            raise ValueError("sentence-count range is empty or below 2")
        if not (2 <= self.min_entities <= self.max_entities <= self.entity_pool_size):
            raise ValueError("entities-per-paragraph range is empty")
        if self.entity_pool_size > len(ENTITY_POOL):
            raise ValueError(f"entity_pool_size {self.entity_pool_size} exceeds pool of {len(ENTITY_POOL)}")
        if not (0.0 <= self.cue_probability <= 1.0):
            raise ValueError("cue_probability outside [0, 1]")


def generate_synthetic(cfg: SynthConfig) -> list[ParagraphRecord]:
    """Template paragraphs whose entity cast threads consecutive sentences.

    Each sentence relates two cast entities; subject/object orientation is
    a coin flip, so syntactic roles carry no order information.  An entity's
    first mention renders as "the X" and every later one as "the same X",
    which makes the plain-mention side of a shared-entity sentence pair the
    earlier one; a pair whose shared entities are all repeat mentions stays
    ambiguous in isolation and is orderable only through the surrounding
    graph.  With cue_probability a sentence opens with a discourse
    connective drawn from one shared pool used at every position, so cues
    mark narrative flow without ranking any two sentences.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    pool = ENTITY_POOL[:cfg.entity_pool_size]
    records = []
    for pidx in range(cfg.n_paragraphs):
        n_sent = int(rng.integers(cfg.min_sentences, cfg.max_sentences + 1))
        n_cast = int(rng.integers(cfg.min_entities, cfg.max_entities + 1))
        cast = [pool[int(k)] for k in rng.choice(len(pool), size=n_cast, replace=False)]

        seen: set = set()
        recent: list = []

        def render(entity):
            # "the X" introduces, "the same X" marks every revisit; recency
            # bookkeeping keeps revisits near their introduction
            if entity in recent:
                recent.remove(entity)
            recent.insert(0, entity)
            if entity in seen:
                return ["the", "same", entity]
            seen.add(entity)
            return ["the", entity]

        def pick_recent(exclude):
            opts = [e for e in recent if e not in exclude][:3]
            if not opts:
                return None
            p = np.array([0.55, 0.3, 0.15][:len(opts)])
            return opts[int(rng.choice(len(opts), p=p / p.sum()))]

        # the chain entity threads consecutive sentences: links mostly
        # introduce a fresh cast member, otherwise they revisit a recent one
        cur = cast[0]
        sentences, mentions = [], []
        for k in range(n_sent):
            fresh = [e for e in cast if e not in seen and e != cur]
            if fresh and rng.random() < 0.6:
                nxt = fresh[0]
            else:
                nxt = pick_recent({cur})
                if nxt is None:
                    nxt = fresh[0]
            if rng.random() < 0.5:
                subj, obj = cur, nxt
            else:
                subj, obj = nxt, cur
            verb = VERBS[int(rng.integers(len(VERBS)))]
            tokens = []
            if rng.random() < cfg.cue_probability:
                tokens.append(CONNECTIVES[int(rng.integers(len(CONNECTIVES)))])
            tokens += render(subj) + [verb] + render(obj)
            mentions.append(Mention(subj, k, "subject"))
            mentions.append(Mention(obj, k, "object"))
            cands = [e for e in cast if e not in (subj, obj)]
            if cands and rng.random() < 0.5:
                unseen = [e for e in cands if e not in seen]
                if unseen and rng.random() < 0.4:
                    extra = unseen[0]
                else:
                    extra = pick_recent({subj, obj})
                if extra is not None:
                    tokens += ["near"] + render(extra)
                    mentions.append(Mention(extra, k, "other"))
            sentences.append(tokens)
            cur = nxt

        # relations: entities co-occurring in >= 2 common sentences
        sent_sets: dict[str, set[int]] = {}
        for m in mentions:
            sent_sets.setdefault(canonical(m.surface), set()).add(m.sentence_index)
        relations = []
        for ea, eb in combinations(sorted(sent_sets), 2):
            if len(sent_sets[ea] & sent_sets[eb]) >= 2:
                relations.append((ea, eb))

        records.append(ParagraphRecord(f"synth-{cfg.seed}-{pidx:05d}", sentences, mentions, relations))
    return records
