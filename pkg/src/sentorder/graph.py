"""Sentence-entity graph with directed, complementary pairwise-order weights.

Sentence nodes are linked when they share an entity; each linked pair
carries two directed weights w(i,i') and w(i',i) = 1 - w(i,i') giving the
modeled probability that one sentence precedes the other.  Only the
canonical direction (i < i') is stored, so the complement identity holds
structurally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROLES = ("subject", "object", "other")
_ROLE_PRIORITY = {"subject": 0, "object": 1, "other": 2}


class ValidationError(ValueError):
    """A record or argument violates its schema; message names the field."""


class NoEdgeError(KeyError):
    """Referenced sentence pair has no ss-edge."""


class RangeError(ValueError):
    """Weight outside [0, 1]."""


class StateError(ValueError):
    """Operation applied to an object in the wrong state."""


@dataclass
class Mention:
    surface: str
    sentence_index: int
    role: str


@dataclass
class ParagraphRecord:
    """Sentences in gold order plus entity-mention annotations."""

    id: str
    sentences: list[list[str]]
    entities: list[Mention]
    relations: list[tuple[str, str]] = field(default_factory=list)

    def validate(self) -> None:
        if len(self.sentences) < 2:
            raise ValidationError(f"sentences: need >= 2, got {len(self.sentences)} (record {self.id})")
        for k, sent in enumerate(self.sentences):
            if not sent:
                raise ValidationError(f"sentences[{k}]: empty sentence (record {self.id})")
        for m in self.entities:
            if not (0 <= m.sentence_index < len(self.sentences)):
                raise ValidationError(
                    f"entities: sentence_index {m.sentence_index} out of range (record {self.id})")
            if m.role not in ROLES:
                raise ValidationError(f"entities: role {m.role!r} not in {ROLES} (record {self.id})")
        surfaces = {canonical(m.surface) for m in self.entities}
        for a, b in self.relations:
            if canonical(a) not in surfaces or canonical(b) not in surfaces:
                raise ValidationError(f"relations: unknown entity surface in ({a!r}, {b!r}) (record {self.id})")


def canonical(surface: str) -> str:
    return surface.lower()


class IrseGraph:
    """Graph over one presented paragraph: I sentence nodes, J entity nodes,
    a virtual global node (implicitly adjacent to everything), se/ee edges,
    and weighted directed ss-edge pairs."""

    def __init__(self, sentences: list[list[str]], entity_surfaces: list[str],
                 se_edges: list[tuple[int, int, str]], ee_edges: list[tuple[int, int]],
                 ss_pairs: list[tuple[int, int]]):
        self.sentences = sentences
        self.entity_surfaces = entity_surfaces
        self.se_edges = se_edges
        self.ee_edges = ee_edges
        self._weights: dict[tuple[int, int], float] = {p: 0.5 for p in sorted(ss_pairs)}

    @property
    def n_sentences(self) -> int:
        return len(self.sentences)

    @property
    def n_entities(self) -> int:
        return len(self.entity_surfaces)

    def linked_pairs(self) -> list[tuple[int, int]]:
        """Canonical (i, i') pairs with i < i', sorted."""
        return list(self._weights)

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self._weights

    def weight(self, i: int, j: int) -> float:
        """Directed weight w(i, j): probability sentence i precedes j."""
        key = (min(i, j), max(i, j))
        if key not in self._weights:
            raise NoEdgeError(f"no ss-edge between sentences {i} and {j}")
        w = self._weights[key]
        return w if i < j else 1.0 - w

    def set_pair_weight(self, i: int, j: int, w: float) -> None:
        """Store w for direction i->j and 1-w for j->i atomically."""
        if not (0.0 <= w <= 1.0):
            raise RangeError(f"weight {w} outside [0, 1]")
        key = (min(i, j), max(i, j))
        if key not in self._weights:
            raise NoEdgeError(f"no ss-edge between sentences {i} and {j}")
        self._weights[key] = w if i < j else 1.0 - w

    def weight_map(self) -> dict[tuple[int, int], float]:
        return dict(self._weights)


def build_graph(record: ParagraphRecord, order_seed: int | None) -> tuple[IrseGraph, list[int]]:
    """Construct the graph for a seeded random presentation of the record.

    Returns (graph, presented_order) where presented_order[k] is the gold
    position of the sentence shown at slot k.  All ss weights start at 0.5.
    order_seed None keeps the record's own sentence order.
    """
    record.validate()
    n = len(record.sentences)
    if order_seed is None:
        perm = np.arange(n)
    else:
        perm = np.random.default_rng(order_seed).permutation(n)
    presented = [record.sentences[g] for g in perm]
    slot_of_gold = {int(g): k for k, g in enumerate(perm)}

    surfaces = sorted({canonical(m.surface) for m in record.entities})
    ent_index = {s: j for j, s in enumerate(surfaces)}

    # se-edges: one per (sentence, entity); multiple mentions collapse with
    # role priority subject > object > other
    role_of: dict[tuple[int, int], str] = {}
    for m in record.entities:
        i = slot_of_gold[m.sentence_index]
        j = ent_index[canonical(m.surface)]
        prev = role_of.get((i, j))
        if prev is None or _ROLE_PRIORITY[m.role] < _ROLE_PRIORITY[prev]:
            role_of[(i, j)] = m.role
    se_edges = [(i, j, role_of[(i, j)]) for (i, j) in sorted(role_of)]

    # ss-edges: sentence pairs sharing at least one entity
    sentences_of_entity: dict[int, set[int]] = {}
    for (i, j) in role_of:
        sentences_of_entity.setdefault(j, set()).add(i)
    ss_pairs: set[tuple[int, int]] = set()
    for members in sentences_of_entity.values():
        ms = sorted(members)
        for a in range(len(ms)):
            for b in range(a + 1, len(ms)):
                ss_pairs.add((ms[a], ms[b]))

    ee_edges: set[tuple[int, int]] = set()
    for a, b in record.relations:
        ja, jb = ent_index[canonical(a)], ent_index[canonical(b)]
        if ja != jb:
            ee_edges.add((min(ja, jb), max(ja, jb)))

    graph = IrseGraph(presented, surfaces, se_edges, sorted(ee_edges), sorted(ss_pairs))
    return graph, [int(g) for g in perm]


def assign_gold_weights(graph: IrseGraph, gold_positions: list[int]) -> None:
    """Set every linked pair to 1/0 by ground-truth precedence."""
    if sorted(gold_positions) != list(range(graph.n_sentences)):
        raise ValidationError(f"gold_positions: not a permutation of 0..{graph.n_sentences - 1}")
    for (i, j) in graph.linked_pairs():
        graph.set_pair_weight(i, j, 1.0 if gold_positions[i] < gold_positions[j] else 0.0)


def inject_noise(graph: IrseGraph, eta: float, rng: np.random.Generator) -> int:
    """Corrupt a ratio eta of gold-weighted pairs with order-contradicting weights.

    For each selected pair the direction whose gold weight was 1 gets a draw
    from [0, 0.5), so the corrupted weight disagrees with the gold ordering.
    Returns the number of corrupted pairs.
    """
    if not (0.0 <= eta <= 1.0):
        raise RangeError(f"eta {eta} outside [0, 1]")
    pairs = graph.linked_pairs()
    n_corrupt = int(round(eta * len(pairs)))
    if n_corrupt == 0:
        return 0
    chosen = rng.choice(len(pairs), size=n_corrupt, replace=False)
    for idx in sorted(int(c) for c in chosen):
        i, j = pairs[idx]
        u = rng.uniform(0.0, 0.5)
        if graph.weight(i, j) >= 0.5:
            graph.set_pair_weight(i, j, u)
        else:
            graph.set_pair_weight(j, i, u)
    return n_corrupt


def uncertain_reset(graph: IrseGraph, pairs) -> None:
    """Reset both directed weights of every listed pair to 0.5."""
    for (i, j) in sorted(pairs):
        graph.set_pair_weight(i, j, 0.5)
