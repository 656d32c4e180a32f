"""Deterministic indexing of graph vocabulary for the embedding models.

Entities and relations are numbered by sorted name, so every process
that sees the same graph assigns the same indices regardless of hash
randomization or iteration order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .kg import KnowledgeGraph, QualifiedLink, Triple


@dataclass(frozen=True)
class Vocabulary:
    entities: tuple[str, ...]
    relations: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "_e2i", {name: i for i, name in enumerate(self.entities)}
        )
        object.__setattr__(
            self, "_r2i", {name: i for i, name in enumerate(self.relations)}
        )
        if len(self._e2i) != len(self.entities):
            raise ValidationError("duplicate entity in vocabulary")
        if len(self._r2i) != len(self.relations):
            raise ValidationError("duplicate relation in vocabulary")

    @classmethod
    def from_kg(cls, kg: KnowledgeGraph) -> "Vocabulary":
        return cls(
            entities=tuple(sorted(kg.entities)),
            relations=tuple(sorted(kg.relations())),
        )

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def entity_id(self, name: str) -> int:
        try:
            return self._e2i[name]
        except KeyError:
            raise ValidationError(f"entity {name!r} not in vocabulary") from None

    def relation_id(self, name: str) -> int:
        try:
            return self._r2i[name]
        except KeyError:
            raise ValidationError(f"relation {name!r} not in vocabulary") from None

    def entity_ids(self, names: Iterable[str]) -> np.ndarray:
        return np.array([self.entity_id(n) for n in names], dtype=np.int64)

    def type_entity_ids(self, kg: KnowledgeGraph) -> np.ndarray:
        return self.entity_ids(sorted(kg.type_entities))

    def to_dict(self) -> dict:
        return {"entities": list(self.entities), "relations": list(self.relations)}

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        return cls(
            entities=tuple(data["entities"]), relations=tuple(data["relations"])
        )


@dataclass(frozen=True)
class EncodedLinks:
    """Qualified links in index form, qualifiers flattened with an
    owner array mapping each qualifier row to its link row."""

    heads: np.ndarray
    rels: np.ndarray
    tails: np.ndarray
    qual_rels: np.ndarray
    qual_ents: np.ndarray
    qual_owner: np.ndarray

    @property
    def n(self) -> int:
        return len(self.heads)


def encode_links(
    links: Sequence[QualifiedLink], vocab: Vocabulary
) -> EncodedLinks:
    heads, rels, tails = [], [], []
    q_rels, q_ents, q_owner = [], [], []
    for row, link in enumerate(links):
        heads.append(vocab.entity_id(link.head))
        rels.append(vocab.relation_id(link.relation))
        tails.append(vocab.entity_id(link.tail))
        for qrel, qent in link.qualifiers:
            q_rels.append(vocab.relation_id(qrel))
            q_ents.append(vocab.entity_id(qent))
            q_owner.append(row)
    return EncodedLinks(
        heads=np.array(heads, dtype=np.int64),
        rels=np.array(rels, dtype=np.int64),
        tails=np.array(tails, dtype=np.int64),
        qual_rels=np.array(q_rels, dtype=np.int64),
        qual_ents=np.array(q_ents, dtype=np.int64),
        qual_owner=np.array(q_owner, dtype=np.int64),
    )


def encode_plain(
    triples: Iterable[Triple], vocab: Vocabulary
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """((h,), (r,), (t,)) index arrays in sorted triple order."""
    ordered = sorted(triples)
    heads = np.array([vocab.entity_id(h) for h, _, _ in ordered], dtype=np.int64)
    rels = np.array([vocab.relation_id(r) for _, r, _ in ordered], dtype=np.int64)
    tails = np.array([vocab.entity_id(t) for _, _, t in ordered], dtype=np.int64)
    return heads, rels, tails
