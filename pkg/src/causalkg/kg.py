"""Hyper-relational causal knowledge graphs.

Builds C/CT x base/mediated graph variants from causal networks, with a
canonical text serialization, seeded train/valid/test splitting, and
count statistics.

Entity naming: network nodes are namespaced per network (``net42/ev3``)
so that equal node ids in different networks stay distinct; event types
are global entities (``type/Collide``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ceg import CausalNetwork, MediatedChain
from .errors import BuildError, ParseError, SplitError, ValidationError

Triple = tuple[str, str, str]
QualPair = tuple[str, str]

CAUSES = "causes"
CAUSED_BY = "causedBy"
CAUSES_TYPE = "causesType"
CAUSED_BY_TYPE = "causedByType"
HAS_MEDIATOR = "hasMediator"
HAS_MEDIATOR_TYPE = "hasMediatorType"
TYPE_OF = "typeOf"
CONTEXT_PREFIX = "ctx:"

CAUSAL_RELATIONS = (CAUSES, CAUSED_BY, CAUSES_TYPE, CAUSED_BY_TYPE)
QUALIFIER_RELATIONS = (HAS_MEDIATOR, HAS_MEDIATOR_TYPE)
CORE_RELATIONS = CAUSAL_RELATIONS + QUALIFIER_RELATIONS + (TYPE_OF,)

TYPE_NAMESPACE = "type/"

FORMAT_HEADER = "#causalkg v1"


def context_relation(label: str) -> str:
    return CONTEXT_PREFIX + label


def is_context_relation(relation: str) -> bool:
    return relation.startswith(CONTEXT_PREFIX)


def validate_entity_id(entity: str) -> None:
    if not entity:
        raise ValidationError("empty entity id")
    if any(ch.isspace() for ch in entity):
        raise ValidationError(f"entity id {entity!r} contains whitespace")


@dataclass(frozen=True)
class QualifiedLink:
    """A causal hyper-relational fact: (head, relation, tail, qualifiers).

    The qualifier set is stored canonically sorted by (relation, entity),
    deduplicated, so two links built from any qualifier ordering compare
    equal.
    """

    head: str
    relation: str
    tail: str
    qualifiers: tuple[QualPair, ...] = ()

    def __post_init__(self):
        if self.relation not in CAUSAL_RELATIONS:
            raise ValidationError(
                f"link relation must be one of {CAUSAL_RELATIONS}, "
                f"got {self.relation!r}"
            )
        for qrel, _ in self.qualifiers:
            if qrel not in QUALIFIER_RELATIONS:
                raise ValidationError(f"invalid qualifier relation {qrel!r}")
        canon = tuple(sorted(set(self.qualifiers)))
        object.__setattr__(self, "qualifiers", canon)

    @property
    def mediated(self) -> bool:
        return bool(self.qualifiers)

    def inverse(self) -> "QualifiedLink":
        """Mirror a causes/causedBy link; Type links have no mirror."""
        pair = {CAUSES: CAUSED_BY, CAUSED_BY: CAUSES}
        if self.relation not in pair:
            raise ValidationError(f"{self.relation!r} links have no inverse form")
        return QualifiedLink(self.tail, pair[self.relation], self.head, self.qualifiers)

    def sort_key(self):
        return (self.head, self.relation, self.tail, self.qualifiers)


@dataclass(frozen=True, eq=True)
class KnowledgeGraph:
    """Immutable hyper-relational causal KG.

    ``qlinks`` holds every causal link (empty qualifier tuple for plain
    ones); ``triples`` holds typeOf and context facts. ``entity_types``
    maps each causal entity to its type entity in both variants; only the
    CT variant materializes the map as typeOf triples.
    """

    triples: frozenset[Triple]
    qlinks: frozenset[QualifiedLink]
    entity_types: dict[str, str]
    variant: str
    mediated: bool

    @property
    def entities(self) -> frozenset[str]:
        out: set[str] = set()
        for h, _, t in self.triples:
            out.add(h)
            out.add(t)
        for link in self.qlinks:
            out.add(link.head)
            out.add(link.tail)
            out.update(e for _, e in link.qualifiers)
        out.update(self.entity_types.keys())
        out.update(self.entity_types.values())
        return frozenset(out)

    @property
    def causal_entities(self) -> frozenset[str]:
        return frozenset(self.entity_types.keys())

    @property
    def type_entities(self) -> frozenset[str]:
        return frozenset(self.entity_types.values())

    def relations(self) -> frozenset[str]:
        out = {r for _, r, _ in self.triples}
        for link in self.qlinks:
            out.add(link.relation)
            out.update(qr for qr, _ in link.qualifiers)
        return frozenset(out)

    def sorted_qlinks(self) -> list[QualifiedLink]:
        return sorted(self.qlinks, key=QualifiedLink.sort_key)

    def sorted_triples(self) -> list[Triple]:
        return sorted(self.triples)

    def validate(self) -> None:
        """Enforce structural invariants; raises ValidationError."""
        if self.variant not in ("C", "CT"):
            raise ValidationError(f"variant must be C or CT, got {self.variant!r}")
        for entity in self.entities:
            validate_entity_id(entity)

        causal = self.causal_entities
        types = self.type_entities
        for head, rel, tail in self.triples:
            if rel == TYPE_OF:
                continue  # checked against entity_types below
            if not is_context_relation(rel) or len(rel) <= len(CONTEXT_PREFIX):
                raise ValidationError(
                    f"triple relation must be {TYPE_OF!r} or ctx:<label>, got {rel!r}"
                )

        type_of = {(h, t) for h, r, t in self.triples if r == TYPE_OF}
        if self.variant == "C":
            if type_of:
                raise ValidationError("C-variant graph contains typeOf triples")
        else:
            expected = set(self.entity_types.items())
            if type_of != expected:
                raise ValidationError(
                    "CT-variant typeOf triples disagree with the entity-type table"
                )

        for link in self.qlinks:
            if link.relation in (CAUSES, CAUSED_BY):
                ends = (link.head, link.tail)
            else:
                ends = (link.head,)
                if link.tail not in types:
                    raise ValidationError(
                        f"{link.relation} tail {link.tail!r} is not a type entity"
                    )
            for entity in ends:
                if entity not in causal:
                    raise ValidationError(
                        f"link endpoint {entity!r} is not a registered causal entity"
                    )
            for qrel, qent in link.qualifiers:
                pool = causal if qrel == HAS_MEDIATOR else types
                if qent not in pool:
                    raise ValidationError(
                        f"qualifier entity {qent!r} is not registered for {qrel}"
                    )

        # Inverse closure: causes and causedBy always come in mirrored pairs.
        for link in self.qlinks:
            if link.relation in (CAUSES, CAUSED_BY) and link.inverse() not in self.qlinks:
                raise ValidationError(
                    f"missing inverse of {link.relation}({link.head}, {link.tail}) "
                    f"with qualifiers {link.qualifiers}"
                )


def check_reification(kg: KnowledgeGraph) -> None:
    """Every causes/causedBy link must have its Type-level counterpart.

    Holds for built graphs; split members may legitimately hold partial
    reified families, so this is not part of ``validate``.
    """
    for link in kg.qlinks:
        if link.relation == CAUSES:
            expected = QualifiedLink(
                link.head, CAUSES_TYPE, kg.entity_types[link.tail], link.qualifiers
            )
        elif link.relation == CAUSED_BY:
            expected = QualifiedLink(
                link.head, CAUSED_BY_TYPE, kg.entity_types[link.tail], link.qualifiers
            )
        else:
            continue
        if expected not in kg.qlinks:
            raise ValidationError(
                f"missing reified link {expected.relation}"
                f"({expected.head}, {expected.tail})"
            )


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def entity_for_node(net_id: str, node_id: str) -> str:
    return f"{net_id}/{node_id}"


def entity_for_type(event_type: str) -> str:
    return TYPE_NAMESPACE + event_type


def build_kg(
    nets: Sequence[CausalNetwork],
    chains: Mapping[str, Sequence[MediatedChain]] | None = None,
    *,
    variant: str = "CT",
    mediated: bool = True,
    context: Iterable[tuple[str, str, str]] | None = None,
) -> KnowledgeGraph:
    """Assemble the knowledge graph for a set of causal networks.

    Every network edge (u, v) yields four plain causal links: causes,
    causedBy, and the reified causesType / causedByType. When ``mediated``,
    each 2-edge chain (A, B, C) additionally yields the same four links
    from A to C carrying the qualifier pairs (hasMediator, B) and
    (hasMediatorType, type(B)). CT graphs also materialize one typeOf
    triple per causal entity. Context triples pass through under
    ``ctx:<label>`` relations.
    """
    if variant not in ("C", "CT"):
        raise BuildError(f"variant must be C or CT, got {variant!r}")
    chains = chains or {}
    known_ids = {net.id for net in nets}
    for net_id in chains:
        if net_id not in known_ids:
            raise BuildError(f"chains reference unknown network {net_id!r}")

    entity_types: dict[str, str] = {}
    qlinks: set[QualifiedLink] = set()
    triples: set[Triple] = set()

    def add_family(head: str, tail: str, qualifiers: tuple[QualPair, ...]):
        qlinks.add(QualifiedLink(head, CAUSES, tail, qualifiers))
        qlinks.add(QualifiedLink(tail, CAUSED_BY, head, qualifiers))
        qlinks.add(
            QualifiedLink(head, CAUSES_TYPE, entity_types[tail], qualifiers)
        )
        qlinks.add(
            QualifiedLink(tail, CAUSED_BY_TYPE, entity_types[head], qualifiers)
        )

    for net in nets:
        node_entities: dict[str, str] = {}
        for node in net.nodes:
            if not node.event_type:
                raise BuildError(
                    f"network {net.id!r}: node {node.id!r} has no event type"
                )
            entity = entity_for_node(net.id, node.id)
            try:
                validate_entity_id(entity)
                validate_entity_id(entity_for_type(node.event_type))
            except ValidationError as exc:
                raise BuildError(str(exc)) from None
            node_entities[node.id] = entity
            entity_types[entity] = entity_for_type(node.event_type)

        for edge in net.edges:
            add_family(node_entities[edge.src], node_entities[edge.dst], ())

        if mediated:
            edge_pairs = {(e.src, e.dst) for e in net.edges}
            for chain in chains.get(net.id, ()):
                for node_id in (chain.cause, chain.mediator, chain.effect):
                    if node_id not in node_entities:
                        raise BuildError(
                            f"chain in network {net.id!r} references "
                            f"unknown node {node_id!r}"
                        )
                if (chain.cause, chain.mediator) not in edge_pairs or (
                    chain.mediator,
                    chain.effect,
                ) not in edge_pairs:
                    raise BuildError(
                        f"chain ({chain.cause}, {chain.mediator}, {chain.effect}) "
                        f"does not follow edges of network {net.id!r}"
                    )
                mediator = node_entities[chain.mediator]
                qualifiers = (
                    (HAS_MEDIATOR, mediator),
                    (HAS_MEDIATOR_TYPE, entity_types[mediator]),
                )
                add_family(
                    node_entities[chain.cause], node_entities[chain.effect], qualifiers
                )

    if variant == "CT":
        triples.update((e, TYPE_OF, t) for e, t in entity_types.items())

    for head, label, tail in context or ():
        if not label or label in CORE_RELATIONS:
            raise BuildError(f"context label {label!r} conflicts with core relations")
        try:
            validate_entity_id(head)
            validate_entity_id(tail)
            validate_entity_id(context_relation(label))
        except ValidationError as exc:
            raise BuildError(str(exc)) from None
        triples.add((head, context_relation(label), tail))

    kg = KnowledgeGraph(
        triples=frozenset(triples),
        qlinks=frozenset(qlinks),
        entity_types=entity_types,
        variant=variant,
        mediated=mediated,
    )
    kg.validate()
    check_reification(kg)
    return kg


def plain_triples(kg: KnowledgeGraph) -> frozenset[Triple]:
    """Qualifier-stripped view: every link as a bare (head, relation, tail)."""
    out = set(kg.triples)
    out.update((l.head, l.relation, l.tail) for l in kg.qlinks)
    return frozenset(out)


# ---------------------------------------------------------------------------
# Serialization (canonical text format)
# ---------------------------------------------------------------------------


def serialize_kg(kg: KnowledgeGraph) -> bytes:
    """Canonical byte encoding: UTF-8, LF endings, tab-separated fields,
    all lines in one lexicographic sort. Equal graphs serialize
    byte-identically."""
    lines = [
        FORMAT_HEADER,
        f"#variant {kg.variant}",
        f"#mediated {'true' if kg.mediated else 'false'}",
    ]
    lines.extend(f"E\t{e}\t{t}" for e, t in kg.entity_types.items())
    lines.extend(f"T\t{h}\t{r}\t{t}" for h, r, t in kg.triples)
    for link in kg.qlinks:
        fields = [link.head, link.relation, link.tail]
        for qrel, qent in link.qualifiers:
            fields.extend((qrel, qent))
        lines.append("Q\t" + "\t".join(fields))
    lines.sort()
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_kg(data: bytes | str) -> KnowledgeGraph:
    """Parse the canonical format; inverse of serialize_kg.

    Unknown ``#`` headers are tolerated as annotations (the CLI adds
    provenance headers); unknown record tags are parse errors.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    headers: dict[str, str] = {}
    entity_types: dict[str, str] = {}
    triples: set[Triple] = set()
    qlinks: set[QualifiedLink] = set()

    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(" ")
            headers[key] = value
            continue
        fields = line.split("\t")
        tag = fields[0]
        if tag == "E":
            if len(fields) != 3:
                raise ParseError("E record needs exactly 2 fields", line=lineno)
            entity, etype = fields[1], fields[2]
            if entity in entity_types and entity_types[entity] != etype:
                raise ParseError(
                    f"conflicting types for entity {entity!r}", line=lineno
                )
            entity_types[entity] = etype
        elif tag == "T":
            if len(fields) != 4:
                raise ParseError("T record needs exactly 3 fields", line=lineno)
            triples.add((fields[1], fields[2], fields[3]))
        elif tag == "Q":
            if len(fields) < 4:
                raise ParseError("Q record needs at least 3 fields", line=lineno)
            rest = fields[4:]
            if len(rest) % 2 != 0:
                raise ParseError("Q record has an odd qualifier field count", line=lineno)
            qualifiers = tuple(zip(rest[0::2], rest[1::2]))
            try:
                qlinks.add(
                    QualifiedLink(fields[1], fields[2], fields[3], qualifiers)
                )
            except ValidationError as exc:
                raise ParseError(str(exc), line=lineno) from None
        else:
            raise ParseError(f"unknown record tag {tag!r}", line=lineno)

    if headers.get("causalkg") != "v1":
        raise ParseError("missing or unsupported '#causalkg' version header")
    variant = headers.get("variant")
    if variant not in ("C", "CT"):
        raise ParseError("missing or invalid '#variant' header")
    mediated_text = headers.get("mediated")
    if mediated_text not in ("true", "false"):
        raise ParseError("missing or invalid '#mediated' header")

    kg = KnowledgeGraph(
        triples=frozenset(triples),
        qlinks=frozenset(qlinks),
        entity_types=entity_types,
        variant=variant,
        mediated=mediated_text == "true",
    )
    kg.validate()
    return kg


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KgSplit:
    train: KnowledgeGraph
    valid: KnowledgeGraph
    test: KnowledgeGraph

    def members(self) -> tuple[tuple[str, KnowledgeGraph], ...]:
        return (("train", self.train), ("valid", self.valid), ("test", self.test))

    def union_qlinks(self) -> frozenset[QualifiedLink]:
        return self.train.qlinks | self.valid.qlinks | self.test.qlinks

    def validate(self) -> None:
        total = len(self.train.qlinks) + len(self.valid.qlinks) + len(self.test.qlinks)
        if total != len(self.union_qlinks()):
            raise ValidationError("split qlink sets are not pairwise disjoint")
        vocab_e, vocab_r = _link_vocab(self.train)
        for name, member in (("valid", self.valid), ("test", self.test)):
            ents, rels = _link_vocab(member, qlinks_only=True)
            if not ents <= vocab_e or not rels <= vocab_r:
                raise ValidationError(
                    f"{name} split uses vocabulary absent from train"
                )


def _link_vocab(
    kg: KnowledgeGraph, qlinks_only: bool = False
) -> tuple[set[str], set[str]]:
    entities: set[str] = set()
    relations: set[str] = set()
    for link in kg.qlinks:
        entities.update((link.head, link.tail))
        relations.add(link.relation)
        for qrel, qent in link.qualifiers:
            entities.add(qent)
            relations.add(qrel)
    if not qlinks_only:
        for h, r, t in kg.triples:
            entities.update((h, t))
            relations.add(r)
    return entities, relations


def split_kg(
    kg: KnowledgeGraph, ratios: tuple[float, float, float], seed: int
) -> KgSplit:
    """Seeded partition of the qualified links at the given ratios.

    causes/causedBy mirror pairs travel as one unit so each member keeps
    the inverse-closure invariant; Type links move individually. After
    the pseudo-random assignment, a repair pass moves to train any
    valid/test link whose entity or relation vocabulary is not yet
    covered by train. typeOf/context triples are background knowledge
    replicated into all three members.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise SplitError(f"ratios must be three positive fractions, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must sum to 1, got {ratios}")

    links = kg.sorted_qlinks()
    n = len(links)
    n_valid = int(ratios[1] * n)
    n_test = int(ratios[2] * n)
    if n == 0 or n_valid < 1 or n_test < 1 or n - n_valid - n_test < 1:
        raise SplitError(
            f"graph with {n} links is too small for ratios {ratios}"
        )

    units: list[tuple[QualifiedLink, ...]] = []
    paired: set[QualifiedLink] = set()
    for link in links:
        if link in paired:
            continue
        if link.relation == CAUSES:
            inverse = link.inverse()
            paired.add(inverse)
            units.append((link, inverse))
        elif link.relation == CAUSED_BY:
            inverse = link.inverse()
            paired.add(inverse)
            units.append((inverse, link))
        else:
            units.append((link,))

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(units))

    parts: dict[str, list[tuple[QualifiedLink, ...]]] = {
        "train": [],
        "valid": [],
        "test": [],
    }
    counts = {"train": 0, "valid": 0, "test": 0}
    for idx in order:
        unit = units[idx]
        if counts["test"] + len(unit) <= n_test:
            bucket = "test"
        elif counts["valid"] + len(unit) <= n_valid:
            bucket = "valid"
        else:
            bucket = "train"
        parts[bucket].append(unit)
        counts[bucket] += len(unit)

    # Coverage repair: grow train until valid/test vocabulary is covered.
    def unit_vocab(unit: tuple[QualifiedLink, ...]) -> tuple[set[str], set[str]]:
        ents: set[str] = set()
        rels: set[str] = set()
        for link in unit:
            ents.update((link.head, link.tail))
            rels.add(link.relation)
            for qrel, qent in link.qualifiers:
                ents.add(qent)
                rels.add(qrel)
        return ents, rels

    train_e: set[str] = set()
    train_r: set[str] = set()
    for h, r, t in kg.triples:
        train_e.update((h, t))
        train_r.add(r)
    for unit in parts["train"]:
        ents, rels = unit_vocab(unit)
        train_e |= ents
        train_r |= rels

    changed = True
    while changed:
        changed = False
        for name in ("valid", "test"):
            keep: list[tuple[QualifiedLink, ...]] = []
            for unit in sorted(parts[name], key=lambda u: u[0].sort_key()):
                ents, rels = unit_vocab(unit)
                if ents <= train_e and rels <= train_r:
                    keep.append(unit)
                else:
                    parts["train"].append(unit)
                    train_e |= ents
                    train_r |= rels
                    changed = True
            parts[name] = keep

    def member(unit_list: list[tuple[QualifiedLink, ...]]) -> KnowledgeGraph:
        member_links = frozenset(l for unit in unit_list for l in unit)
        return KnowledgeGraph(
            triples=kg.triples,
            qlinks=member_links,
            entity_types=dict(kg.entity_types),
            variant=kg.variant,
            mediated=kg.mediated,
        )

    split = KgSplit(member(parts["train"]), member(parts["valid"]), member(parts["test"]))
    split.validate()
    return split


def merge_split(split: KgSplit) -> KnowledgeGraph:
    """Union of all three members (triples are shared already)."""
    return KnowledgeGraph(
        triples=split.train.triples,
        qlinks=split.union_qlinks(),
        entity_types=dict(split.train.entity_types),
        variant=split.train.variant,
        mediated=split.train.mediated,
    )


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


@dataclass
class KgStats:
    links: int
    entities: int
    entity_types: int
    relations: int
    mediated_links: int

    def to_dict(self) -> dict:
        return {
            "links": self.links,
            "entities": self.entities,
            "entity_types": self.entity_types,
            "relations": self.relations,
            "mediated_links": self.mediated_links,
        }


def kg_stats(kg: KnowledgeGraph) -> KgStats:
    return KgStats(
        links=len(kg.qlinks) + len(kg.triples),
        entities=len(kg.entities),
        entity_types=len(set(kg.entity_types.values())),
        relations=len(kg.relations()),
        mediated_links=sum(1 for l in kg.qlinks if l.mediated),
    )
