"""Causal event graph ingestion and preprocessing.

Parses a JSON corpus of scored causal event graphs, cleans each graph into
a valid causal network (acyclic, no zero-responsibility edges, deep enough
to contain a mediator), and enumerates the serial cause-mediator-effect
chains that later become qualifier pairs.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ParseError, ValidationError

# An edge score of 1 marks "no causal responsibility" and is always dropped.
MIN_CAUSAL_SCORE = 2
MAX_SCORE = 5

REASON_NO_LINKS = "no causal links"
REASON_TOO_SHALLOW = "depth less than 2"


@dataclass(frozen=True)
class CegNode:
    id: str
    description: str = ""
    event_type: str = ""
    participants: tuple[str, ...] = ()


@dataclass(frozen=True)
class CegEdge:
    src: str
    dst: str
    score: int


@dataclass(frozen=True)
class RawCeg:
    """One annotated causal event graph, exactly as found in the corpus."""

    id: str
    nodes: tuple[CegNode, ...]
    edges: tuple[CegEdge, ...]

    def validate(self) -> None:
        if not self.id:
            raise ValidationError("CEG with empty id")
        seen: set[str] = set()
        for node in self.nodes:
            if not node.id:
                raise ValidationError(f"CEG {self.id!r}: node with empty id")
            if node.id in seen:
                raise ValidationError(f"CEG {self.id!r}: duplicate node id {node.id!r}")
            seen.add(node.id)
        for edge in self.edges:
            if edge.src not in seen or edge.dst not in seen:
                raise ValidationError(
                    f"CEG {self.id!r}: edge {edge.src!r}->{edge.dst!r} "
                    "references an undeclared node"
                )
            if not 1 <= edge.score <= MAX_SCORE:
                raise ValidationError(
                    f"CEG {self.id!r}: edge {edge.src!r}->{edge.dst!r} "
                    f"has score {edge.score} outside [1, {MAX_SCORE}]"
                )


@dataclass(frozen=True)
class NetNode:
    id: str
    event_type: str


@dataclass(frozen=True)
class NetEdge:
    src: str
    dst: str
    score: int


@dataclass(frozen=True)
class CausalNetwork:
    """A cleaned causal network: acyclic, scores >= 2, root-leaf depth >= 2.

    Nodes and edges are stored as canonically sorted tuples so equal
    networks compare (and serialize) identically.
    """

    id: str
    nodes: tuple[NetNode, ...]
    edges: tuple[NetEdge, ...]

    def node_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes)

    def event_type_of(self, node_id: str) -> str:
        for node in self.nodes:
            if node.id == node_id:
                return node.event_type
        raise KeyError(node_id)


@dataclass(frozen=True)
class MediatedChain:
    """A directed 2-edge path: cause -> mediator -> effect."""

    cause: str
    mediator: str
    effect: str
    scores: tuple[int, int]


@dataclass(frozen=True)
class Rejected:
    """Preprocessing outcome for a CEG that cannot become a causal network."""

    ceg_id: str
    reason: str


@dataclass
class PruneSummary:
    total: int = 0
    accepted: int = 0
    rejections: Counter = field(default_factory=Counter)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "accepted": self.accepted,
            "rejections": dict(sorted(self.rejections.items())),
        }


# ---------------------------------------------------------------------------
# Corpus parsing
# ---------------------------------------------------------------------------


def _require(record: dict, key: str, kind: type, where: str):
    if key not in record:
        raise ParseError(f"{where}: missing key {key!r}")
    value = record[key]
    if kind is int:
        # bool is an int subclass; reject it explicitly.
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(f"{where}: key {key!r} must be an integer")
    elif not isinstance(value, kind):
        raise ParseError(f"{where}: key {key!r} must be {kind.__name__}")
    return value


def parse_ceg_corpus(data: bytes | str) -> list[RawCeg]:
    """Parse a UTF-8 JSON corpus into validated RawCeg records, in order.

    The corpus is a JSON array of objects with keys id / nodes / edges.
    Shape problems raise ParseError with the record position; semantic
    problems (dangling endpoints, out-of-range scores) raise
    ValidationError naming the offending CEG.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"corpus is not valid UTF-8: {exc}") from None
    else:
        text = data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    if not isinstance(doc, list):
        raise ParseError("corpus top level must be a JSON array")

    cegs: list[RawCeg] = []
    for i, record in enumerate(doc):
        where = f"record {i}"
        if not isinstance(record, dict):
            raise ParseError(f"{where}: entry must be a JSON object")
        ceg_id = _require(record, "id", str, where)
        where = f"record {i} (CEG {ceg_id!r})"
        nodes = []
        for obj in _require(record, "nodes", list, where):
            if not isinstance(obj, dict):
                raise ParseError(f"{where}: node entry must be a JSON object")
            participants = obj.get("participants", [])
            if not isinstance(participants, list) or not all(
                isinstance(p, str) for p in participants
            ):
                raise ParseError(f"{where}: participants must be a list of strings")
            nodes.append(
                CegNode(
                    id=_require(obj, "id", str, where),
                    description=obj.get("description", ""),
                    event_type=obj.get("event_type", ""),
                    participants=tuple(participants),
                )
            )
        edges = []
        for obj in _require(record, "edges", list, where):
            if not isinstance(obj, dict):
                raise ParseError(f"{where}: edge entry must be a JSON object")
            edges.append(
                CegEdge(
                    src=_require(obj, "src", str, where),
                    dst=_require(obj, "dst", str, where),
                    score=_require(obj, "score", int, where),
                )
            )
        ceg = RawCeg(id=ceg_id, nodes=tuple(nodes), edges=tuple(edges))
        ceg.validate()
        cegs.append(ceg)
    return cegs


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------


def _reaches(adj: dict[str, set[str]], start: str, goal: str) -> bool:
    """Directed reachability start -> goal over the adjacency map."""
    if start == goal:
        return True
    stack = [start]
    seen = {start}
    while stack:
        for nxt in adj.get(stack.pop(), ()):
            if nxt == goal:
                return True
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def _longest_path_edges(node_ids: Iterable[str], adj: dict[str, set[str]]) -> int:
    """Length in edges of the longest directed path (graph must be acyclic)."""
    memo: dict[str, int] = {}

    order: list[str] = []
    state: dict[str, int] = {}
    for root in node_ids:
        if root in state:
            continue
        stack = [(root, iter(sorted(adj.get(root, ()))))]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if nxt not in state:
                    state[nxt] = 1
                    stack.append((nxt, iter(sorted(adj.get(nxt, ())))))
                    advanced = True
                    break
            if not advanced:
                order.append(node)
                stack.pop()

    for node in order:  # reverse topological order
        memo[node] = max((memo[nxt] + 1 for nxt in adj.get(node, ())), default=0)
    return max(memo.values(), default=0)


def preprocess(ceg: RawCeg) -> CausalNetwork | Rejected:
    """Clean one CEG into a causal network, or reject it.

    Steps, in order:
      1. drop every edge with score 1;
      2. insert the remaining edges greedily in canonical order
         (descending score, then lexicographic (src, dst)), skipping any
         edge whose insertion would close a directed cycle;
      3. reject when no edges survive, or when the longest root-to-leaf
         path is shorter than 2 edges;
      4. drop nodes left without any incident edge.

    Rejection is a value, not an exception. A duplicate (src, dst) pair
    keeps only its first (highest-scored) occurrence.
    """
    ceg.validate()
    candidates = sorted(
        (e for e in ceg.edges if e.score >= MIN_CAUSAL_SCORE),
        key=lambda e: (-e.score, e.src, e.dst),
    )

    adj: dict[str, set[str]] = {}
    kept: list[CegEdge] = []
    seen_pairs: set[tuple[str, str]] = set()
    for edge in candidates:
        pair = (edge.src, edge.dst)
        if pair in seen_pairs:
            continue
        if _reaches(adj, edge.dst, edge.src):
            continue  # would close a directed cycle
        seen_pairs.add(pair)
        adj.setdefault(edge.src, set()).add(edge.dst)
        kept.append(edge)

    if not kept:
        return Rejected(ceg.id, REASON_NO_LINKS)

    used = {e.src for e in kept} | {e.dst for e in kept}
    if _longest_path_edges(sorted(used), adj) < 2:
        return Rejected(ceg.id, REASON_TOO_SHALLOW)

    types = {n.id: n.event_type for n in ceg.nodes}
    nodes = tuple(NetNode(i, types[i]) for i in sorted(used))
    edges = tuple(
        NetEdge(e.src, e.dst, e.score)
        for e in sorted(kept, key=lambda e: (e.src, e.dst))
    )
    return CausalNetwork(id=ceg.id, nodes=nodes, edges=edges)


def prune_corpus(
    cegs: Sequence[RawCeg],
) -> tuple[list[CausalNetwork], PruneSummary]:
    """Preprocess a whole corpus, keeping accepted networks in input order."""
    summary = PruneSummary(total=len(cegs))
    networks: list[CausalNetwork] = []
    for ceg in cegs:
        result = preprocess(ceg)
        if isinstance(result, Rejected):
            summary.rejections[result.reason] += 1
        else:
            networks.append(result)
            summary.accepted += 1
    return networks, summary


def extract_mediated_chains(net: CausalNetwork) -> list[MediatedChain]:
    """All directed 2-edge paths cause -> mediator -> effect, sorted.

    Acyclicity guarantees the three nodes are pairwise distinct.
    """
    out_edges: dict[str, list[NetEdge]] = {}
    for edge in net.edges:
        out_edges.setdefault(edge.src, []).append(edge)

    chains = [
        MediatedChain(
            cause=first.src,
            mediator=first.dst,
            effect=second.dst,
            scores=(first.score, second.score),
        )
        for first in net.edges
        for second in out_edges.get(first.dst, ())
    ]
    chains.sort(key=lambda c: (c.cause, c.mediator, c.effect))
    return chains


# ---------------------------------------------------------------------------
# Round trips used by the CLI and by the idempotence law
# ---------------------------------------------------------------------------


def network_to_raw(net: CausalNetwork) -> RawCeg:
    """Re-encode a causal network as a RawCeg (preprocessing fixed point)."""
    return RawCeg(
        id=net.id,
        nodes=tuple(CegNode(id=n.id, event_type=n.event_type) for n in net.nodes),
        edges=tuple(CegEdge(e.src, e.dst, e.score) for e in net.edges),
    )


def network_to_dict(net: CausalNetwork) -> dict:
    return {
        "id": net.id,
        "nodes": [{"id": n.id, "event_type": n.event_type} for n in net.nodes],
        "edges": [{"src": e.src, "dst": e.dst, "score": e.score} for e in net.edges],
    }


def network_from_dict(doc: dict) -> CausalNetwork:
    try:
        nodes = tuple(
            NetNode(n["id"], n.get("event_type", "")) for n in doc["nodes"]
        )
        edges = tuple(
            NetEdge(e["src"], e["dst"], int(e["score"])) for e in doc["edges"]
        )
        return CausalNetwork(id=doc["id"], nodes=nodes, edges=edges)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed network document: {exc}") from None
