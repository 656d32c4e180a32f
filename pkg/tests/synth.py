"""Synthetic data generators and independent oracles for the test suite.

Everything here is deliberately written from scratch (brute force where
possible) so tests compare the package against a second, independent
route rather than against itself.
"""

from __future__ import annotations

import hashlib
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from causalkg.ceg import CausalNetwork, MediatedChain, NetEdge, NetNode
from causalkg.kg import KnowledgeGraph, build_kg

EVENT_TYPES = (
    "Collide",
    "Fire",
    "Smoke",
    "Rain",
    "Flood",
    "Damage",
    "Heat",
    "Alarm",
    "Panic",
    "Rescue",
)


# ---------------------------------------------------------------------------
# Raw event-graph generation (may contain cycles, junk scores, duplicates)
# ---------------------------------------------------------------------------


def random_raw_record(rng: np.random.Generator, idx: int, max_nodes: int = 12) -> dict:
    """A corpus record in raw JSON shape, noisy on purpose: scores may be
    1 (no responsibility), pairs may repeat, and cycles are common."""
    n = int(rng.integers(1, max_nodes + 1))
    node_ids = [f"ev{j}" for j in range(n)]
    nodes = [
        {"id": nid, "event_type": EVENT_TYPES[int(rng.integers(len(EVENT_TYPES)))]}
        for nid in node_ids
    ]
    n_edges = int(rng.integers(0, 2 * n + 1))
    edges = []
    for _ in range(n_edges):
        src = node_ids[int(rng.integers(n))]
        dst = node_ids[int(rng.integers(n))]
        if src == dst:
            continue
        edges.append({"src": src, "dst": dst, "score": int(rng.integers(1, 6))})
    return {"id": f"net{idx}", "nodes": nodes, "edges": edges}


def oracle_acyclic(node_ids, edge_pairs) -> bool:
    """Kahn's algorithm, kept independent of the package's cycle logic."""
    indeg = {v: 0 for v in node_ids}
    succs = {v: [] for v in node_ids}
    for src, dst in edge_pairs:
        indeg[dst] += 1
        succs[src].append(dst)
    queue = [v for v in node_ids if indeg[v] == 0]
    removed = 0
    while queue:
        v = queue.pop()
        removed += 1
        for w in succs[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    return removed == len(indeg)


def oracle_longest_path(node_ids, edge_pairs) -> int:
    """Longest directed path in edges, by exhaustive DFS (small graphs)."""
    succs = {v: [] for v in node_ids}
    for src, dst in edge_pairs:
        succs[src].append(dst)

    best = 0

    def walk(v, length, seen):
        nonlocal best
        best = max(best, length)
        for w in succs[v]:
            if w not in seen:
                walk(w, length + 1, seen | {w})

    for v in node_ids:
        walk(v, 0, {v})
    return best


def oracle_chain_triples(net: CausalNetwork) -> set[tuple[str, str, str]]:
    """Brute-force set of directed 2-edge paths (A, B, C)."""
    pairs = {(e.src, e.dst) for e in net.edges}
    return {
        (a, b1, c)
        for (a, b1) in pairs
        for (b2, c) in pairs
        if b1 == b2
    }


# ---------------------------------------------------------------------------
# Valid causal networks and knowledge graphs
# ---------------------------------------------------------------------------


def random_network(
    rng: np.random.Generator, net_id: str, n_nodes: int = 6, extra_edges: int = 4
) -> CausalNetwork:
    """A valid causal network: DAG by construction (edges only go from a
    lower to a higher slot in one fixed node order), with a guaranteed
    2-edge chain so it would survive preprocessing."""
    n = max(3, n_nodes)
    ids = [f"ev{j}" for j in range(n)]
    types = [EVENT_TYPES[int(rng.integers(len(EVENT_TYPES)))] for _ in ids]
    pairs = {(ids[0], ids[1]), (ids[1], ids[2])}
    for _ in range(extra_edges):
        a, b = rng.choice(n, size=2, replace=False)
        a, b = (int(a), int(b)) if a < b else (int(b), int(a))
        pairs.add((ids[a], ids[b]))
    nodes = tuple(NetNode(i, t) for i, t in sorted(zip(ids, types)))
    edges = tuple(
        NetEdge(src, dst, int(rng.integers(2, 6))) for src, dst in sorted(pairs)
    )
    return CausalNetwork(id=net_id, nodes=nodes, edges=edges)


def chains_for(nets) -> dict:
    from causalkg.ceg import extract_mediated_chains

    return {net.id: extract_mediated_chains(net) for net in nets}


def random_kg(
    rng: np.random.Generator,
    n_nets: int = 2,
    variant: str = "CT",
    mediated: bool = True,
    n_nodes: int = 5,
    extra_edges: int = 3,
) -> KnowledgeGraph:
    nets = [
        random_network(rng, f"net{j}", n_nodes=n_nodes, extra_edges=extra_edges)
        for j in range(n_nets)
    ]
    return build_kg(nets, chains_for(nets), variant=variant, mediated=mediated)


# ---------------------------------------------------------------------------
# Circular-operation oracles (FFT route; the package computes directly)
# ---------------------------------------------------------------------------


def fft_correlation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    fa = np.fft.fft(a, axis=-1)
    fb = np.fft.fft(b, axis=-1)
    return np.real(np.fft.ifft(np.conj(fa) * fb, axis=-1))


def fft_convolution(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    fa = np.fft.fft(a, axis=-1)
    fb = np.fft.fft(b, axis=-1)
    return np.real(np.fft.ifft(fa * fb, axis=-1))


# ---------------------------------------------------------------------------
# Ranking oracle
# ---------------------------------------------------------------------------


def oracle_rank(scores, gold_pos: int, filtered_positions) -> int:
    """Tie-aware filtered rank via explicit counting and Decimal half-up
    rounding; independent of the package's floor arithmetic."""
    excluded = set(int(i) for i in filtered_positions)
    assert gold_pos not in excluded
    gold = scores[gold_pos]
    rivals = [
        s for i, s in enumerate(scores) if i != gold_pos and i not in excluded
    ]
    greater = sum(1 for s in rivals if s > gold)
    ties = sum(1 for s in rivals if s == gold)
    optimistic = Decimal(greater + 1)
    pessimistic = Decimal(greater + ties + 1)
    mean = (optimistic + pessimistic) / 2
    return int(mean.quantize(Decimal("1"), rounding=ROUND_HALF_UP))


class HashScorer:
    """Deterministic pseudo-random scorer with deliberate ties.

    The score of (query, candidate) is a digest of their names quantized
    to one decimal, so unrelated candidates frequently tie and both
    odd and even tie-group sizes occur.
    """

    def __init__(self, vocab, salt: str = "", levels: int = 10):
        self.vocab = vocab
        self.salt = salt
        self.levels = levels

    def score_pair(self, query, candidate_name: str) -> float:
        key = "|".join(
            (
                self.salt,
                query.anchor,
                query.relation,
                repr(query.qualifiers),
                candidate_name,
            )
        )
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        return int.from_bytes(digest[:4], "big") % self.levels / self.levels

    def score_batch(self, queries, candidate_ids) -> np.ndarray:
        names = [self.vocab.entities[int(i)] for i in candidate_ids]
        out = np.empty((len(queries), len(names)))
        for qi, query in enumerate(queries):
            for ci, name in enumerate(names):
                out[qi, ci] = self.score_pair(query, name)
        return out


# ---------------------------------------------------------------------------
# Mediator-determined corpus (effect type is a function of mediator type)
# ---------------------------------------------------------------------------

MEDIATOR_RULE = {
    "Fire": "Smoke",
    "Flood": "Damage",
    "Alarm": "Panic",
}


def mediator_rule_networks(
    n_chains: int, seed: int, cause_types=("Collide", "Rain", "Heat")
) -> list[CausalNetwork]:
    """Three-node networks A -> B -> C where type(C) is a fixed function
    of type(B). The cause type alone never determines the effect type,
    so only mediator-aware scoring can separate the outcomes."""
    rng = np.random.default_rng(seed)
    mediators = sorted(MEDIATOR_RULE)
    nets = []
    for j in range(n_chains):
        m_type = mediators[int(rng.integers(len(mediators)))]
        c_type = cause_types[int(rng.integers(len(cause_types)))]
        e_type = MEDIATOR_RULE[m_type]
        nodes = (
            NetNode("a", c_type),
            NetNode("b", m_type),
            NetNode("c", e_type),
        )
        edges = (
            NetEdge("a", "b", int(rng.integers(2, 6))),
            NetEdge("b", "c", int(rng.integers(2, 6))),
        )
        nets.append(CausalNetwork(id=f"net{j:04d}", nodes=nodes, edges=edges))
    return nets
