"""Mediator-aware hyper-relational embedding model.

A message-passing encoder over the full graph (causal links, typeOf and
context triples) folds qualifier pairs into each link's relation
representation, then a sequence decoder scores (head, relation,
qualifiers) queries against every candidate tail.

Key law: a link with no qualifiers uses its relation embedding
unchanged, bit for bit, so plain links behave identically whether or
not the mediated channel exists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape as tp
from .errors import ValidationError
from .kg import KnowledgeGraph
from .numeric import Params, make_rng, uniform_embedding
from .vocab import EncodedLinks, Vocabulary, encode_links, encode_plain

COMPOSITIONS = ("mult", "sub", "rotate")


@dataclass(frozen=True)
class HyperConfig:
    dim: int = 32
    layers: int = 2
    alpha: float = 0.8
    composition: str = "mult"
    attention: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError(f"embedding dim must be positive, got {self.dim}")
        if self.layers < 0:
            raise ValidationError(f"layer count cannot be negative, got {self.layers}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.composition not in COMPOSITIONS:
            raise ValidationError(
                f"composition must be one of {COMPOSITIONS}, got {self.composition!r}"
            )
        if self.composition == "rotate" and self.dim % 2 != 0:
            raise ValidationError("rotate composition needs an even dim")

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "layers": self.layers,
            "alpha": self.alpha,
            "composition": self.composition,
            "attention": self.attention,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HyperConfig":
        return cls(**data)


def init_hyper(
    config: HyperConfig, n_entities: int, n_relations: int, seed: int
) -> Params:
    rng = make_rng(seed)
    d = config.dim
    params: Params = {
        "entity": uniform_embedding(rng, (n_entities, d), d),
        "relation": uniform_embedding(rng, (n_relations, d), d),
        "w_qual": uniform_embedding(rng, (d, d), d),
        "w_rel": uniform_embedding(rng, (d, d), d),
        "w_dec": uniform_embedding(rng, (d, d), d),
        "b_dec": np.zeros(d),
    }
    for layer in range(config.layers):
        params[f"w_in_{layer}"] = uniform_embedding(rng, (d, d), d)
        params[f"w_out_{layer}"] = uniform_embedding(rng, (d, d), d)
        params[f"w_self_{layer}"] = uniform_embedding(rng, (d, d), d)
    if config.attention:
        params["w_att"] = uniform_embedding(rng, (d, 1), d)
    return params


def wrap_params(params: Params) -> dict[str, tp.Var]:
    return {name: tp.Var(arr) for name, arr in params.items()}


def graph_edges(kg: KnowledgeGraph, vocab: Vocabulary) -> EncodedLinks:
    """Message-passing edge list: all qualified links plus all triples
    (typeOf and context facts carry no qualifiers)."""
    links = encode_links(kg.sorted_qlinks(), vocab)
    th, tr, tt = encode_plain(kg.triples, vocab)
    return EncodedLinks(
        heads=np.concatenate([links.heads, th]),
        rels=np.concatenate([links.rels, tr]),
        tails=np.concatenate([links.tails, tt]),
        qual_rels=links.qual_rels,
        qual_ents=links.qual_ents,
        qual_owner=links.qual_owner,
    )


def _compose(config: HyperConfig, x: tp.Var, y: tp.Var) -> tp.Var:
    if config.composition == "mult":
        return tp.mul(x, y)
    if config.composition == "sub":
        return tp.sub(x, y)
    half = config.dim // 2
    xr = tp.slice_cols(x, 0, half)
    xi = tp.slice_cols(x, half, config.dim)
    yr = tp.slice_cols(y, 0, half)
    yi = tp.slice_cols(y, half, config.dim)
    real = tp.sub(tp.mul(xr, yr), tp.mul(xi, yi))
    imag = tp.add(tp.mul(xr, yi), tp.mul(xi, yr))
    return tp.concat_cols(real, imag)


def merge_relation_rows(
    config: HyperConfig,
    weights: dict[str, tp.Var],
    rel_rows: tp.Var,
    entity_table: tp.Var,
    relation_table: tp.Var,
    qual_rels: np.ndarray,
    qual_ents: np.ndarray,
    qual_owner: np.ndarray,
    n_rows: int,
) -> tp.Var:
    """Fold qualifier pairs into per-row relation representations.

    Row i becomes alpha * r_i + (1 - alpha) * W_q (sum_j phi(r_qual_j,
    e_qual_j)) over its qualifiers; rows without qualifiers pass their
    relation row through unchanged (selected, not recomputed, so the
    bits are identical).
    """
    if len(qual_owner) == 0:
        return rel_rows
    qr = tp.gather_rows(relation_table, qual_rels)
    qe = tp.gather_rows(entity_table, qual_ents)
    composed = _compose(config, qr, qe)
    qual_sum = tp.segment_sum(composed, qual_owner, n_rows)
    projected = tp.matmul(qual_sum, weights["w_qual"])
    merged = tp.add(
        tp.scale(rel_rows, config.alpha), tp.scale(projected, 1.0 - config.alpha)
    )
    has_qual = np.zeros((n_rows, 1))
    has_qual[np.unique(qual_owner)] = 1.0
    return tp.where(has_qual, merged, rel_rows)


def encode(
    config: HyperConfig,
    weights: dict[str, tp.Var],
    edges: EncodedLinks,
    n_entities: int,
) -> tuple[tp.Var, tp.Var]:
    """Run the message-passing layers; returns final (entity, relation)
    tables as tape nodes.

    Per layer, each node receives the mean of incoming messages
    phi(e_head, gamma) W_in over links where it is the tail, the mean of
    outgoing messages phi(e_tail, gamma) W_out over links where it is
    the head, plus its own W_self projection, squashed by tanh. The
    relation table moves through a shared linear map each layer.
    """
    entity_table = weights["entity"]
    relation_table = weights["relation"]
    for layer in range(config.layers):
        rel_rows = tp.gather_rows(relation_table, edges.rels)
        gamma = merge_relation_rows(
            config,
            weights,
            rel_rows,
            entity_table,
            relation_table,
            edges.qual_rels,
            edges.qual_ents,
            edges.qual_owner,
            edges.n,
        )
        head_rows = tp.gather_rows(entity_table, edges.heads)
        tail_rows = tp.gather_rows(entity_table, edges.tails)
        incoming = tp.segment_mean(
            tp.matmul(_compose(config, head_rows, gamma), weights[f"w_in_{layer}"]),
            edges.tails,
            n_entities,
        )
        outgoing = tp.segment_mean(
            tp.matmul(_compose(config, tail_rows, gamma), weights[f"w_out_{layer}"]),
            edges.heads,
            n_entities,
        )
        self_part = tp.matmul(entity_table, weights[f"w_self_{layer}"])
        entity_table = tp.tanh(tp.add(tp.add(incoming, outgoing), self_part))
        relation_table = tp.matmul(relation_table, weights["w_rel"])
    return entity_table, relation_table


def decode_logits(
    config: HyperConfig,
    weights: dict[str, tp.Var],
    entity_table: tp.Var,
    relation_table: tp.Var,
    queries: EncodedLinks,
    candidates: np.ndarray | None = None,
) -> tp.Var:
    """Score (head, relation, qualifiers) queries against candidate tails.

    Each query is linearized as the sequence [e_head, gamma, (e_qrel,
    e_qent)*], pooled (masked mean, or learned attention), passed
    through tanh(W x + b), and matched against candidate embeddings by
    dot product. Returns logits of shape (n_queries, n_candidates).
    """
    n = queries.n
    counts = np.bincount(queries.qual_owner, minlength=n)
    max_len = int(2 + 2 * counts.max()) if n else 2
    d = config.dim

    head_rows = tp.gather_rows(entity_table, queries.heads)
    rel_rows = tp.gather_rows(relation_table, queries.rels)
    gamma = merge_relation_rows(
        config,
        weights,
        rel_rows,
        entity_table,
        relation_table,
        queries.qual_rels,
        queries.qual_ents,
        queries.qual_owner,
        n,
    )

    parts = [head_rows, gamma]
    rows = np.arange(n, dtype=np.int64)
    positions = [rows * max_len, rows * max_len + 1]
    if len(queries.qual_owner):
        starts = np.searchsorted(queries.qual_owner, np.arange(n), side="left")
        within = np.arange(len(queries.qual_owner)) - starts[queries.qual_owner]
        base = queries.qual_owner * max_len + 2 + 2 * within
        parts.append(tp.gather_rows(relation_table, queries.qual_rels))
        positions.append(base)
        parts.append(tp.gather_rows(entity_table, queries.qual_ents))
        positions.append(base + 1)

    flat = tp.segment_sum(
        tp.concat_rows(parts), np.concatenate(positions), n * max_len
    )
    seq = tp.reshape(flat, (n, max_len, d))

    lengths = 2 + 2 * counts
    mask = (np.arange(max_len)[None, :] < lengths[:, None]).astype(np.float64)
    if config.attention:
        att = tp.reshape(
            tp.matmul(tp.reshape(seq, (n * max_len, d)), weights["w_att"]),
            (n, max_len),
        )
        att = tp.add(att, (1.0 - mask) * -1e9)
        att_weights = tp.softmax_rows(att)
        pooled = tp.sum_axis(
            tp.mul(seq, tp.reshape(att_weights, (n, max_len, 1))), 1
        )
    else:
        summed = tp.sum_axis(tp.mul(seq, mask[:, :, None]), 1)
        pooled = tp.mul(summed, 1.0 / lengths[:, None])

    hidden = tp.tanh(tp.add(tp.matmul(pooled, weights["w_dec"]), weights["b_dec"]))
    cand_table = (
        entity_table if candidates is None else tp.gather_rows(entity_table, candidates)
    )
    return tp.matmul(hidden, tp.transpose(cand_table))


def score_queries(
    config: HyperConfig,
    params: Params,
    edges: EncodedLinks,
    n_entities: int,
    queries: EncodedLinks,
    candidates: np.ndarray | None = None,
) -> np.ndarray:
    """Gradient-free convenience: encode then decode, returning logits."""
    weights = wrap_params(params)
    entity_table, relation_table = encode(config, weights, edges, n_entities)
    logits = decode_logits(
        config, weights, entity_table, relation_table, queries, candidates
    )
    return logits.value


def query_probabilities(logits: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(logits, -500, 500)))
