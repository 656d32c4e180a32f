"""Model training: negative-sampling margin loss for the baselines,
one-vs-all cross entropy for the hyper-relational model, plus the
scorer adapters the evaluator consumes.

Both trainers are deterministic functions of (graph, config, seed):
shuffling and negative draws come from one seeded generator, parameter
updates iterate in sorted name order, and early stopping tracks
validation MRR with a fixed patience.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tape as tp
from .basemodels import (
    BaseModelSpec,
    init_base_model,
    score_all_tails,
    score_grads_batch,
)
from .errors import SamplingError, ValidationError
from .hyper import (
    HyperConfig,
    decode_logits,
    encode,
    graph_edges,
    init_hyper,
    query_probabilities,
    wrap_params,
)
from .kg import KgSplit, KnowledgeGraph, QualifiedLink, plain_triples
from .numeric import Params, adam_init, adam_step, clone_params, make_rng
from .ranking import EvalConfig, Query, build_queries, evaluate
from .vocab import EncodedLinks, Vocabulary, encode_links, encode_plain

MAX_NEGATIVE_ATTEMPTS = 100


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    lr: float = 0.01
    batch_size: int = 128
    negatives: int = 1
    margin: float = 1.0
    label_smoothing: float = 0.1
    patience: int = 10
    eval_every: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValidationError(f"epochs cannot be negative, got {self.epochs}")
        if self.lr <= 0:
            raise ValidationError(f"learning rate must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ValidationError(f"batch size must be positive, got {self.batch_size}")
        if self.negatives < 1:
            raise ValidationError(
                f"negatives per positive must be positive, got {self.negatives}"
            )
        if self.margin <= 0:
            raise ValidationError(f"margin must be positive, got {self.margin}")
        if not 0.0 <= self.label_smoothing < 0.5:
            raise ValidationError(
                f"label smoothing must lie in [0, 0.5), got {self.label_smoothing}"
            )
        if self.patience < 1:
            raise ValidationError(f"patience must be positive, got {self.patience}")
        if self.eval_every < 1:
            raise ValidationError(
                f"eval interval must be positive, got {self.eval_every}"
            )

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "lr": self.lr,
            "batch_size": self.batch_size,
            "negatives": self.negatives,
            "margin": self.margin,
            "label_smoothing": self.label_smoothing,
            "patience": self.patience,
            "eval_every": self.eval_every,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


@dataclass
class TrainResult:
    params: Params
    history: list[dict]
    best_epoch: int
    best_val_mrr: float


# ---------------------------------------------------------------------------
# Scorer adapters
# ---------------------------------------------------------------------------


@dataclass
class BaseScorer:
    """Ranks candidate tails with the raw triple score; qualifiers on a
    query are invisible to these models and simply ignored."""

    spec: BaseModelSpec
    params: Params
    vocab: Vocabulary

    def score_batch(
        self, queries: Sequence[Query], candidate_ids: np.ndarray
    ) -> np.ndarray:
        out = np.empty((len(queries), len(candidate_ids)))
        for i, q in enumerate(queries):
            out[i] = score_all_tails(
                self.spec,
                self.params,
                self.vocab.entity_id(q.anchor),
                self.vocab.relation_id(q.relation),
                candidate_ids,
            )
        return out


class HyperScorer:
    """Encodes the message graph once, then decodes query batches into
    per-candidate probabilities."""

    def __init__(
        self,
        config: HyperConfig,
        params: Params,
        vocab: Vocabulary,
        edges: EncodedLinks,
    ):
        self.config = config
        self.params = params
        self.vocab = vocab
        weights = wrap_params(params)
        entity_table, relation_table = encode(
            config, weights, edges, vocab.n_entities
        )
        self._entities = tp.Var(entity_table.value)
        self._relations = tp.Var(relation_table.value)
        self._weights = {name: tp.Var(arr) for name, arr in params.items()}

    def score_batch(
        self, queries: Sequence[Query], candidate_ids: np.ndarray
    ) -> np.ndarray:
        links = [
            QualifiedLink(q.anchor, q.relation, q.anchor, q.qualifiers)
            for q in queries
        ]
        encoded = encode_links(links, self.vocab)
        logits = decode_logits(
            self.config,
            self._weights,
            self._entities,
            self._relations,
            encoded,
            candidate_ids,
        )
        return query_probabilities(logits.value)


# ---------------------------------------------------------------------------
# Negative sampling
# ---------------------------------------------------------------------------


def sample_negatives(
    link: QualifiedLink, kg_train: KnowledgeGraph, k: int, seed: int
) -> list[QualifiedLink]:
    """Draw k corruptions of one link, qualifiers preserved.

    Each draw flips a fair coin to corrupt head or tail, replacing it
    with a uniform entity different from the original. Draws that
    reproduce a training link are retried up to a bounded number of
    times and then kept, so the result always has exactly k items.
    """
    pool = sorted(kg_train.entities)
    if len(pool) < 2:
        raise SamplingError("cannot corrupt links over a single-entity vocabulary")
    index = {name: i for i, name in enumerate(pool)}
    known = kg_train.qlinks
    rng = make_rng(seed)
    out: list[QualifiedLink] = []
    for _ in range(k):
        corrupt_head = bool(rng.random() < 0.5)
        original = link.head if corrupt_head else link.tail
        orig_idx = index[original]
        candidate = link
        for _attempt in range(MAX_NEGATIVE_ATTEMPTS):
            j = int(rng.integers(0, len(pool) - 1))
            if j >= orig_idx:
                j += 1
            entity = pool[j]
            if corrupt_head:
                candidate = QualifiedLink(
                    entity, link.relation, link.tail, link.qualifiers
                )
            else:
                candidate = QualifiedLink(
                    link.head, link.relation, entity, link.qualifiers
                )
            if candidate not in known:
                break
        out.append(candidate)
    return out


def corrupt_batch(
    rng: np.random.Generator,
    heads: np.ndarray,
    rels: np.ndarray,
    tails: np.ndarray,
    n_entities: int,
    known: set[tuple[int, int, int]],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized one-negative-per-row corruption with the same policy
    as ``sample_negatives``: fair coin per row, uniform replacement
    different from the original, collisions with known training triples
    redrawn up to a bounded number of rounds and then kept."""
    if n_entities < 2:
        raise SamplingError("cannot corrupt links over a single-entity vocabulary")
    n = len(heads)
    neg_h = heads.copy()
    neg_t = tails.copy()
    corrupt_head = rng.random(n) < 0.5
    pending = np.arange(n)
    for _round in range(MAX_NEGATIVE_ATTEMPTS):
        if len(pending) == 0:
            break
        originals = np.where(corrupt_head[pending], heads[pending], tails[pending])
        draws = rng.integers(0, n_entities - 1, size=len(pending))
        draws = draws + (draws >= originals)
        still: list[int] = []
        for j, row in enumerate(pending):
            e = int(draws[j])
            if corrupt_head[row]:
                neg_h[row] = e
                if (e, int(rels[row]), int(tails[row])) in known:
                    still.append(row)
            else:
                neg_t[row] = e
                if (int(heads[row]), int(rels[row]), e) in known:
                    still.append(row)
        pending = np.array(still, dtype=np.int64)
    return neg_h, rels.copy(), neg_t


# ---------------------------------------------------------------------------
# Baseline training
# ---------------------------------------------------------------------------


def margin_loss_and_grads(
    spec: BaseModelSpec,
    params: Params,
    pos: tuple[np.ndarray, np.ndarray, np.ndarray],
    neg: tuple[np.ndarray, np.ndarray, np.ndarray],
    margin: float,
) -> tuple[float, Params]:
    """Pairwise hinge mean(max(0, margin - s_pos + s_neg)) and its
    gradients, assembled from the analytic per-triple score gradients."""
    s_pos, gh_p, gr_p, gt_p = score_grads_batch(spec, params, *pos)
    s_neg, gh_n, gr_n, gt_n = score_grads_batch(spec, params, *neg)
    violation = margin - s_pos + s_neg
    active = violation > 0.0
    loss = float(np.mean(np.maximum(violation, 0.0)))
    coeff = active.astype(np.float64) / len(s_pos)

    grads = {name: np.zeros_like(arr) for name, arr in params.items()}
    np.add.at(grads["entity"], pos[0], -coeff[:, None] * gh_p)
    np.add.at(grads["relation"], pos[1], -coeff[:, None] * gr_p)
    np.add.at(grads["entity"], pos[2], -coeff[:, None] * gt_p)
    np.add.at(grads["entity"], neg[0], coeff[:, None] * gh_n)
    np.add.at(grads["relation"], neg[1], coeff[:, None] * gr_n)
    np.add.at(grads["entity"], neg[2], coeff[:, None] * gt_n)
    return loss, grads


def _maybe_validate(scorer, split, vocab, eval_config):
    queries = build_queries(split.valid, "both")
    if not queries:
        return None
    try:
        report = evaluate(scorer, queries, split, vocab, eval_config)
    except Exception:
        return None
    return report.mrr


def train_base(
    spec: BaseModelSpec,
    split: KgSplit,
    vocab: Vocabulary,
    config: TrainConfig,
    eval_config: EvalConfig = EvalConfig(),
) -> TrainResult:
    """Margin-ranking training on the qualifier-stripped train graph."""
    heads, rels, tails = encode_plain(plain_triples(split.train), vocab)
    known = set(zip(heads.tolist(), rels.tolist(), tails.tolist()))
    n = len(heads)
    if n == 0:
        raise ValidationError("train split has no links to fit")
    rng = make_rng(config.seed)

    params = init_base_model(spec, vocab.n_entities, vocab.n_relations, config.seed)
    opt = adam_init(params)
    has_valid = bool(build_queries(split.valid, "both"))

    best_params = clone_params(params)
    best_mrr = -1.0
    best_epoch = 0
    stale = 0
    history: list[dict] = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            rep = np.repeat(idx, config.negatives)
            pos = (heads[rep], rels[rep], tails[rep])
            neg = corrupt_batch(
                rng, pos[0], pos[1], pos[2], vocab.n_entities, known
            )
            loss, grads = margin_loss_and_grads(spec, params, pos, neg, config.margin)
            params, opt = adam_step(params, grads, opt, config.lr)
            epoch_loss += loss * len(idx)
        epoch_loss /= n

        val_mrr = None
        if has_valid and (epoch % config.eval_every == 0 or epoch == config.epochs):
            val_mrr = _maybe_validate(
                BaseScorer(spec, params, vocab), split, vocab, eval_config
            )
        history.append({"epoch": epoch, "loss": epoch_loss, "val_mrr": val_mrr})

        if val_mrr is not None:
            if val_mrr > best_mrr:
                best_mrr = val_mrr
                best_params = clone_params(params)
                best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if stale > config.patience:
                    break

    if best_mrr < 0.0:
        best_params = params
        best_epoch = len(history)
    return TrainResult(
        params=best_params,
        history=history,
        best_epoch=best_epoch,
        best_val_mrr=max(best_mrr, 0.0),
    )


# ---------------------------------------------------------------------------
# Hyper-relational training
# ---------------------------------------------------------------------------


def truth_table(
    links: Sequence[QualifiedLink], vocab: Vocabulary
) -> dict[tuple, np.ndarray]:
    """(head, relation, qualifiers) -> sorted array of true tail ids."""
    gathered: dict[tuple, set[int]] = {}
    for link in links:
        key = (link.head, link.relation, link.qualifiers)
        gathered.setdefault(key, set()).add(vocab.entity_id(link.tail))
    return {
        key: np.array(sorted(ids), dtype=np.int64)
        for key, ids in gathered.items()
    }


def smoothed_targets(
    batch: Sequence[QualifiedLink],
    truths: dict[tuple, np.ndarray],
    n_candidates: int,
    epsilon: float,
) -> np.ndarray:
    """Multi-label rows (1 on every tail the train graph marks true for
    the row's (head, relation, qualifiers)) softened to
    y*(1-eps) + eps/N."""
    y = np.zeros((len(batch), n_candidates))
    for i, link in enumerate(batch):
        y[i, truths[(link.head, link.relation, link.qualifiers)]] = 1.0
    return y * (1.0 - epsilon) + epsilon / n_candidates


def hyper_loss_and_grads(
    config: HyperConfig,
    params: Params,
    edges: EncodedLinks,
    n_entities: int,
    queries: EncodedLinks,
    targets: np.ndarray,
    need_grads: bool = True,
) -> tuple[float, Params | None]:
    """Full forward pass (encode, decode, one-vs-all cross entropy) and,
    when requested, gradients for every parameter via the tape."""
    weights = wrap_params(params)
    entity_table, relation_table = encode(config, weights, edges, n_entities)
    logits = decode_logits(config, weights, entity_table, relation_table, queries)
    loss = tp.bce_with_logits(logits, targets)
    if not need_grads:
        return float(loss.value), None
    tp.backward(loss)
    grads = {name: var.grad for name, var in weights.items()}
    return float(loss.value), grads


def train_hyper(
    config: HyperConfig,
    split: KgSplit,
    vocab: Vocabulary,
    tconfig: TrainConfig,
    eval_config: EvalConfig = EvalConfig(),
) -> TrainResult:
    """One-vs-all training over every qualified link of the train graph,
    message passing over the train graph's links and triples."""
    edges = graph_edges(split.train, vocab)
    train_links = split.train.sorted_qlinks()
    n = len(train_links)
    if n == 0:
        raise ValidationError("train split has no links to fit")
    truths = truth_table(train_links, vocab)
    rng = make_rng(tconfig.seed)

    params = init_hyper(config, vocab.n_entities, vocab.n_relations, tconfig.seed)
    opt = adam_init(params)
    has_valid = bool(build_queries(split.valid, "both"))

    best_params = clone_params(params)
    best_mrr = -1.0
    best_epoch = 0
    stale = 0
    history: list[dict] = []

    for epoch in range(1, tconfig.epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, tconfig.batch_size):
            idx = order[start : start + tconfig.batch_size]
            batch = [train_links[i] for i in idx]
            encoded = encode_links(batch, vocab)
            targets = smoothed_targets(
                batch, truths, vocab.n_entities, tconfig.label_smoothing
            )
            loss, grads = hyper_loss_and_grads(
                config, params, edges, vocab.n_entities, encoded, targets
            )
            params, opt = adam_step(params, grads, opt, tconfig.lr)
            epoch_loss += loss * len(idx)
        epoch_loss /= n

        val_mrr = None
        if has_valid and (epoch % tconfig.eval_every == 0 or epoch == tconfig.epochs):
            scorer = HyperScorer(config, params, vocab, edges)
            val_mrr = _maybe_validate(scorer, split, vocab, eval_config)
        history.append({"epoch": epoch, "loss": epoch_loss, "val_mrr": val_mrr})

        if val_mrr is not None:
            if val_mrr > best_mrr:
                best_mrr = val_mrr
                best_params = clone_params(params)
                best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if stale > tconfig.patience:
                    break

    if best_mrr < 0.0:
        best_params = params
        best_epoch = len(history)
    return TrainResult(
        params=best_params,
        history=history,
        best_epoch=best_epoch,
        best_val_mrr=max(best_mrr, 0.0),
    )
