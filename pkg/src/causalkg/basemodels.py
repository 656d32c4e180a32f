"""Baseline knowledge-graph embedding models.

Four classic triple scorers over shared (entity, relation) embedding
tables: translation distance, bilinear-diagonal product, circular
correlation, and the complex bilinear form packed as real arrays.
Score gradients are written out analytically; the test suite checks
them against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .numeric import (
    Params,
    circular_convolution,
    circular_correlation,
    l2_normalize_rows,
    make_rng,
    uniform_embedding,
)

BASE_KINDS = ("transe", "distmult", "hole", "complex")


@dataclass(frozen=True)
class BaseModelSpec:
    """Model family plus embedding width.

    ``dim`` counts model coordinates: real dimensions for the first
    three families and complex dimensions for the complex one, whose
    rows store real and imaginary halves side by side and are therefore
    ``2 * dim`` floats wide.
    """

    kind: str
    dim: int
    transe_norm: int = 1

    def __post_init__(self):
        if self.kind not in BASE_KINDS:
            raise ValidationError(
                f"model kind must be one of {BASE_KINDS}, got {self.kind!r}"
            )
        if self.dim < 1:
            raise ValidationError(f"embedding dim must be positive, got {self.dim}")
        if self.transe_norm not in (1, 2):
            raise ValidationError(
                f"translation norm must be 1 or 2, got {self.transe_norm}"
            )

    @property
    def storage_dim(self) -> int:
        """Row width of the stored float64 tables."""
        return 2 * self.dim if self.kind == "complex" else self.dim


def init_base_model(
    spec: BaseModelSpec, n_entities: int, n_relations: int, seed: int
) -> Params:
    """Uniform init on +-6/sqrt(dim); translation model relation rows
    start L2-normalized."""
    rng = make_rng(seed)
    width = spec.storage_dim
    entity = uniform_embedding(rng, (n_entities, width), spec.dim)
    relation = uniform_embedding(rng, (n_relations, width), spec.dim)
    if spec.kind == "transe":
        relation = l2_normalize_rows(relation)
    return {"entity": entity, "relation": relation}


def _split_complex(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    half = x.shape[-1] // 2
    return x[..., :half], x[..., half:]


def score_batch(
    spec: BaseModelSpec,
    params: Params,
    heads: np.ndarray,
    rels: np.ndarray,
    tails: np.ndarray,
) -> np.ndarray:
    """Scores for aligned index arrays; higher means more plausible."""
    h = params["entity"][heads]
    r = params["relation"][rels]
    t = params["entity"][tails]
    if spec.kind == "transe":
        diff = h + r - t
        if spec.transe_norm == 1:
            return -np.abs(diff).sum(axis=-1)
        return -np.sqrt((diff * diff).sum(axis=-1))
    if spec.kind == "distmult":
        return (h * r * t).sum(axis=-1)
    if spec.kind == "hole":
        return (r * circular_correlation(h, t)).sum(axis=-1)
    hr, hi = _split_complex(h)
    rr, ri = _split_complex(r)
    tr, ti = _split_complex(t)
    return (hr * rr * tr - hi * ri * tr + hr * ri * ti + hi * rr * ti).sum(axis=-1)


def score_grads_batch(
    spec: BaseModelSpec,
    params: Params,
    heads: np.ndarray,
    rels: np.ndarray,
    tails: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(scores, d_score/d_h, d_score/d_r, d_score/d_t) per batch row.

    Kinks use the zero subgradient: the L1 sign is 0 at 0, and a zero
    L2 distance yields a zero gradient vector.
    """
    h = params["entity"][heads]
    r = params["relation"][rels]
    t = params["entity"][tails]
    if spec.kind == "transe":
        diff = h + r - t
        if spec.transe_norm == 1:
            scores = -np.abs(diff).sum(axis=-1)
            gh = -np.sign(diff)
        else:
            norms = np.sqrt((diff * diff).sum(axis=-1))
            scores = -norms
            safe = np.where(norms > 0.0, norms, 1.0)[..., None]
            gh = np.where(norms[..., None] > 0.0, -diff / safe, 0.0)
        return scores, gh, gh.copy(), -gh
    if spec.kind == "distmult":
        scores = (h * r * t).sum(axis=-1)
        return scores, r * t, h * t, h * r
    if spec.kind == "hole":
        scores = (r * circular_correlation(h, t)).sum(axis=-1)
        gh = circular_correlation(r, t)
        gr = circular_correlation(h, t)
        gt = circular_convolution(h, r)
        return scores, gh, gr, gt
    hr, hi = _split_complex(h)
    rr, ri = _split_complex(r)
    tr, ti = _split_complex(t)
    scores = (hr * rr * tr - hi * ri * tr + hr * ri * ti + hi * rr * ti).sum(axis=-1)
    gh = np.concatenate([rr * tr + ri * ti, -ri * tr + rr * ti], axis=-1)
    gr = np.concatenate([hr * tr + hi * ti, -hi * tr + hr * ti], axis=-1)
    gt = np.concatenate([hr * rr - hi * ri, hr * ri + hi * rr], axis=-1)
    return scores, gh, gr, gt


def score_all_tails(
    spec: BaseModelSpec,
    params: Params,
    head: int,
    rel: int,
    candidates: np.ndarray | None = None,
) -> np.ndarray:
    """Scores of (head, rel, c) for every candidate tail in one pass."""
    entity = params["entity"]
    cand = entity if candidates is None else entity[candidates]
    h = entity[head]
    r = params["relation"][rel]
    if spec.kind == "transe":
        diff = (h + r)[None, :] - cand
        if spec.transe_norm == 1:
            return -np.abs(diff).sum(axis=-1)
        return -np.sqrt((diff * diff).sum(axis=-1))
    if spec.kind == "distmult":
        return cand @ (h * r)
    if spec.kind == "hole":
        return cand @ circular_convolution(h, r)
    hr, hi = _split_complex(h)
    rr, ri = _split_complex(r)
    cr, ci = _split_complex(cand)
    return cr @ (hr * rr - hi * ri) + ci @ (hr * ri + hi * rr)
