"""Shared numerics: seeded RNG, initializers, circular correlation,
a functional Adam optimizer, and finite-difference gradient checking.

All floating-point work is float64. The one random source is numpy's
default PCG64 generator constructed from an explicit integer seed, so
every pipeline stage is reproducible from its seed alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def uniform_embedding(
    rng: np.random.Generator, shape: tuple[int, ...], dim: int
) -> np.ndarray:
    """Uniform init on [-6/sqrt(dim), 6/sqrt(dim)]."""
    bound = 6.0 / math.sqrt(dim)
    return rng.uniform(-bound, bound, size=shape)


def l2_normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / np.maximum(norms, 1e-12)


def circular_correlation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """[a (star) b]_k = sum_i a_i * b_{(i+k) mod d}, over the last axis.

    Evaluated directly in O(d^2); an FFT path is deliberately out of
    scope at these dimensions (tests use one as an independent oracle).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-1] != b.shape[-1]:
        raise NumericError(
            f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}"
        )
    d = a.shape[-1]
    shift = (np.arange(d)[:, None] + np.arange(d)[None, :]) % d
    return np.einsum("...i,...ik->...k", a, b[..., shift])


def circular_convolution(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """[a (conv) b]_k = sum_i a_i * b_{(k-i) mod d}, over the last axis."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-1] != b.shape[-1]:
        raise NumericError(
            f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}"
        )
    d = a.shape[-1]
    shift = (np.arange(d)[None, :] - np.arange(d)[:, None]) % d
    return np.einsum("...i,...ik->...k", a, b[..., shift])


def bce_probability_form(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean binary cross entropy on probabilities, 0*log(0) taken as 0.

    Independent route for checking the logit-form loss; a prediction
    exactly equal to a 0/1 target costs exactly zero.
    """
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if p.shape != y.shape:
        raise NumericError(f"shape mismatch {p.shape} vs {y.shape}")
    if np.any((p < 0) | (p > 1)):
        raise NumericError("probabilities outside [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.where(y > 0.0, y * np.log(p), 0.0)
        neg = np.where(y < 1.0, (1.0 - y) * np.log(1.0 - p), 0.0)
    total = pos + neg
    if not np.all(np.isfinite(total)):
        raise NumericError("infinite cross entropy: hard-wrong prediction")
    return float(-np.mean(total))


Params = dict[str, np.ndarray]


def clone_params(params: Params) -> Params:
    return {name: arr.copy() for name, arr in params.items()}


@dataclass
class AdamState:
    step: int
    m: Params
    v: Params


def adam_init(params: Params) -> AdamState:
    return AdamState(
        step=0,
        m={k: np.zeros_like(v) for k, v in params.items()},
        v={k: np.zeros_like(v) for k, v in params.items()},
    )


def adam_step(
    params: Params,
    grads: Params,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[Params, AdamState]:
    """One bias-corrected Adam update; returns fresh params and state."""
    step = state.step + 1
    new_params: Params = {}
    new_m: Params = {}
    new_v: Params = {}
    bc1 = 1.0 - beta1**step
    bc2 = 1.0 - beta2**step
    for name in sorted(params):
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
        m = beta1 * state.m[name] + (1.0 - beta1) * g
        v = beta2 * state.v[name] + (1.0 - beta2) * g * g
        update = lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        new_params[name] = params[name] - update
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(step=step, m=new_m, v=new_v)


@dataclass
class GradCheckResult:
    max_rel_err: float
    worst_coord: str
    checked: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol

    def to_dict(self) -> dict:
        return {
            "max_rel_err": self.max_rel_err,
            "worst_coord": self.worst_coord,
            "checked": self.checked,
            "tol": self.tol,
            "passed": self.passed,
        }


def grad_check(
    loss_fn,
    grad_fn,
    params: Params,
    eps: float = 1e-5,
    tol: float = 1e-4,
    samples: int | None = None,
    seed: int = 0,
) -> GradCheckResult:
    """Compare analytic gradients with central finite differences.

    ``loss_fn(params) -> float`` and ``grad_fn(params) -> Params`` are
    the two independent routes. When ``samples`` is given, that many
    coordinates are drawn without replacement from the concatenation of
    all parameter tensors; otherwise every coordinate is checked. The
    per-coordinate error measure is |g_analytic - g_fd| / max(1, |g_fd|);
    pass means its maximum over all checked coordinates stays below
    ``tol``.
    """
    grads = grad_fn(params)
    names = sorted(params)
    sizes = [params[name].size for name in names]
    total = int(sum(sizes))
    if samples is not None and samples < total:
        rng = make_rng(seed)
        flat = np.sort(rng.choice(total, size=samples, replace=False))
    else:
        flat = np.arange(total)
    offsets = np.cumsum([0] + sizes)
    max_rel = 0.0
    worst = ""
    checked = 0
    for global_idx in flat:
        slot = int(np.searchsorted(offsets, global_idx, side="right") - 1)
        name = names[slot]
        arr = params[name]
        idx = np.unravel_index(int(global_idx) - int(offsets[slot]), arr.shape)
        perturbed = clone_params(params)
        perturbed[name][idx] = arr[idx] + eps
        plus = loss_fn(perturbed)
        perturbed[name][idx] = arr[idx] - eps
        minus = loss_fn(perturbed)
        if not (np.isfinite(plus) and np.isfinite(minus)):
            raise NumericError(
                f"non-finite loss while perturbing {name}[{idx}]"
            )
        fd = (plus - minus) / (2.0 * eps)
        rel = float(abs(grads[name][idx] - fd) / max(1.0, abs(fd)))
        checked += 1
        if rel > max_rel:
            max_rel = rel
            worst = f"{name}{[int(i) for i in idx]}"
    return GradCheckResult(
        max_rel_err=max_rel, worst_coord=worst, checked=checked, tol=tol
    )
