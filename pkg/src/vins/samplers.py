"""Negative samplers for pairwise ranking.

Every sampler returns ``(item, steps, weight, violated)``.  The compiled
kernels (``_uniform``, ``_vins``, ...) are shared by the public wrappers and
the training loop so both paths draw identical streams from a given
``numpy.random.Generator``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .interactions import InteractionGraph
from .model import ModelParams
from .weights import DegreeWeights, _draw

KINDS = ("uniform", "popularity", "dns", "warp", "vins")


@dataclass(frozen=True)
class SamplerOutcome:
    negative_item: int
    steps: int
    weight: float
    violated: bool


@dataclass(frozen=True)
class SamplerConfig:
    kind: str = "vins"
    beta: float = 0.5
    kappa: int = 64
    max_shot: int = 4
    margin: float = 1.0
    dns_candidates: int = 10

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sampler {self.kind!r}; choose from {KINDS}")
        if self.kappa < 1 or self.max_shot < 1 or self.dns_candidates < 1:
            raise ValueError("kappa, max_shot and dns_candidates must be >= 1")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")

    @property
    def kind_code(self) -> int:
        return KINDS.index(self.kind)


# ---------------------------------------------------------------- weights

def rank_weight(r: float, zw: float) -> float:
    """Log-chunk rank weight in (0, 1]; equals 1 at r == Z_w."""
    if r < 1 or r > zw:
        raise ValueError(f"rank {r} outside [1, {zw}]")
    return _rank_weight(float(r), float(zw))


def harmonic_weight(r: float) -> float:
    """Truncated harmonic series sum_{z=1}^{ceil(r)} 1/z."""
    if r < 1:
        raise ValueError(f"rank {r} < 1")
    return _harmonic(float(r))


@njit(cache=True)
def _ceil_log2(x):
    # exact ceil(log2(x)) for x >= 1 on integer-valued x, float log otherwise
    if x == math.floor(x) and x < 2.0 ** 62:
        n = int(x)
        k = 0
        while (1 << k) < n:
            k += 1
        return k
    return math.ceil(math.log2(x))


@njit(cache=True)
def _rank_weight(r, zw):
    num = 1.0 + 0.5 * (_ceil_log2(r + 1.0) - 1)
    den = 1.0 + 0.5 * (_ceil_log2(zw + 1.0) - 1)
    return num / den


@njit(cache=True)
def _harmonic(r):
    n = int(math.ceil(r))
    s = 0.0
    for z in range(n, 0, -1):
        s += 1.0 / z
    return s


# ---------------------------------------------------------------- kernels

@njit(cache=True)
def _has_edge(indptr, sorted_items, u, j):
    a = indptr[u]
    b = indptr[u + 1]
    k = np.searchsorted(sorted_items[a:b], j)
    return k < b - a and sorted_items[a + k] == j


@njit(cache=True)
def _dot(U, V, u, j):
    s = 0.0
    for k in range(U.shape[1]):
        s += U[u, k] * V[j, k]
    return s


@njit(cache=True)
def _uniform(indptr, sorted_items, n_items, u, rng):
    draws = 0
    while True:
        j = rng.integers(0, n_items)
        draws += 1
        if not _has_edge(indptr, sorted_items, u, j):
            return j, draws


@njit(cache=True)
def _popularity(indptr, sorted_items, cumulative, u, rng):
    draws = 0
    while True:
        j = _draw(cumulative, rng)
        draws += 1
        if not _has_edge(indptr, sorted_items, u, j):
            return j, draws


@njit(cache=True)
def _dns(indptr, sorted_items, n_items, U, V, u, c, rng):
    best = -1
    best_x = -np.inf
    for _ in range(c):
        j, _d = _uniform(indptr, sorted_items, n_items, u, rng)
        x = _dot(U, V, u, j)
        if x > best_x or (x == best_x and j < best):
            best_x = x
            best = j
    return best, c


@njit(cache=True)
def _reject(i, pi, max_shot, rng):
    n = len(pi)
    selected = -1
    maxi = -1.0
    for _ in range(max_shot):
        j = rng.integers(0, n)
        if pi[j] > maxi:
            maxi = pi[j]
            selected = j
        reject_ratio = 1.0 - min(pi[j] / pi[i], 1.0)
        if rng.random() > reject_ratio:
            return j
    return selected


@njit(cache=True)
def _search(indptr, sorted_items, U, V, u, i, pi, kappa, max_shot, margin, use_reject, rng):
    """Shared violation search of WARP (uniform proposals) and VINS (reject proposals).

    Returns (max-score candidate, K, violated).  Re-draws of observed items do
    not count towards K.
    """
    n_items = V.shape[0]
    x_ui = _dot(U, V, u, i)
    best = -1
    best_x = -np.inf
    violated = False
    K = 0
    for step in range(1, kappa + 1):
        K = step
        while True:
            if use_reject:
                j = _reject(i, pi, max_shot, rng)
            else:
                j = rng.integers(0, n_items)
            if not _has_edge(indptr, sorted_items, u, j):
                break
        x = _dot(U, V, u, j)
        if x > best_x or (x == best_x and j < best):
            best_x = x
            best = j
        if x + margin - x_ui > 0:
            violated = True
            break
    return best, K, violated


@njit(cache=True)
def _vins(indptr, sorted_items, U, V, u, i, pi, zw, kappa, max_shot, margin, rng):
    j, K, violated = _search(indptr, sorted_items, U, V, u, i, pi, kappa, max_shot, margin, True, rng)
    r = max(1.0, float(math.floor(zw / min(K, kappa))))
    return j, K, _rank_weight(r, zw), violated


@njit(cache=True)
def _warp(indptr, sorted_items, U, V, u, i, kappa, margin, rng):
    dummy = np.ones(1)
    j, K, violated = _search(indptr, sorted_items, U, V, u, i, dummy, kappa, 1, margin, False, rng)
    r = max(1.0, float(math.floor(V.shape[0] / min(K, kappa))))
    return j, K, _harmonic(r), violated


@njit(cache=True)
def draw_negative(kind, indptr, sorted_items, U, V, u, i, pi, cumulative, zw,
                  kappa, max_shot, margin, dns_c, rng):
    """Dispatch on sampler code (index into ``KINDS``)."""
    n_items = V.shape[0]
    if kind == 0:
        j, k = _uniform(indptr, sorted_items, n_items, u, rng)
        w = 1.0
    elif kind == 1:
        j, k = _popularity(indptr, sorted_items, cumulative, u, rng)
        w = 1.0
    elif kind == 2:
        j, k = _dns(indptr, sorted_items, n_items, U, V, u, dns_c, rng)
        w = 1.0
    elif kind == 3:
        return _warp(indptr, sorted_items, U, V, u, i, kappa, margin, rng)
    else:
        return _vins(indptr, sorted_items, U, V, u, i, pi, zw, kappa, max_shot, margin, rng)
    violated = _dot(U, V, u, j) + margin - _dot(U, V, u, i) > 0
    return j, k, w, violated


# ---------------------------------------------------------------- public API

def _check_user(graph: InteractionGraph, u: int) -> None:
    if not 0 <= u < graph.n_users:
        raise ValueError(f"user {u} out of range")
    if graph.indptr[u + 1] - graph.indptr[u] >= graph.n_items:
        raise ValueError(f"user {u} is connected to every item; no negative exists")


def _outcome(j, k, w, violated) -> SamplerOutcome:
    return SamplerOutcome(int(j), int(k), float(w), bool(violated))


def uniform_negative(graph: InteractionGraph, u: int, rng: np.random.Generator) -> SamplerOutcome:
    _check_user(graph, u)
    j, k = _uniform(graph.indptr, graph.sorted_items, graph.n_items, u, rng)
    return SamplerOutcome(int(j), int(k), 1.0, False)


def popularity_negative(graph: InteractionGraph, weights: DegreeWeights, u: int,
                        rng: np.random.Generator) -> SamplerOutcome:
    _check_user(graph, u)
    nbr = graph.sorted_items[graph.indptr[u]:graph.indptr[u + 1]]
    if weights.pi.sum() - weights.pi[nbr].sum() <= 0:
        raise ValueError(f"user {u} has no non-neighbour item with positive weight")
    j, k = _popularity(graph.indptr, graph.sorted_items, weights.cumulative, u, rng)
    return SamplerOutcome(int(j), int(k), 1.0, False)


def dns_negative(graph: InteractionGraph, model: ModelParams, u: int, candidates: int,
                 rng: np.random.Generator) -> SamplerOutcome:
    """Best-scoring of ``candidates`` uniform negatives (ties -> lowest index)."""
    if candidates < 1:
        raise ValueError("need at least one candidate")
    _check_user(graph, u)
    j, k = _dns(graph.indptr, graph.sorted_items, graph.n_items,
                model.user_embeddings, model.item_embeddings, u, candidates, rng)
    return SamplerOutcome(int(j), int(k), 1.0, False)


def warp_negative(graph: InteractionGraph, model: ModelParams, u: int, i: int,
                  config: SamplerConfig, rng: np.random.Generator) -> SamplerOutcome:
    _check_user(graph, u)
    return _outcome(*_warp(graph.indptr, graph.sorted_items, model.user_embeddings,
                           model.item_embeddings, u, i, config.kappa, config.margin, rng))


def reject_sampler(i: int, weights: DegreeWeights, max_shot: int, rng: np.random.Generator) -> int:
    """Uniform proposals accepted with probability min(pi(j)/pi(i), 1).

    After ``max_shot`` rejections the highest-weight proposal seen is returned.
    """
    if max_shot < 1:
        raise ValueError("max_shot must be >= 1")
    if not weights.pi[i] > 0:
        raise ValueError(f"positive item {i} has zero weight")
    return int(_reject(i, weights.pi, max_shot, rng))


def vins_negative(graph: InteractionGraph, model: ModelParams, u: int, i: int,
                  weights: DegreeWeights, config: SamplerConfig,
                  rng: np.random.Generator) -> SamplerOutcome:
    _check_user(graph, u)
    if not weights.pi[i] > 0:
        raise ValueError(f"positive item {i} has zero weight")
    return _outcome(*_vins(graph.indptr, graph.sorted_items, model.user_embeddings,
                           model.item_embeddings, u, i, weights.pi, weights.normalizer,
                           config.kappa, config.max_shot, config.margin, rng))


def sample_negative(graph: InteractionGraph, model: ModelParams, u: int, i: int,
                    weights: DegreeWeights, config: SamplerConfig,
                    rng: np.random.Generator) -> SamplerOutcome:
    """Draw one negative for the positive pair (u, i) with the configured sampler."""
    _check_user(graph, u)
    return _outcome(*draw_negative(config.kind_code, graph.indptr, graph.sorted_items,
                                   model.user_embeddings, model.item_embeddings, u, i,
                                   weights.pi, weights.cumulative, weights.normalizer,
                                   config.kappa, config.max_shot, config.margin,
                                   config.dns_candidates, rng))


@njit(cache=True)
def _draw_batch(kind, indptr, sorted_items, U, V, u, i, pi, cumulative, zw,
                kappa, max_shot, margin, dns_c, rng, size):
    items = np.empty(size, dtype=np.int64)
    steps = np.empty(size, dtype=np.int64)
    weights = np.empty(size)
    violated = np.empty(size, dtype=np.bool_)
    for k in range(size):
        j, s, w, v = draw_negative(kind, indptr, sorted_items, U, V, u, i, pi, cumulative, zw,
                                   kappa, max_shot, margin, dns_c, rng)
        items[k] = j
        steps[k] = s
        weights[k] = w
        violated[k] = v
    return items, steps, weights, violated


def sample_many(graph: InteractionGraph, model: ModelParams, u: int, i: int,
                weights: DegreeWeights, config: SamplerConfig, rng: np.random.Generator,
                size: int):
    """``size`` independent draws for one (u, i) pair as (items, steps, weights, violated) arrays.

    Consumes the generator exactly like ``size`` calls of ``sample_negative``.
    """
    _check_user(graph, u)
    return _draw_batch(config.kind_code, graph.indptr, graph.sorted_items, model.user_embeddings,
                       model.item_embeddings, u, i, weights.pi, weights.cumulative,
                       weights.normalizer, config.kappa, config.max_shot, config.margin,
                       config.dns_candidates, rng, size)


@njit(cache=True)
def _reject_batch(i, pi, max_shot, rng, size):
    out = np.empty(size, dtype=np.int64)
    for k in range(size):
        out[k] = _reject(i, pi, max_shot, rng)
    return out


def reject_sampler_many(i: int, weights: DegreeWeights, max_shot: int,
                        rng: np.random.Generator, size: int) -> np.ndarray:
    if max_shot < 1:
        raise ValueError("max_shot must be >= 1")
    return _reject_batch(i, weights.pi, max_shot, rng, size)
