"""Static degree-power item distribution and item imbalance values."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .interactions import InteractionGraph


@dataclass(frozen=True, eq=False)
class DegreeWeights:
    beta: float
    pi: np.ndarray
    normalizer: float
    cumulative: np.ndarray

    @property
    def n_items(self) -> int:
        return len(self.pi)

    @property
    def probabilities(self) -> np.ndarray:
        return self.pi / self.normalizer

    @classmethod
    def from_pi(cls, pi, beta: float = float("nan")) -> "DegreeWeights":
        """Wrap arbitrary nonnegative item weights (used by the analysis tools)."""
        pi = np.ascontiguousarray(pi, dtype=np.float64)
        if pi.ndim != 1 or len(pi) == 0:
            raise ValueError("pi must be a non-empty vector")
        if np.any(pi < 0) or not np.all(np.isfinite(pi)):
            raise ValueError("pi must be finite and nonnegative")
        cum = np.cumsum(pi)
        z = float(cum[-1])
        if z <= 0:
            raise ValueError("pi sums to zero")
        pi.setflags(write=False)
        cum.setflags(write=False)
        return cls(beta, pi, z, cum)


def build_weights(graph: InteractionGraph, beta: float) -> DegreeWeights:
    """pi(i) = d_i ** beta.  Zero-degree items get weight 0 (1 when beta == 0)."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    if graph.edge_count == 0:
        raise ValueError("empty graph")
    d = graph.item_degree.astype(np.float64)
    if beta == 0.0:
        pi = np.ones_like(d)
    else:
        with np.errstate(divide="ignore"):
            pi = np.exp(beta * np.log(d))
    return DegreeWeights.from_pi(pi, beta)


@njit(cache=True)
def _draw(cumulative, rng):
    z = cumulative[-1]
    k = np.searchsorted(cumulative, rng.random() * z, side="right")
    # side="right" never lands on a zero-weight slot except on round-up past z
    if k >= len(cumulative):
        k = len(cumulative) - 1
        while k > 0 and cumulative[k] == cumulative[k - 1]:
            k -= 1
    return k


@njit(cache=True)
def _draw_many(cumulative, rng, size):
    out = np.empty(size, dtype=np.int64)
    for k in range(size):
        out[k] = _draw(cumulative, rng)
    return out


def sample_item(weights: DegreeWeights, rng: np.random.Generator) -> int:
    """Draw one item with probability pi(i) / Z_w by inverse CDF."""
    return int(_draw(weights.cumulative, rng))


def sample_items(weights: DegreeWeights, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` independent draws; same stream as repeated ``sample_item`` calls."""
    return _draw_many(weights.cumulative, rng, size)


def imbalance_value(weights: DegreeWeights, graph: InteractionGraph, i: int) -> float:
    """Expected positive over negative occurrences of item ``i`` under static sampling."""
    d = int(graph.item_degree[i])
    e = graph.edge_count
    if d >= e:
        raise ValueError(f"item {i} owns all {e} edges; imbalance value undefined")
    if d == 0:
        return 0.0
    return d ** (1.0 - weights.beta) * weights.normalizer / (e - d)


def imbalance_values(weights: DegreeWeights, graph: InteractionGraph) -> np.ndarray:
    d = graph.item_degree.astype(np.float64)
    e = graph.edge_count
    if np.any(d >= e):
        raise ValueError("an item owns every edge; imbalance value undefined")
    return d ** (1.0 - weights.beta) * weights.normalizer / (e - d)
