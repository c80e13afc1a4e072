"""Numerical checks of the sampler's theory: detailed balance, rank-estimate bias, IV curves."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

from .interactions import InteractionGraph
from .weights import DegreeWeights, build_weights, imbalance_values

MAX_BALANCE_ITEMS = 64
MIN_BALANCE_TRIALS = 100_000


@dataclass(frozen=True)
class BalanceReport:
    n_items: int
    trials: int
    max_abs_flux_gap: float
    analytic_gap: float


@dataclass(frozen=True)
class BiasPoint:
    r: float
    expected_estimate: float
    psi_ratio: float


def acceptance_kernel(pi) -> np.ndarray:
    """One-step kernel of uniform proposals accepted with prob min(pi_j/pi_i, 1).

    Rejected proposals stay put, so the diagonal absorbs 1 - sum of moves.
    """
    pi = np.asarray(pi, dtype=np.float64)
    n = len(pi)
    P = np.minimum(pi[None, :] / pi[:, None], 1.0) / n
    np.fill_diagonal(P, 0.0)
    P[np.diag_indices(n)] = 1.0 - P.sum(axis=1)
    return P


def exact_flux_gap(pi) -> Fraction:
    """max |p_i P*_ij - p_j P*_ji| in rational arithmetic (floats convert exactly)."""
    pi = [Fraction(float(x)) for x in pi]
    n = len(pi)
    z = sum(pi)
    p = [x / z for x in pi]
    gap = Fraction(0)
    for a in range(n):
        for b in range(a + 1, n):
            fab = p[a] * Fraction(1, n) * min(pi[b] / pi[a], Fraction(1))
            fba = p[b] * Fraction(1, n) * min(pi[a] / pi[b], Fraction(1))
            gap = max(gap, abs(fab - fba))
    return gap


def estimate_kernel(pi, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Monte Carlo estimate of ``acceptance_kernel`` with ``trials`` proposals per source state."""
    pi = np.asarray(pi, dtype=np.float64)
    n = len(pi)
    P = np.zeros((n, n))
    for i in range(n):
        j = rng.integers(0, n, size=trials)
        accept = rng.random(trials) < np.minimum(pi[j] / pi[i], 1.0)
        dest = np.where(accept, j, i)
        P[i] = np.bincount(dest, minlength=n) / trials
    return P


def verify_detailed_balance(weights: DegreeWeights, trials: int, rng: np.random.Generator) -> BalanceReport:
    """Compare probability flux p_i P*_ij against p_j P*_ji, estimated and exact.

    Fluxes use the normalized distribution p = pi / Z_w.
    """
    n = weights.n_items
    if n > MAX_BALANCE_ITEMS:
        raise ValueError(f"{n} items exceeds the pairwise budget of {MAX_BALANCE_ITEMS}")
    if trials < MIN_BALANCE_TRIALS:
        raise ValueError(f"need at least {MIN_BALANCE_TRIALS} trials per state, got {trials}")
    if np.any(weights.pi <= 0):
        raise ValueError("every item needs positive weight")
    p = weights.probabilities
    P = estimate_kernel(weights.pi, trials, rng)
    flux = p[:, None] * P
    gap = float(np.abs(flux - flux.T).max())
    return BalanceReport(n, trials, gap, float(exact_flux_gap(weights.pi)))


def _check_rank(r, zw):
    if not 1 <= r <= zw:
        raise ValueError(f"rank {r} outside [1, {zw}]")


def rank_bias_expectation(r: float, zw: float, mode: str = "closed_form", samples: int = 0,
                          rng: np.random.Generator | None = None) -> float:
    """E[Z_w / X] for X ~ Geometric(p = r / Z_w), the one-draw rank estimate.

    ``closed_form`` sums the series as Z_w p (-ln p) / (1 - p); ``monte_carlo``
    averages ``samples`` draws.
    """
    _check_rank(r, zw)
    p = r / zw
    if p == 1.0:
        return float(r)
    if mode == "closed_form":
        q = 1.0 - p
        return zw * p * (-math.log1p(-q)) / q
    if mode == "monte_carlo":
        if samples < 1:
            raise ValueError("monte_carlo mode needs samples >= 1")
        rng = np.random.default_rng() if rng is None else rng
        x = rng.geometric(p, size=samples)
        return float(np.mean(zw / x))
    raise ValueError(f"unknown mode {mode!r}")


def rank_bias_stderr(r: float, zw: float, samples: int) -> float:
    """Standard error of the Monte Carlo mean, from the exact second moment.

    E[1/X^2] = p/(1-p) * Li_2(1-p), evaluated by direct summation.
    """
    _check_rank(r, zw)
    p = r / zw
    if p == 1.0:
        return 0.0
    q = 1.0 - p
    k = np.arange(1, 20000)
    second = p / q * float(np.sum(q ** k / k ** 2))
    first = rank_bias_expectation(r, zw) / zw
    return zw * math.sqrt(max(second - first * first, 0.0) / samples)


def bias_ratio_psi(r: float, zw: float) -> float:
    """Relative overestimate (h(r) - r) / r = -ln p / (1 - p) - 1."""
    _check_rank(r, zw)
    p = r / zw
    if p == 1.0:
        return 0.0
    q = 1.0 - p
    return -math.log1p(-q) / q - 1.0


def bias_curve(zw: float, ranks) -> list[BiasPoint]:
    return [BiasPoint(float(r), rank_bias_expectation(r, zw), bias_ratio_psi(r, zw)) for r in ranks]


def harmonic_lemma(k_max: int = 20) -> list[tuple[int, float, float]]:
    """Rows (k, H(2^k), 1 + k/2) for k = 0..k_max, sums via ``math.fsum``."""
    rows = []
    for k in range(k_max + 1):
        h = math.fsum(1.0 / s for s in range(1, 2 ** k + 1))
        rows.append((k, h, 1.0 + k / 2))
    return rows


def iv_curve(graph: InteractionGraph, betas) -> list[tuple[float, float, float, int, int]]:
    """Rows (beta, max IV, min IV, argmax item, argmin item) over the given betas.

    Zero-degree items are left out (they never appear as positives).
    """
    rows = []
    active = graph.item_degree > 0
    for beta in betas:
        iv = imbalance_values(build_weights(graph, beta), graph)
        masked = np.where(active, iv, np.nan)
        hi = int(np.nanargmax(masked))
        lo = int(np.nanargmin(masked))
        rows.append((float(beta), float(iv[hi]), float(iv[lo]), hi, lo))
    return rows


@njit(cache=True)
def _chain(pi, steps, start, rng):
    n = len(pi)
    visits = np.zeros(n, dtype=np.int64)
    state = start
    for _ in range(steps):
        j = rng.integers(0, n)
        if rng.random() < min(pi[j] / pi[state], 1.0):
            state = j
        visits[state] += 1
    return visits


def simulate_chain(pi, steps: int, rng: np.random.Generator, start: int = 0) -> np.ndarray:
    """Occupancy frequencies of the accept-only reject chain after ``steps`` moves."""
    pi = np.ascontiguousarray(pi, dtype=np.float64)
    return _chain(pi, steps, start, rng) / steps
