"""Per-edge stochastic training loop with exposure and step-count tracking."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numba import njit
from scipy import stats

from .interactions import InteractionGraph
from .model import AdamState, ModelParams, init_params, triple_step
from .samplers import SamplerConfig, draw_negative
from .weights import build_weights

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 50
    learning_rate: float = 1e-3
    lambda_reg: float = 1e-3
    dim: int = 64
    seed: int = 0
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    eval_every: int = 10
    init_scale: float = 0.1

    def __post_init__(self):
        if self.epochs < 1 or self.eval_every < 1 or self.dim < 1:
            raise ValueError("epochs, eval_every and dim must be >= 1")
        if not self.learning_rate > 0 or self.lambda_reg < 0:
            raise ValueError("learning rate must be positive and lambda nonnegative")


@dataclass
class ExposureCounters:
    """Cumulative per-item counts as positive and as sampled negative."""

    positive: np.ndarray
    negative: np.ndarray

    @classmethod
    def zeros(cls, n_items: int) -> "ExposureCounters":
        return cls(np.zeros(n_items, dtype=np.int64), np.zeros(n_items, dtype=np.int64))


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    mean_steps: float
    std_steps: float
    violated_fraction: float
    wall_time_s: float


class TrainResult(NamedTuple):
    params: ModelParams
    history: list
    counters: ExposureCounters


def empirical_imbalance(counters: ExposureCounters, i: int) -> float:
    """positive / negative occurrences of item ``i``; NaN when never sampled as negative."""
    neg = counters.negative[i]
    if neg == 0:
        return float("nan")
    return counters.positive[i] / neg


def imbalance_extremes(counters: ExposureCounters):
    """(argmax, max, argmin, min) of the empirical ratio over items with negative exposure."""
    ok = counters.negative > 0
    if not ok.any():
        nan = float("nan")
        return -1, nan, -1, nan
    ratio = np.full(len(ok), np.nan)
    ratio[ok] = counters.positive[ok] / counters.negative[ok]
    hi = int(np.nanargmax(ratio))
    lo = int(np.nanargmin(ratio))
    return hi, float(ratio[hi]), lo, float(ratio[lo])


def norm_report(params: ModelParams, graph: InteractionGraph):
    """Per-item (degree, L2 norm) table and the Spearman correlation between the two."""
    norms = np.linalg.norm(params.item_embeddings, axis=1)
    deg = graph.item_degree
    rho = stats.spearmanr(deg, norms).statistic
    return np.column_stack([deg, norms]), float(rho)


@njit(cache=True)
def _run_epoch(us, its, indptr, sorted_items, U, V, mU, vU, mV, vV, t0,
               kind, pi, cumulative, zw, kappa, max_shot, margin, dns_c,
               lr, lam, b1, b2, eps, rng, neg_count, steps, violated, losses):
    t = t0
    for e in range(len(us)):
        u = us[e]
        i = its[e]
        j, k, w, viol = draw_negative(kind, indptr, sorted_items, U, V, u, i, pi, cumulative, zw,
                                      kappa, max_shot, margin, dns_c, rng)
        neg_count[j] += 1
        steps[e] = k
        violated[e] = viol
        t += 1
        losses[e] = triple_step(U, V, mU, vU, mV, vV, t, u, i, j, w, lr, lam, b1, b2, eps)
    return t


def _append_csv(path, row, header):
    new = not Path(path).exists()
    with open(path, "a", newline="") as fh:
        wr = csv.writer(fh)
        if new:
            wr.writerow(header)
        wr.writerow(row)


def _fmt(x):
    return f"{x:.10g}" if isinstance(x, float) else x


def train(train_graph: InteractionGraph, config: TrainingConfig, *, test_graph=None,
          cutoffs=(10,), out_dir=None, callback=None) -> TrainResult:
    """Run ``config.epochs`` passes over the shuffled training edges.

    Each observed edge yields exactly one (u, i, j) triple per epoch.  When
    ``out_dir`` is given, per-epoch rows are appended to ``epoch_stats.csv``,
    ``steps.csv`` and ``exposure.csv`` as training proceeds; with a
    ``test_graph`` metrics are appended to ``metrics.jsonl`` every
    ``eval_every`` epochs.  ``callback(epoch, params, stats)`` is called
    after every epoch.
    """
    if train_graph.edge_count == 0:
        raise ValueError("empty training graph")
    sc = config.sampler
    weights = build_weights(train_graph, sc.beta)
    seeds = np.random.SeedSequence(config.seed)
    init_seq, loop_seq = seeds.spawn(2)
    params = init_params(train_graph.n_users, train_graph.n_items, config.dim,
                         config.init_scale, np.random.default_rng(init_seq))
    state = AdamState.for_params(params, learning_rate=config.learning_rate,
                                 weight_decay=config.lambda_reg)
    counters = ExposureCounters.zeros(train_graph.n_items)
    edges = train_graph.edge_array()
    n = len(edges)
    deg_u = train_graph.user_degree
    full = np.flatnonzero(deg_u >= train_graph.n_items)
    if len(full):
        raise ValueError(f"user {full[0]} is connected to every item; no negative exists")

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        for name in ("epoch_stats.csv", "steps.csv", "exposure.csv", "metrics.jsonl"):
            (out / name).unlink(missing_ok=True)

    history = []
    steps = np.zeros(n, dtype=np.int64)
    violated = np.zeros(n, dtype=np.bool_)
    losses = np.zeros(n)
    epoch_seqs = loop_seq.spawn(config.epochs)
    for epoch in range(1, config.epochs + 1):
        rng = np.random.default_rng(epoch_seqs[epoch - 1])
        order = rng.permutation(n)
        us = np.ascontiguousarray(edges[order, 0])
        its = np.ascontiguousarray(edges[order, 1])
        tic = time.perf_counter()
        state.step = _run_epoch(us, its, train_graph.indptr, train_graph.sorted_items,
                                params.user_embeddings, params.item_embeddings,
                                state.m_user, state.v_user, state.m_item, state.v_item, state.step,
                                sc.kind_code, weights.pi, weights.cumulative, weights.normalizer,
                                sc.kappa, sc.max_shot, sc.margin, sc.dns_candidates,
                                state.learning_rate, state.weight_decay, state.beta1, state.beta2,
                                state.epsilon, rng, counters.negative, steps, violated, losses)
        counters.positive += train_graph.item_degree
        if not np.all(np.isfinite(losses)):
            raise FloatingPointError(f"non-finite loss in epoch {epoch}")
        st = EpochStats(epoch, float(losses.mean()), float(steps.mean()), float(steps.std()),
                        float(violated.mean()), time.perf_counter() - tic)
        history.append(st)
        log.info("epoch %d loss %.5f steps %.2f+-%.2f violated %.3f", epoch, st.mean_loss,
                 st.mean_steps, st.std_steps, st.violated_fraction)
        if out is not None:
            _append_csv(out / "epoch_stats.csv", [_fmt(v) for v in asdict(st).values()],
                        ["epoch", "mean_loss", "mean_steps", "std_steps", "violated_frac", "wall_time_s"])
            _append_csv(out / "steps.csv", [epoch, sc.kind, _fmt(st.mean_steps), _fmt(st.std_steps)],
                        ["epoch", "sampler", "mean_steps", "std_steps"])
            hi, hv, lo, lv = imbalance_extremes(counters)
            _append_csv(out / "exposure.csv", [epoch, hi, _fmt(hv), lo, _fmt(lv)],
                        ["epoch", "max_iv_item", "max_iv", "min_iv_item", "min_iv"])
        if test_graph is not None and (epoch % config.eval_every == 0 or epoch == config.epochs):
            from .evaluation import evaluate
            for n_cut in cutoffs:
                m = evaluate(params, train_graph, test_graph, n_cut)
                rec = {"epoch": epoch, **m.as_json()}
                log.info("epoch %d %s", epoch, json.dumps(rec))
                if out is not None:
                    with open(out / "metrics.jsonl", "a") as fh:
                        fh.write(json.dumps(rec) + "\n")
        if callback is not None:
            callback(epoch, params, st)
    return TrainResult(params, history, counters)
