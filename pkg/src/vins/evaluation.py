"""Top-N ranking and Precision/Recall/F1/NDCG."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .interactions import InteractionGraph
from .model import ModelParams


@dataclass(frozen=True)
class RankingMetrics:
    n_cutoff: int
    precision: float
    recall: float
    f1: float
    ndcg: float
    users_evaluated: int

    def as_json(self) -> dict:
        return {"N": self.n_cutoff, "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "ndcg": self.ndcg, "users": self.users_evaluated}


def _top_n(scores: np.ndarray, exclude: np.ndarray, n_cutoff: int) -> np.ndarray:
    cand = np.ones(len(scores), dtype=bool)
    cand[exclude] = False
    idx = np.flatnonzero(cand)
    if len(idx) == 0:
        raise ValueError("no candidate items left to rank")
    # stable sort keeps ascending item index among equal scores
    order = np.argsort(-scores[idx], kind="stable")
    return idx[order[:n_cutoff]]


def rank_items(params: ModelParams, u: int, train_graph: InteractionGraph, n_cutoff: int) -> list[int]:
    """Top ``n_cutoff`` items for ``u`` by score, skipping training items; ties -> lower index."""
    if n_cutoff < 1:
        raise ValueError("cutoff must be positive")
    scores = params.item_embeddings @ params.user_embeddings[u]
    return _top_n(scores, train_graph.user_items(u), n_cutoff).tolist()


def rank_all(params: ModelParams, train_graph: InteractionGraph, users, n_cutoff: int,
             threads: int = 1) -> dict[int, list[int]]:
    users = list(users)

    def work(chunk):
        scores = params.user_embeddings[chunk] @ params.item_embeddings.T
        return {u: _top_n(row, train_graph.user_items(u), n_cutoff).tolist()
                for u, row in zip(chunk, scores)}

    chunks = [users[k:k + 256] for k in range(0, len(users), 256)]
    out: dict[int, list[int]] = {}
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            for part in pool.map(work, chunks):
                out.update(part)
    else:
        for c in chunks:
            out.update(work(c))
    return out


def _discounts(n: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, n + 2))


def topn_metrics(ranked_lists: dict, test_graph: InteractionGraph, n_cutoff: int) -> RankingMetrics:
    """Average per-user precision, recall and NDCG; F1 from the averaged precision and recall."""
    if not ranked_lists:
        raise ValueError("no ranked users")
    if test_graph.edge_count == 0:
        raise ValueError("empty test set")
    disc = _discounts(n_cutoff)
    pre = rec = ndcg = 0.0
    for u, ranked in ranked_lists.items():
        truth = test_graph.user_items(u)
        if len(truth) == 0:
            raise ValueError(f"user {u} has no test items")
        ranked = np.asarray(ranked[:n_cutoff], dtype=np.int64)
        hits = np.isin(ranked, truth)
        n_hit = int(hits.sum())
        pre += n_hit / len(ranked) if len(ranked) else 0.0
        rec += n_hit / len(truth)
        idcg = disc[:min(len(truth), n_cutoff)].sum()
        ndcg += float(disc[:len(ranked)][hits].sum()) / idcg
    m = len(ranked_lists)
    pre, rec, ndcg = pre / m, rec / m, ndcg / m
    f1 = 2 * pre * rec / (pre + rec) if pre + rec > 0 else 0.0
    return RankingMetrics(n_cutoff, pre, rec, f1, ndcg, m)


def evaluate(params: ModelParams, train_graph: InteractionGraph, test_graph: InteractionGraph,
             n_cutoff: int, threads: int = 1) -> RankingMetrics:
    """Rank every user with test items and score the lists."""
    users = np.flatnonzero(test_graph.user_degree > 0)
    ranked = rank_all(params, train_graph, users.tolist(), n_cutoff, threads)
    return topn_metrics(ranked, test_graph, n_cutoff)
