"""User-item interaction logs: ingestion, k-core filtering and chronological splits.

Input files are UTF-8 text with one interaction per line::

    user_key<TAB>item_key<TAB>timestamp

Ratings (if any extra columns exist) are ignored; every line is an implicit
positive.  Graphs are built once and never mutated afterwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class ParseError(ValueError):
    """Malformed interaction line."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class RawInteraction:
    user_key: str
    item_key: str
    timestamp: int

    def __post_init__(self):
        if not self.user_key or not self.item_key:
            raise ValueError("interaction keys must be non-empty")
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")


@dataclass(eq=False)
class InteractionGraph:
    """Bipartite user-item graph in CSR layout.

    ``indptr``/``items``/``timestamps`` hold each user's adjacency ordered by
    time (ties keep input order).  ``sorted_items`` is the same adjacency
    sorted by item index, used for binary-search membership in compiled code.
    """

    n_users: int
    n_items: int
    indptr: np.ndarray
    items: np.ndarray
    timestamps: np.ndarray
    user_keys: tuple = ()
    item_keys: tuple = ()
    item_degree: np.ndarray = field(init=False)
    sorted_items: np.ndarray = field(init=False)
    _edge_keys: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        self.indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        self.items = np.ascontiguousarray(self.items, dtype=np.int64)
        self.timestamps = np.ascontiguousarray(self.timestamps, dtype=np.int64)
        if len(self.indptr) != self.n_users + 1 or self.indptr[-1] != len(self.items):
            raise ValueError("inconsistent CSR layout")
        if len(self.items) and (self.items.min() < 0 or self.items.max() >= self.n_items):
            raise ValueError("item index out of range")
        self.item_degree = np.bincount(self.items, minlength=self.n_items).astype(np.int64)
        srt = self.items.copy()
        for u in range(self.n_users):
            a, b = self.indptr[u], self.indptr[u + 1]
            srt[a:b].sort()
        self.sorted_items = srt
        users = np.repeat(np.arange(self.n_users, dtype=np.int64), np.diff(self.indptr))
        keys = users * self.n_items + self.items
        self._edge_keys = frozenset(keys.tolist())
        if len(self._edge_keys) != len(self.items):
            raise ValueError("duplicate edges")
        for arr in (self.indptr, self.items, self.timestamps, self.item_degree, self.sorted_items):
            arr.setflags(write=False)

    @classmethod
    def from_edges(cls, n_users: int, n_items: int, users: Sequence[int], items: Sequence[int],
                   timestamps: Sequence[int] | None = None, user_keys=(), item_keys=()):
        """Build a graph from parallel edge arrays.

        Edges are grouped per user with a stable sort on timestamp, so equal
        timestamps keep the order given here.
        """
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        if timestamps is None:
            timestamps = np.arange(len(users), dtype=np.int64)
        timestamps = np.asarray(timestamps, dtype=np.int64)
        if not (len(users) == len(items) == len(timestamps)):
            raise ValueError("edge arrays differ in length")
        if len(users) and (users.min() < 0 or users.max() >= n_users):
            raise ValueError("user index out of range")
        order = np.lexsort((np.arange(len(users)), timestamps, users))
        indptr = np.zeros(n_users + 1, dtype=np.int64)
        np.cumsum(np.bincount(users, minlength=n_users), out=indptr[1:])
        return cls(n_users, n_items, indptr, items[order], timestamps[order],
                   tuple(user_keys), tuple(item_keys))

    @property
    def edge_count(self) -> int:
        return len(self.items)

    @property
    def user_degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def user_items(self, u: int) -> np.ndarray:
        """Items of user ``u`` in chronological order."""
        return self.items[self.indptr[u]:self.indptr[u + 1]]

    def edge_array(self) -> np.ndarray:
        users = np.repeat(np.arange(self.n_users, dtype=np.int64), np.diff(self.indptr))
        return np.column_stack([users, self.items])

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(i)) for u, i in self.edge_array()}

    def contains_edge(self, u: int, i: int) -> bool:
        return contains_edge(self, u, i)


def contains_edge(graph: InteractionGraph, u: int, i: int) -> bool:
    if not (0 <= u < graph.n_users) or not (0 <= i < graph.n_items):
        raise ValueError(f"index out of range: ({u}, {i})")
    return u * graph.n_items + i in graph._edge_keys


def read_interactions(path) -> list[RawInteraction]:
    """Parse a tab-separated interaction file."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise ParseError(lineno, f"expected user<TAB>item<TAB>timestamp, got {line!r}")
            try:
                ts = int(parts[2])
            except ValueError:
                raise ParseError(lineno, f"bad timestamp {parts[2]!r}") from None
            try:
                out.append(RawInteraction(parts[0], parts[1], ts))
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
    return out


def kcore_filter(records: Iterable[RawInteraction], min_degree: int) -> list[RawInteraction]:
    """Drop users/items with degree < min_degree, repeating until nothing changes.

    Duplicate (user, item) pairs are collapsed to their first occurrence first.
    """
    seen = set()
    recs = []
    for r in records:
        key = (r.user_key, r.item_key)
        if key not in seen:
            seen.add(key)
            recs.append(r)
    while True:
        ucount: dict[str, int] = {}
        icount: dict[str, int] = {}
        for r in recs:
            ucount[r.user_key] = ucount.get(r.user_key, 0) + 1
            icount[r.item_key] = icount.get(r.item_key, 0) + 1
        kept = [r for r in recs if ucount[r.user_key] >= min_degree and icount[r.item_key] >= min_degree]
        if len(kept) == len(recs):
            return kept
        recs = kept


def build_graph(records: Sequence[RawInteraction], user_index: dict | None = None,
                item_index: dict | None = None) -> InteractionGraph:
    """Index records into a graph.

    Without explicit index maps, indices follow order of first appearance.
    """
    if user_index is None:
        user_index = {}
        for r in records:
            user_index.setdefault(r.user_key, len(user_index))
    if item_index is None:
        item_index = {}
        for r in records:
            item_index.setdefault(r.item_key, len(item_index))
    try:
        users = [user_index[r.user_key] for r in records]
        items = [item_index[r.item_key] for r in records]
    except KeyError as exc:
        raise ValueError(f"key {exc.args[0]!r} missing from index map") from None
    ts = [r.timestamp for r in records]
    ukeys = sorted(user_index, key=user_index.get)
    ikeys = sorted(item_index, key=item_index.get)
    return InteractionGraph.from_edges(len(ukeys), len(ikeys), users, items, ts, ukeys, ikeys)


def load_interactions(path, min_degree: int = 10) -> InteractionGraph:
    records = kcore_filter(read_interactions(path), min_degree)
    if not records:
        raise ValueError(f"no interactions left in {path} after filtering at min_degree={min_degree}")
    return build_graph(records)


def chronological_split(graph: InteractionGraph, holdout_fraction: float = 0.2):
    """Hold out the last ``max(1, floor(fraction * n))`` interactions of each user."""
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError(f"holdout_fraction must lie in (0, 1), got {holdout_fraction}")
    deg = graph.user_degree
    if deg.min(initial=2) < 2:
        bad = int(np.argmin(deg))
        raise ValueError(f"user {bad} has {deg[bad]} interactions; need at least 2 to split")
    tr_u, tr_i, tr_t, te_u, te_i, te_t = [], [], [], [], [], []
    for u in range(graph.n_users):
        a, b = graph.indptr[u], graph.indptr[u + 1]
        n = b - a
        # small epsilon guards against products like 0.29*100 = 28.999...
        n_test = max(1, math.floor(holdout_fraction * n + 1e-9))
        cut = b - n_test
        tr_u.append(np.full(cut - a, u)), tr_i.append(graph.items[a:cut]), tr_t.append(graph.timestamps[a:cut])
        te_u.append(np.full(n_test, u)), te_i.append(graph.items[cut:b]), te_t.append(graph.timestamps[cut:b])

    def make(us, its, ts):
        return InteractionGraph.from_edges(graph.n_users, graph.n_items, np.concatenate(us),
                                           np.concatenate(its), np.concatenate(ts),
                                           graph.user_keys, graph.item_keys)

    return make(tr_u, tr_i, tr_t), make(te_u, te_i, te_t)


def write_interactions(graph: InteractionGraph, path) -> None:
    ukeys = graph.user_keys or [str(u) for u in range(graph.n_users)]
    ikeys = graph.item_keys or [str(i) for i in range(graph.n_items)]
    with open(path, "w", encoding="utf-8") as fh:
        for u in range(graph.n_users):
            for k in range(graph.indptr[u], graph.indptr[u + 1]):
                fh.write(f"{ukeys[u]}\t{ikeys[graph.items[k]]}\t{graph.timestamps[k]}\n")


def write_index_map(keys: Sequence[str], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for idx, key in enumerate(keys):
            fh.write(f"{key}\t{idx}\n")


def read_index_map(path) -> dict[str, int]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            key, _, idx = line.partition("\t")
            try:
                out[key] = int(idx)
            except ValueError:
                raise ParseError(lineno, f"bad index {idx!r}") from None
    if sorted(out.values()) != list(range(len(out))):
        raise ValueError(f"index map {path} is not dense")
    return out


def save_split(train: InteractionGraph, test: InteractionGraph, directory) -> None:
    """Write ``train.tsv``, ``test.tsv``, ``users.idx`` and ``items.idx``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    ukeys = train.user_keys or [str(u) for u in range(train.n_users)]
    ikeys = train.item_keys or [str(i) for i in range(train.n_items)]
    write_index_map(ukeys, d / "users.idx")
    write_index_map(ikeys, d / "items.idx")
    write_interactions(train, d / "train.tsv")
    write_interactions(test, d / "test.tsv")


def load_split(directory) -> tuple[InteractionGraph, InteractionGraph]:
    d = Path(directory)
    uidx = read_index_map(d / "users.idx")
    iidx = read_index_map(d / "items.idx")
    train = build_graph(read_interactions(d / "train.tsv"), uidx, iidx)
    test = build_graph(read_interactions(d / "test.tsv"), uidx, iidx)
    return train, test


def synthetic_powerlaw(n_users: int, n_items: int, n_edges: int, alpha: float = 1.0,
                       n_communities: int = 8, affinity: float = 0.8, seed: int = 0) -> InteractionGraph:
    """Power-law bipartite graph with community structure.

    Item popularity and user activity follow Zipf laws with exponent
    ``alpha``.  Each user and item belongs to one of ``n_communities``; with
    probability ``affinity`` a user's edge is drawn from items of its own
    community (popularity-weighted), otherwise from the whole catalog.
    Timestamps are the generation order.
    """
    if min(n_users, n_items, n_edges) < 1:
        raise ValueError("sizes must be positive")
    if n_edges > n_users * n_items:
        raise ValueError("more edges requested than user-item pairs")
    rng = np.random.default_rng(seed)
    item_pop = rng.permutation(np.arange(1, n_items + 1) ** -float(alpha))
    item_pop /= item_pop.sum()
    activity = rng.permutation(np.arange(1, n_users + 1) ** -float(alpha))
    # every user gets >= 2 edges so the graph can be split, and at most a
    # quarter of the catalog so that negatives always exist
    cap = max(2, min(n_items - 1, n_items // 4))
    quota = np.full(n_users, min(2, cap))
    remaining = n_edges - quota.sum()
    while remaining > 0:
        open_ = quota < cap
        if not open_.any():
            break
        p = np.where(open_, activity, 0.0)
        quota += rng.multinomial(remaining, p / p.sum())
        quota = np.minimum(quota, cap)
        remaining = n_edges - quota.sum()
    ucomm = rng.integers(n_communities, size=n_users)
    icomm = rng.integers(n_communities, size=n_items)
    comm_p = []
    for c in range(n_communities):
        w = np.where(icomm == c, item_pop, 0.0)
        comm_p.append(w / w.sum() if w.sum() > 0 else item_pop)
    users, items = [], []
    for u in range(n_users):
        mix = affinity * comm_p[ucomm[u]] + (1 - affinity) * item_pop
        chosen = rng.choice(n_items, size=int(quota[u]), replace=False, p=mix)
        users.extend([u] * len(chosen))
        items.extend(chosen.tolist())
    users = np.asarray(users)
    items = np.asarray(items)
    perm = rng.permutation(len(users))
    users, items = users[perm], items[perm]
    used = np.unique(items)
    remap = np.full(n_items, -1)
    remap[used] = np.arange(len(used))
    return InteractionGraph.from_edges(n_users, len(used), users, remap[items],
                                       np.arange(len(users)),
                                       [f"u{u}" for u in range(n_users)],
                                       [f"i{i}" for i in used])
