import sys

import numpy as np
import pytest

from vins.interactions import InteractionGraph, synthetic_powerlaw


def random_graph(rng, n_users, n_items, density=0.3, min_user_deg=2):
    """Random bipartite graph where every user has >= min_user_deg edges and a non-neighbour."""
    users, items = [], []
    for u in range(n_users):
        k = int(np.clip(rng.binomial(n_items, density), min_user_deg, n_items - 1))
        chosen = rng.choice(n_items, size=k, replace=False)
        users += [u] * k
        items += chosen.tolist()
    perm = rng.permutation(len(users))
    return InteractionGraph.from_edges(n_users, n_items, np.asarray(users)[perm],
                                       np.asarray(items)[perm], rng.integers(0, 50, len(users)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_powerlaw():
    return synthetic_powerlaw(200, 150, 3000, alpha=1.0, seed=3)


def write_tsv(path, rows):
    path.write_text("".join(f"{u}\t{i}\t{t}\n" for u, i, t in rows), encoding="utf-8")
    return path


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-minute training suite")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.VERDICTS, key=lambda s: int(s.split("criterion")[1].split()[0])):
        terminalreporter.write_line(line)
