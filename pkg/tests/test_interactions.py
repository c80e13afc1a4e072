import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vins.interactions import (InteractionGraph, ParseError, RawInteraction, chronological_split,
                               contains_edge, load_interactions, load_split, read_index_map,
                               save_split, synthetic_powerlaw, write_index_map)

from conftest import random_graph, write_tsv


class TestLoad:
    def test_full_bipartite(self, tmp_path):
        rows = [(f"u{u}", f"i{i}", 10 * u + i) for u in range(3) for i in range(3)]
        g = load_interactions(write_tsv(tmp_path / "a.tsv", rows), min_degree=1)
        assert g.edge_count == 9
        assert g.item_degree.tolist() == [3, 3, 3]
        assert g.user_degree.tolist() == [3, 3, 3]

    def test_star_graph_filtered_to_nothing(self, tmp_path):
        rows = [(f"u{u}", "hub", u) for u in range(12)]
        with pytest.raises(ValueError, match="no interactions left"):
            load_interactions(write_tsv(tmp_path / "a.tsv", rows), min_degree=10)

    def test_duplicates_collapse(self, tmp_path):
        rows = [("a", "x", 1), ("a", "x", 5), ("a", "y", 2), ("b", "x", 3)]
        g = load_interactions(write_tsv(tmp_path / "a.tsv", rows), min_degree=1)
        assert g.edge_count == 3
        assert g.item_degree.tolist() == [2, 1]

    def test_fixpoint(self, tmp_path):
        # u2 only has 1 item after i3 is dropped; a single pass would keep u2
        rows = [("u0", "i0", 0), ("u0", "i1", 1), ("u1", "i0", 2), ("u1", "i1", 3),
                ("u2", "i1", 4), ("u2", "i3", 5)]
        g = load_interactions(write_tsv(tmp_path / "a.tsv", rows), min_degree=2)
        assert g.user_keys == ("u0", "u1")
        assert g.item_keys == ("i0", "i1")
        assert min(g.user_degree.min(), g.item_degree.min()) >= 2

    def test_indices_by_first_appearance(self, tmp_path):
        rows = [("z", "q", 0), ("a", "p", 1), ("z", "p", 2)]
        g = load_interactions(write_tsv(tmp_path / "a.tsv", rows), min_degree=1)
        assert g.user_keys == ("z", "a")
        assert g.item_keys == ("q", "p")

    def test_parse_error_names_line(self, tmp_path):
        p = tmp_path / "bad.tsv"
        p.write_text("a\tb\t1\nc\td\tnope\n")
        with pytest.raises(ParseError, match="line 2"):
            load_interactions(p, 1)
        p.write_text("a\tb\n")
        with pytest.raises(ParseError, match="line 1"):
            load_interactions(p, 1)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_interactions(tmp_path / "missing.tsv", 1)

    def test_raw_interaction_validation(self):
        with pytest.raises(ValueError):
            RawInteraction("", "x", 0)
        with pytest.raises(ValueError):
            RawInteraction("u", "x", -1)

    def test_deterministic(self, tmp_path, rng):
        rows = [(f"u{rng.integers(30)}", f"i{rng.integers(20)}", int(rng.integers(100))) for _ in range(400)]
        p = write_tsv(tmp_path / "a.tsv", rows)
        g1, g2 = load_interactions(p, 3), load_interactions(p, 3)
        assert g1.user_keys == g2.user_keys and g1.item_keys == g2.item_keys
        assert np.array_equal(g1.items, g2.items)


class TestSplit:
    def test_last_twenty_percent(self):
        g = InteractionGraph.from_edges(1, 10, [0] * 10, list(range(10)), list(range(100, 0, -10)))
        tr, te = chronological_split(g, 0.2)
        # timestamps decrease with item index, so items 0 and 1 are the latest
        assert sorted(te.user_items(0).tolist()) == [0, 1]
        assert tr.edge_count == 8

    def test_minimum_one_test_edge(self):
        g = InteractionGraph.from_edges(1, 2, [0, 0], [0, 1], [1, 2])
        tr, te = chronological_split(g, 0.2)
        assert te.user_items(0).tolist() == [1]
        assert tr.user_items(0).tolist() == [0]

    def test_ties_follow_input_order(self):
        g = InteractionGraph.from_edges(1, 5, [0] * 5, [3, 1, 4, 0, 2], [7] * 5)
        tr, te = chronological_split(g, 0.4)
        assert te.user_items(0).tolist() == [0, 2]
        assert tr.user_items(0).tolist() == [3, 1, 4]

    def test_bad_fraction(self, small_powerlaw):
        for f in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                chronological_split(small_powerlaw, f)

    def test_user_with_single_edge_rejected(self):
        g = InteractionGraph.from_edges(2, 3, [0, 0, 1], [0, 1, 2])
        with pytest.raises(ValueError, match="at least 2"):
            chronological_split(g, 0.2)

    def test_test_edge_absent_from_train(self, small_powerlaw):
        tr, te = chronological_split(small_powerlaw, 0.2)
        for u, i in te.edge_array()[:200]:
            assert not contains_edge(tr, int(u), int(i))
            assert contains_edge(te, int(u), int(i))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10**6), frac=st.floats(0.05, 0.95))
    def test_partition(self, seed, frac):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, int(rng.integers(2, 40)), int(rng.integers(3, 60)))
        tr, te = chronological_split(g, frac)
        a, b = tr.edge_set(), te.edge_set()
        assert not a & b
        assert a | b == g.edge_set()
        assert tr.n_items == te.n_items == g.n_items

    def test_partition_exhaustive_large(self):
        g = synthetic_powerlaw(600, 400, 10_000, seed=1)
        tr, te = chronological_split(g, 0.2)
        a, b = tr.edge_set(), te.edge_set()
        assert not a & b and a | b == g.edge_set()

    def test_round_trip(self, tmp_path, small_powerlaw):
        tr, te = chronological_split(small_powerlaw, 0.2)
        save_split(tr, te, tmp_path)
        tr2, te2 = load_split(tmp_path)
        assert tr2.edge_set() == tr.edge_set() and te2.edge_set() == te.edge_set()
        assert np.array_equal(tr2.items, tr.items)


class TestGraph:
    def test_contains_edge(self):
        g = InteractionGraph.from_edges(2, 3, [0, 1], [2, 0])
        assert contains_edge(g, 0, 2)
        assert not contains_edge(g, 0, 0)
        with pytest.raises(ValueError):
            contains_edge(g, 2, 0)
        with pytest.raises(ValueError):
            contains_edge(g, 0, -1)

    def test_duplicate_edges_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            InteractionGraph.from_edges(1, 2, [0, 0], [1, 1])

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_degree_conservation(self, seed):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, int(rng.integers(1, 30)), int(rng.integers(3, 30)))
        assert g.item_degree.sum() == g.edge_count == g.user_degree.sum()

    def test_index_map_round_trip(self, tmp_path):
        write_index_map(["a", "b", "c"], tmp_path / "m.idx")
        assert read_index_map(tmp_path / "m.idx") == {"a": 0, "b": 1, "c": 2}

    def test_synthetic_is_splittable(self):
        g = synthetic_powerlaw(1000, 800, 40_000, alpha=1.0, seed=0)
        assert g.edge_count == 40_000
        assert g.user_degree.min() >= 2
        assert g.user_degree.max() < g.n_items
        # heavy tail: top 10% of items hold far more than 10% of edges
        top = np.sort(g.item_degree)[::-1][: g.n_items // 10].sum()
        assert top > 0.25 * g.edge_count
