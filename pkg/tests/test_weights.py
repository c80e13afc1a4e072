import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from vins.interactions import InteractionGraph
from vins.weights import (DegreeWeights, build_weights, imbalance_value, imbalance_values, sample_item,
                          sample_items)

from conftest import random_graph


def graph_with_degrees(degrees):
    """One user per edge so item degrees are exactly ``degrees``."""
    items = np.repeat(np.arange(len(degrees)), degrees)
    return InteractionGraph.from_edges(len(items), len(degrees), np.arange(len(items)), items)


class TestBuild:
    def test_beta_zero_uniform(self):
        w = build_weights(graph_with_degrees([1, 2, 4]), 0.0)
        assert w.pi.tolist() == [1, 1, 1]
        assert w.normalizer == 3

    def test_beta_one(self):
        w = build_weights(graph_with_degrees([1, 2, 4]), 1.0)
        np.testing.assert_allclose(w.pi, [1, 2, 4], rtol=1e-15)
        assert w.normalizer == pytest.approx(7, rel=1e-15)

    def test_beta_half(self):
        w = build_weights(graph_with_degrees([4, 4]), 0.5)
        np.testing.assert_allclose(w.pi, [2, 2], rtol=1e-15)
        np.testing.assert_allclose(w.probabilities, [0.5, 0.5])

    @pytest.mark.parametrize("beta", [-0.1, 1.01])
    def test_beta_range(self, beta):
        with pytest.raises(ValueError):
            build_weights(graph_with_degrees([1, 2]), beta)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10**6), beta=st.floats(0, 1))
    def test_normalized(self, seed, beta):
        rng = np.random.default_rng(seed)
        w = build_weights(random_graph(rng, 20, int(rng.integers(3, 80))), beta)
        assert abs(w.probabilities.sum() - 1.0) < 1e-12
        assert np.all(np.diff(w.cumulative) >= 0)
        assert w.cumulative[-1] == w.normalizer


class TestSample:
    def test_uniform_frequencies(self):
        w = build_weights(graph_with_degrees([3, 1, 7, 2]), 0.0)
        rng = np.random.default_rng(0)
        draws = np.array([sample_item(w, rng) for _ in range(1_000_000)])
        freq = np.bincount(draws, minlength=4) / len(draws)
        np.testing.assert_allclose(freq, 0.25, atol=0.005)

    def test_degree_frequencies(self):
        w = build_weights(graph_with_degrees([1, 3]), 1.0)
        rng = np.random.default_rng(1)
        draws = np.array([sample_item(w, rng) for _ in range(1_000_000)])
        freq = np.bincount(draws, minlength=2) / len(draws)
        np.testing.assert_allclose(freq, [0.25, 0.75], atol=0.005)

    def test_single_item(self, rng):
        w = build_weights(graph_with_degrees([5]), 0.7)
        assert {sample_item(w, rng) for _ in range(100)} == {0}

    def test_batch_matches_single_draws(self):
        w = DegreeWeights.from_pi([1.0, 0.5, 3.0])
        a = sample_items(w, np.random.default_rng(9), 500)
        rng = np.random.default_rng(9)
        assert a.tolist() == [sample_item(w, rng) for _ in range(500)]

    def test_zero_weight_never_drawn(self, rng):
        w = DegreeWeights.from_pi([0.0, 2.0, 0.0, 1.0, 0.0])
        draws = {sample_item(w, rng) for _ in range(20_000)}
        assert draws == {1, 3}

    @pytest.mark.parametrize("n_items", [5, 37, 100])
    def test_chi_square(self, n_items):
        rng = np.random.default_rng(n_items)
        pi = rng.uniform(0.1, 5.0, n_items)
        w = DegreeWeights.from_pi(pi)
        draws = sample_items(w, rng, 1_000_000)
        obs = np.bincount(draws, minlength=n_items)
        assert stats.chisquare(obs, w.probabilities * len(draws)).pvalue > 0.001


class TestImbalance:
    def test_beta_one_value(self):
        # |E| = 10, d_i = 5, beta = 1: IV = Z_w / (|E| - d_i) = 10 / 5
        g = graph_with_degrees([5, 3, 2])
        assert imbalance_value(build_weights(g, 1.0), g, 0) == pytest.approx(2.0)

    def test_beta_zero_value(self):
        g = graph_with_degrees([2, 3, 4, 1])
        assert imbalance_value(build_weights(g, 0.0), g, 0) == pytest.approx(1.0)

    def test_brute_force_ratio(self):
        # IV = d_i / (p(i) * (|E| - d_i)) evaluated directly
        g = graph_with_degrees([1, 4, 9, 2])
        w = build_weights(g, 0.3)
        for i, d in enumerate([1, 4, 9, 2]):
            p = d ** 0.3 / sum(x ** 0.3 for x in [1, 4, 9, 2])
            assert imbalance_value(w, g, i) == pytest.approx(d / (p * (16 - d)), rel=1e-12)

    def test_degenerate(self):
        g = graph_with_degrees([4])
        with pytest.raises(ValueError):
            imbalance_value(build_weights(g, 0.5), g, 0)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10**6), beta=st.sampled_from([0, 0.25, 0.5, 0.75, 1]))
    def test_monotone_in_degree(self, seed, beta):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, 30, int(rng.integers(3, 50)))
        iv = imbalance_values(build_weights(g, beta), g)
        d = g.item_degree
        hi = d[:, None] > d[None, :]
        assert np.all((iv[:, None] > iv[None, :])[hi])
        assert d[np.argmax(iv)] == d.max() and d[np.argmin(iv)] == d.min()
