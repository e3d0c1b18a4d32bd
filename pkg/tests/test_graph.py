import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annealtrack import (CapacityError, InputError, WeightedGraph,
                         drop_nonpositive, is_independent, mwis_exact,
                         total_weight)
from conftest import brute_force_mwis, random_graph


def path3(weights=(1.0, 5.0, 1.0)):
    return WeightedGraph.from_data(weights, [(0, 1), (1, 2)])


def triangle(weights=(3.0, 2.0, 2.0)):
    return WeightedGraph.from_data(weights, [(0, 1), (1, 2), (0, 2)])


class TestConstruction:
    def test_rejects_self_loop(self):
        with pytest.raises(InputError):
            WeightedGraph.from_data([1.0, 1.0], [(0, 0)])

    def test_rejects_out_of_range_edge(self):
        with pytest.raises(InputError):
            WeightedGraph.from_data([1.0, 1.0], [(0, 2)])

    def test_rejects_nonfinite_weight(self):
        with pytest.raises(InputError):
            WeightedGraph.from_data([1.0, float("nan")])

    def test_edges_normalized(self):
        g = WeightedGraph.from_data([1, 1, 1], [(2, 0), (0, 2)])
        assert g.edges == frozenset({(0, 2)})


class TestIsIndependent:
    def test_empty_set(self):
        assert is_independent(path3(), set())

    def test_nonadjacent_pair(self):
        assert is_independent(path3(), {0, 2})

    def test_edge_present(self):
        assert not is_independent(triangle(), {0, 1})

    def test_out_of_range_vertex(self):
        with pytest.raises(InputError):
            is_independent(path3(), {7})


class TestTotalWeight:
    def test_single(self):
        assert total_weight(path3(), {1}) == 5.0

    def test_pair(self):
        g = WeightedGraph.from_data([2.0, 3.0])
        assert total_weight(g, {0, 1}) == 5.0

    def test_empty(self):
        assert total_weight(triangle(), set()) == 0.0


class TestDropNonpositive:
    def test_removal_forced(self):
        g = WeightedGraph.from_data([-1.0, 4.0], [(0, 1)])
        sub, idx = drop_nonpositive(g)
        assert sub.n == 1 and sub.weights == (4.0,) and sub.edges == frozenset()
        assert idx == (1,)

    def test_identity(self):
        g = path3()
        sub, idx = drop_nonpositive(g)
        assert sub == g and idx == (0, 1, 2)

    def test_all_dropped(self):
        g = WeightedGraph.from_data([-1.0, 0.0])
        sub, idx = drop_nonpositive(g)
        assert sub.n == 0 and idx == ()


class TestMwisExact:
    def test_path3(self):
        assert mwis_exact(path3()) == (frozenset({1}), 5.0)

    def test_edgeless(self):
        g = WeightedGraph.from_data([2.0, 3.0])
        assert mwis_exact(g) == (frozenset({0, 1}), 5.0)

    def test_triangle(self):
        assert mwis_exact(triangle()) == (frozenset({0}), 3.0)

    def test_requires_positive_weights(self):
        with pytest.raises(InputError):
            mwis_exact(WeightedGraph.from_data([1.0, -1.0]))

    def test_capacity(self):
        g = WeightedGraph.from_data(np.ones(25))
        with pytest.raises(CapacityError):
            mwis_exact(g, method="exhaustive")
        with pytest.raises(CapacityError):
            mwis_exact(g, max_n=24)

    def test_lex_tie_break(self):
        # {0, 3} and {1, 2} both weigh 2; (0, 3) is lexicographically first.
        g = WeightedGraph.from_data([1, 1, 1, 1],
                                    [(0, 1), (0, 2), (1, 3), (2, 3)])
        sel, w = mwis_exact(g)
        assert sel == frozenset({0, 3}) and w == 2.0
        sel_e, w_e = mwis_exact(g, method="exhaustive")
        assert sel_e == sel and w_e == w

    def test_matches_bruteforce_randomized(self, rng):
        for trial in range(60):
            n = int(rng.integers(1, 13))
            g = random_graph(rng, n)
            sel_bb, w_bb = mwis_exact(g)
            sel_ex, w_ex = mwis_exact(g, method="exhaustive")
            sel_ref, w_ref = brute_force_mwis(g)
            assert abs(w_bb - w_ref) <= 1e-9
            assert abs(w_ex - w_ref) <= 1e-9
            assert sel_bb == sel_ref == sel_ex
            assert is_independent(g, sel_bb)

    def test_nonpositive_vertex_never_helps(self, rng):
        for trial in range(20):
            n = int(rng.integers(2, 10))
            g = random_graph(rng, n)
            _, w = mwis_exact(g)
            weights = list(g.weights) + [-abs(rng.normal())]
            edges = set(g.edges)
            edges.add((int(rng.integers(0, n)), n))
            g2 = WeightedGraph.from_data(weights, edges)
            sub, idx = drop_nonpositive(g2)
            _, w2 = mwis_exact(sub)
            assert abs(w2 - w) <= 1e-9

    def test_monotone_under_edge_removal(self, rng):
        for trial in range(20):
            g = random_graph(rng, 9, p_edge=0.5)
            if not g.edges:
                continue
            _, w = mwis_exact(g)
            edges = sorted(g.edges)
            drop = edges[int(rng.integers(0, len(edges)))]
            g2 = WeightedGraph.from_data(g.weights, set(g.edges) - {drop})
            _, w2 = mwis_exact(g2)
            assert w2 >= w - 1e-12


@given(st.lists(st.floats(min_value=0.01, max_value=10.0), min_size=1, max_size=8),
       st.data())
@settings(max_examples=60, deadline=None)
def test_selected_weight_never_exceeds_optimum(weights, data):
    n = len(weights)
    possible = [(i, j) for i in range(n) for j in range(i + 1, n)]
    edges = data.draw(st.lists(st.sampled_from(possible), max_size=12,
                               unique=True)) if possible else []
    g = WeightedGraph.from_data(weights, edges)
    _, w_opt = mwis_exact(g)
    subset = data.draw(st.lists(st.integers(0, n - 1), max_size=n, unique=True))
    if is_independent(g, subset):
        assert total_weight(g, subset) <= w_opt + 1e-9


class TestSerialization:
    def test_json_roundtrip(self):
        g = triangle()
        assert WeightedGraph.from_json(g.to_json()) == g

    def test_dimacs(self):
        text = "c comment\np edge 3 2\nn 1 1.0\nn 2 5.0\nn 3 1.0\ne 1 2\ne 2 3\n"
        g = WeightedGraph.from_dimacs(text)
        assert g == path3()

    def test_dimacs_bad_line_reports_position(self):
        with pytest.raises(InputError, match="line 2"):
            WeightedGraph.from_dimacs("p edge 2 1\ne 1 x\n")

    def test_json_error_reports_line(self):
        with pytest.raises(InputError, match="line"):
            WeightedGraph.from_json('{"n": 2,\n "weights": [1, 2\n}')
