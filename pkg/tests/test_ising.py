import itertools
import math

import numpy as np
import pytest

from annealtrack import (CapacityError, DecodeMap, InputError, IsingProblem,
                         Schedule, WeightedGraph, decode_spins, encode_mwis,
                         ground_state_exhaustive, is_independent, ising_energy,
                         mwis_exact, schedule_eval, total_weight)
from conftest import brute_force_mwis, random_graph


def brute_force_ground(p: IsingProblem):
    """Test-side oracle: scan all spin assignments with itertools."""
    best_e, best_s = math.inf, None
    for spins in itertools.product([1, -1], repeat=p.n_spins):
        e = ising_energy(p, spins)
        if e < best_e - 1e-15:
            best_e, best_s = e, spins
    return np.array(best_s), best_e


class TestIsingProblem:
    def test_rejects_asymmetric(self):
        with pytest.raises(InputError):
            IsingProblem(2, np.zeros(2), np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_rejects_nonzero_diagonal(self):
        with pytest.raises(InputError):
            IsingProblem(1, np.zeros(1), np.array([[1.0]]))

    def test_json_roundtrip(self):
        p = IsingProblem(2, np.array([0.5, -1.0]),
                         np.array([[0.0, 2.0], [2.0, 0.0]]), offset=3.0)
        q = IsingProblem.from_json(p.to_json())
        assert q.n_spins == 2 and q.offset == 3.0
        assert np.array_equal(q.fields, p.fields)
        assert np.array_equal(q.couplings, p.couplings)


class TestEncodeMwis:
    def test_single_vertex(self):
        g = WeightedGraph.from_data([2.0])
        p, dmap = encode_mwis(g)
        assert p.fields[0] == -1.0 and not np.any(p.couplings)
        # evaluate both spin states: ground is s = +1, decoding to {0}
        assert ising_energy(p, [1]) < ising_energy(p, [-1])
        assert decode_spins([1], dmap) == frozenset({0})

    def test_edgeless(self):
        g = WeightedGraph.from_data([1.0, 3.0])
        p, _ = encode_mwis(g)
        assert not np.any(p.couplings)
        assert np.allclose(p.fields, [-0.5, -1.5])

    def test_single_edge_degenerate(self):
        g = WeightedGraph.from_data([1.0, 1.0], [(0, 1)])
        p, dmap = encode_mwis(g, penalty=2.0)
        assert p.couplings[0, 1] == 0.5
        assert np.allclose(p.fields, [0.0, 0.0])
        # enumerate the 4 spin states: both single-selection states are
        # ground, the double selection never is
        energies = {s: ising_energy(p, s) for s in
                    [(1, 1), (1, -1), (-1, 1), (-1, -1)]}
        ground = min(energies.values())
        grounds = {s for s, e in energies.items() if abs(e - ground) < 1e-12}
        assert grounds == {(1, -1), (-1, 1)}
        assert decode_spins([1, -1], dmap) == frozenset({0})
        assert decode_spins([-1, 1], dmap) == frozenset({1})

    def test_penalty_too_small(self):
        g = WeightedGraph.from_data([1.0, 2.0], [(0, 1)])
        with pytest.raises(InputError):
            encode_mwis(g, penalty=2.0)

    def test_nonpositive_weight_rejected(self):
        with pytest.raises(InputError):
            encode_mwis(WeightedGraph.from_data([1.0, 0.0]))

    def test_roundtrip_against_mwis(self, rng):
        for _ in range(25):
            n = int(rng.integers(1, 9))
            g = random_graph(rng, n)
            p, dmap = encode_mwis(g)
            spins, _ = ground_state_exhaustive(p)
            decoded = decode_spins(spins, dmap)
            _, w_opt = mwis_exact(g)
            assert is_independent(g, decoded)
            assert abs(total_weight(g, decoded) - w_opt) <= 1e-9

    def test_ground_energy_is_minus_optimal_weight(self):
        g = WeightedGraph.from_data([1.0, 5.0, 1.0], [(0, 1), (1, 2)])
        p, _ = encode_mwis(g)
        _, e0 = brute_force_ground(p)
        _, w_opt = mwis_exact(g)
        assert abs(e0 - (-w_opt)) <= 1e-9

    def test_penalty_sufficiency_randomized(self, rng):
        for _ in range(25):
            n = int(rng.integers(2, 9))
            g = random_graph(rng, n, p_edge=0.5)
            penalty = 2.0 * max(g.weights)
            p, dmap = encode_mwis(g, penalty=penalty)
            # every exhaustive ground state decodes to an independent set
            _, e0 = ground_state_exhaustive(p)
            for spins in itertools.product([1, -1], repeat=n):
                if abs(ising_energy(p, spins) - e0) <= 1e-9:
                    assert is_independent(g, decode_spins(np.array(spins), dmap))


class TestDecodeSpins:
    def test_all_unselected(self):
        dmap = DecodeMap((0, 1, 2))
        assert decode_spins([-1, -1, -1], dmap) == frozenset()

    def test_single_selected(self):
        dmap = DecodeMap((4, 7))
        assert decode_spins([-1, 1], dmap) == frozenset({7})

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            decode_spins([1], DecodeMap((0, 1)))


class TestIsingEnergy:
    def test_zero_problem(self):
        p = IsingProblem(3, np.zeros(3), np.zeros((3, 3)))
        assert ising_energy(p, [1, -1, 1]) == 0.0

    def test_single_coupling(self):
        p = IsingProblem(2, np.zeros(2), np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert ising_energy(p, [1, -1]) == -1.0

    def test_length_mismatch(self):
        p = IsingProblem(2, np.zeros(2), np.zeros((2, 2)))
        with pytest.raises(InputError):
            ising_energy(p, [1])


class TestGroundStateExhaustive:
    def test_single_spin(self):
        p = IsingProblem(1, np.array([-1.0]), np.zeros((1, 1)))
        spins, e = ground_state_exhaustive(p)
        assert spins[0] == 1 and e == -1.0

    def test_ferromagnetic_pair(self):
        p = IsingProblem(2, np.zeros(2), np.array([[0.0, -1.0], [-1.0, 0.0]]))
        spins, e = ground_state_exhaustive(p)
        assert spins[0] == spins[1] and e == -1.0

    def test_random_matches_bruteforce(self, rng):
        for _ in range(10):
            j = rng.normal(size=(10, 10))
            j = np.triu(j, 1)
            j = j + j.T
            p = IsingProblem(10, rng.normal(size=10), j)
            spins, e = ground_state_exhaustive(p)
            _, e_ref = brute_force_ground(p)
            assert abs(e - e_ref) <= 1e-9
            assert abs(ising_energy(p, spins) - e_ref) <= 1e-9

    def test_capacity(self):
        p = IsingProblem(25, np.zeros(25), np.zeros((25, 25)))
        with pytest.raises(CapacityError):
            ground_state_exhaustive(p)


class TestSchedule:
    def test_linear_boundaries(self):
        s = Schedule.linear(1.0)
        assert schedule_eval(s, 0.0) == (1.0, 0.0)
        assert schedule_eval(s, 1.0) == (0.0, 1.0)

    def test_smooth_midpoint(self):
        s = Schedule.smooth(2.0)
        f, h = schedule_eval(s, 1.0)
        assert abs(f - 0.5) < 1e-12 and abs(h - 0.5) < 1e-12

    def test_smooth_boundaries(self):
        s = Schedule.smooth(1.0)
        f0, h0 = schedule_eval(s, 0.0)
        f1, h1 = schedule_eval(s, 1.0)
        assert (f0, h0) == (1.0, 0.0)
        assert abs(f1) < 1e-30 and h1 == 1.0

    def test_monotone(self):
        for s in (Schedule.linear(1.0), Schedule.smooth(1.0)):
            t = np.linspace(0, 1, 101)
            f, h = s.evaluate(t)
            assert np.all(np.diff(f) <= 1e-15)
            assert np.all(np.diff(h) >= -1e-15)

    def test_out_of_range(self):
        s = Schedule.linear(1.0)
        with pytest.raises(InputError):
            schedule_eval(s, 1.5)
        with pytest.raises(InputError):
            schedule_eval(s, -0.1)
