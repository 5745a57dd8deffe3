import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import cloud_network, random_network
from gwbcm.blowup import blowup_multi, blowup_pair, validate_alignment
from gwbcm.errors import BlowupTooLarge, EmptySupport, MarginalMismatch
from gwbcm.gw import GwSolverConfig, gw_distance
from gwbcm.network import Network, gw_objective, validate_network, weighted_trace
from oracles import random_plan

POINT = validate_network([[3.0]], [1.0])
PAIR = Network.uniform([[3.0, 3.0], [3.0, 3.0]])


def _identity_cost(al, s=0):
    D = al.templates_b[s] - al.reference_b
    return weighted_trace(D, D, al.q_b)


class TestPair:
    def test_one_point_against_two(self):
        al = blowup_pair(POINT, PAIR, np.array([[0.5, 0.5]]))
        assert al.size_b == 2
        assert np.allclose(al.q_b, [0.5, 0.5])
        assert np.array_equal(al.templates_b[0], [[3, 3], [3, 3]])
        assert np.array_equal(al.reference_b, PAIR.weights)

    def test_self_coupling(self, rng):
        X = random_network(rng, 5)
        al = blowup_pair(X, X, np.diag(X.masses))
        assert al.size_b == 5
        assert np.allclose(al.q_b, X.masses)
        assert np.array_equal(al.templates_b[0], X.weights)
        assert np.array_equal(al.reference_b, X.weights)

    def test_cost_matches_solver(self, rng):
        X, Y = random_network(rng, 3), random_network(rng, 4)
        res = gw_distance(X, Y, GwSolverConfig(restarts=5))
        al = blowup_pair(X, Y, res.coupling)
        assert abs(_identity_cost(al) - res.cost) <= 1e-8 * max(res.cost, 1e-12)

    @given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
    def test_preserves_objective_for_any_plan(self, n, m, seed):
        r = np.random.default_rng(seed)
        X, Y = random_network(r, n, symmetric=False), random_network(r, m, symmetric=False)
        P = random_plan(X.masses, Y.masses, r)
        al = blowup_pair(X, Y, P, support_tol=0.0)
        ref = gw_objective(X, Y, P)
        assert abs(_identity_cost(al) - ref) <= 1e-8 * max(abs(ref), 1.0)
        rows, cols = al.index_maps[0], al.reference_map
        assert np.array_equal(al.templates_b[0], X.weights[np.ix_(rows, rows)])
        assert np.array_equal(al.reference_b, Y.weights[np.ix_(cols, cols)])
        assert abs(al.q_b.sum() - 1) <= 1e-9 and np.all(al.q_b > 0)

    def test_row_major_order(self):
        X = Network.uniform([[0, 1], [1, 0]])
        al = blowup_pair(X, X, np.array([[0.25, 0.25], [0.25, 0.25]]))
        assert al.index_maps[0].tolist() == [0, 0, 1, 1]
        assert al.reference_map.tolist() == [0, 1, 0, 1]

    def test_empty_support(self):
        with pytest.raises(EmptySupport):
            blowup_pair(POINT, PAIR, np.array([[0.5, 0.5]]), support_tol=2.0)

    def test_infeasible_plan(self):
        with pytest.raises(MarginalMismatch):
            blowup_pair(POINT, PAIR, np.array([[0.2, 0.5]]))

    def test_size_cap(self):
        X = Network.uniform(np.zeros((4, 4)))
        with pytest.raises(BlowupTooLarge):
            blowup_pair(X, X, np.full((4, 4), 1 / 16), max_size=10)


class TestMulti:
    def test_self_case(self, rng):
        Y = cloud_network(rng, 6)
        al = blowup_multi([Y], Y)
        assert al.size_b == 6
        assert np.allclose(al.q_b, Y.masses)
        assert np.allclose(al.templates_b[0], al.reference_b)
        assert _identity_cost(al) <= 1e-12

    def test_one_point_template(self):
        al = blowup_multi([POINT], PAIR)
        assert al.size_b == 2
        assert np.array_equal(al.templates_b[0], [[3, 3], [3, 3]])

    def test_duplicate_templates_of_reference(self, rng):
        Y = cloud_network(rng, 6)
        al = blowup_multi([Y, Y], Y)
        assert np.array_equal(al.templates_b[0], al.templates_b[1])
        assert np.array_equal(al.templates_b[0], al.reference_b)

    def test_invariants(self, rng):
        templates = [cloud_network(rng, n) for n in (4, 5, 6)]
        Y = cloud_network(rng, 5)
        al = blowup_multi(templates, Y, GwSolverConfig(restarts=3))
        validate_alignment(al)
        assert al.size_b >= 6
        assert np.array_equal(al.reference_b, Y.weights[np.ix_(al.reference_map, al.reference_map)])
        for s, X in enumerate(templates):
            m = al.index_maps[s]
            assert np.array_equal(al.templates_b[s], X.weights[np.ix_(m, m)])
            cost = _identity_cost(al, s)
            assert abs(cost - al.costs[s]) <= 1e-8 * max(al.costs[s], 1e-12)
