from fractions import Fraction

import numpy as np
import pytest

from dirichlet_flows import (
    DirichletWeights,
    Environment,
    IterationCapExceeded,
    divergence,
    edge_occupation,
    enumerate_spanning_trees,
    green_function,
    loop_erase,
    mc_estimate_rhs,
    mc_laplace,
    sample_environment,
    simulate_chain,
    simulate_chains,
    survival_determinant,
    tree_probability,
    wilson_sample_tree,
    wilson_sample_trees,
)
from dirichlet_flows import environment as env_mod
from dirichlet_flows.combinatorics import SpanningTree

from conftest import bundled_graphs, random_graphs, random_rational_environment

HALVES = {eid: Fraction(1, 2) for eid in ("e1", "e2", "e3", "e4")}


def tree_of(*edges, directed=True):
    return SpanningTree(frozenset(edges), directed)


def test_weights_positive(two_edge):
    with pytest.raises(ValueError):
        DirichletWeights({"e1": Fraction(0), "e2": Fraction(1)})
    w = DirichletWeights.from_graph(two_edge)
    assert w.beta(two_edge) == {"x0": 2}


def test_sampling_deterministic(triangle):
    w = DirichletWeights.from_graph(triangle)
    a = sample_environment(triangle, w, seed=9)
    b = sample_environment(triangle, w, seed=9)
    assert a.p == b.p
    c = sample_environment(triangle, w, seed=10)
    assert a.p != c.p


def test_single_out_edge_probability_one(chain):
    w = DirichletWeights.from_graph(chain)
    env = sample_environment(chain, w, seed=0)
    assert env.p["e1"] == 1.0 and env.p["e2"] == 1.0


def test_dirichlet_moments_symmetric(two_edge):
    w = DirichletWeights.from_graph(two_edge)  # alpha = (1, 1)
    p = env_mod.sample_environment_batch(two_edge, w, 100_000, seed=3)[:, 0]
    stderr = p.std(ddof=1) / np.sqrt(len(p))
    assert abs(p.mean() - 0.5) < 3 * stderr


def test_dirichlet_moments_asymmetric(two_edge):
    w = DirichletWeights.from_graph(two_edge, {"e1": 2})  # alpha = (2, 1)
    p = env_mod.sample_environment_batch(two_edge, w, 100_000, seed=4)[:, 0]
    stderr = p.std(ddof=1) / np.sqrt(len(p))
    assert abs(p.mean() - 2 / 3) < 3 * stderr


def test_green_function_values(two_edge, triangle, chain):
    g1 = green_function(two_edge, Environment({"e1": 0.5, "e2": 0.5}))
    assert g1.shape == (1, 1) and g1[0, 0] == 1.0
    g2 = green_function(triangle, Environment(HALVES))
    assert abs(g2[0, 0] - 4 / 3) < 1e-14
    g3 = green_function(chain, Environment({"e1": 1.0, "e2": 1.0}))
    assert np.allclose(g3, [[1.0, 1.0], [0.0, 1.0]])  # one visit to x0 and to a


def test_edge_occupation_values(two_edge, triangle):
    env = Environment({"e1": Fraction(3, 10), "e2": Fraction(7, 10)})
    z = edge_occupation(two_edge, env)
    assert z["e1"] == Fraction(3, 10) and z["e2"] == Fraction(7, 10)
    z = edge_occupation(triangle, Environment(HALVES))
    assert z.z == {"e1": Fraction(2, 3), "e2": Fraction(1, 3),
                   "e3": Fraction(2, 3), "e4": Fraction(1, 3)}


def test_edge_occupation_is_unit_flow():
    rng = np.random.default_rng(17)
    for g in bundled_graphs() + random_graphs(seed=18, count=6):
        env = random_rational_environment(g, rng)
        z = edge_occupation(g, env)
        assert all(v > 0 for v in z.z.values())
        assert divergence(g, z.z) == {x: (1 if x == g.base else 0) for x in g.interior}


def test_survival_determinant_triangle(triangle):
    assert survival_determinant(triangle, Environment(HALVES)) == Fraction(3, 4)


def test_survival_determinant_no_returns(chain):
    assert survival_determinant(chain, Environment({"e1": 1.0, "e2": 1.0})) == 1.0


def test_matrix_tree_identity_exact():
    rng = np.random.default_rng(23)
    for g in bundled_graphs() + random_graphs(seed=24, count=8):
        directed = enumerate_spanning_trees(g, directed_only=True)
        for _ in range(10):
            env = random_rational_environment(g, rng)
            det = survival_determinant(g, env)
            total = Fraction(0)
            for t in directed:
                prod = Fraction(1)
                for eid in t.edges:
                    prod *= env.p[eid]
                total += prod
            assert det == total


def test_tree_probabilities_sum_to_one(triangle):
    env = Environment(HALVES)
    trees = enumerate_spanning_trees(triangle, directed_only=True)
    probs = [tree_probability(triangle, env, t) for t in trees]
    assert probs == [Fraction(1, 3)] * 3
    assert sum(probs) == 1


def test_tree_probability_requires_directed(triangle):
    with pytest.raises(ValueError):
        tree_probability(triangle, Environment(HALVES), tree_of("e1", "e3", directed=False))


def test_tree_probability_two_edge(two_edge):
    env = Environment({"e1": Fraction(1, 4), "e2": Fraction(3, 4)})
    assert tree_probability(two_edge, env, tree_of("e1")) == Fraction(1, 4)
    assert tree_probability(two_edge, env, tree_of("e2")) == Fraction(3, 4)


def test_simulate_chain_deterministic_graph(chain):
    env = Environment({"e1": 1.0, "e2": 1.0})
    assert simulate_chain(chain, env, seed=0) == ["e1", "e2"]


def test_simulate_chain_crossings_match_occupation(triangle):
    env = Environment(HALVES)
    n = 40_000
    counts = {eid: 0 for eid in triangle.edge_ids}
    sq = {eid: 0 for eid in triangle.edge_ids}
    for traj in simulate_chains(triangle, env, n, seed=5):
        per = {eid: 0 for eid in triangle.edge_ids}
        for eid in traj:
            per[eid] += 1
        for eid, k in per.items():
            counts[eid] += k
            sq[eid] += k * k
    z = edge_occupation(triangle, env)
    for eid in triangle.edge_ids:
        mean = counts[eid] / n
        var = sq[eid] / n - mean**2
        stderr = np.sqrt(var / n)
        assert abs(mean - float(z[eid])) < 3.5 * stderr


def test_step_cap(chain, monkeypatch):
    monkeypatch.setattr(env_mod, "STEP_CAP", 1)
    env = Environment({"e1": 1.0, "e2": 1.0})
    with pytest.raises(IterationCapExceeded):
        simulate_chain(chain, env, seed=0)


def test_loop_erase_hand_case(triangle):
    # x0 -> a -> x0 -> a -> delta: the x0-a-x0 excursion vanishes
    assert loop_erase(triangle, ["e1", "e2", "e1", "e4"]) == ["e1", "e4"]
    assert loop_erase(triangle, ["e3"]) == ["e3"]


def test_wilson_chain_graph(chain):
    env = Environment({"e1": 1.0, "e2": 1.0})
    t = wilson_sample_tree(chain, env, seed=1)
    assert t.edges == frozenset({"e1", "e2"}) and t.directed


def test_wilson_deterministic(triangle):
    env = Environment(HALVES)
    a = wilson_sample_trees(triangle, env, 50, seed=6)
    b = wilson_sample_trees(triangle, env, 50, seed=6)
    assert a == b


def test_wilson_frequencies_rough(triangle):
    env = Environment(HALVES)
    n = 6000
    counts = {}
    for t in wilson_sample_trees(triangle, env, n, seed=7):
        counts[t.edges] = counts.get(t.edges, 0) + 1
    assert set(counts) == {t.edges for t in
                           enumerate_spanning_trees(triangle, directed_only=True)}
    for c in counts.values():
        assert abs(c / n - 1 / 3) < 0.025


def test_mc_estimate_rhs_symmetric_mean(two_edge):
    w = DirichletWeights.from_graph(two_edge)
    est = mc_estimate_rhs(two_edge, w, {"e1": 0.0, "e2": 0.0}, tree_of("e1"),
                          n=50_000, seed=8)
    assert abs(est.value - 0.5) < 3 * est.std_error


def test_mc_estimate_rhs_closed_form(two_edge):
    w = DirichletWeights.from_graph(two_edge)
    est = mc_estimate_rhs(two_edge, w, {"e1": 1.0, "e2": 0.0}, tree_of("e1"),
                          n=200_000, seed=9)
    assert abs(est.value - (1 - 2 / np.e)) < 3 * est.std_error


def test_mc_estimate_rhs_beta_moment(two_edge):
    w = DirichletWeights.from_graph(two_edge, {"e1": 5, "e2": 2})
    est = mc_estimate_rhs(two_edge, w, {"e1": 0.0, "e2": 0.0}, tree_of("e1"),
                          n=100_000, seed=10)
    assert abs(est.value - 5 / 7) < 3 * est.std_error


def test_mc_estimate_rejects_bad_input(two_edge):
    w = DirichletWeights.from_graph(two_edge)
    with pytest.raises(ValueError, match="negative"):
        mc_estimate_rhs(two_edge, w, {"e1": -1.0, "e2": 0.0}, tree_of("e1"), 10, 0)
    with pytest.raises(ValueError, match="directed"):
        mc_estimate_rhs(two_edge, w, {"e1": 1.0, "e2": 1.0},
                        tree_of("e1", directed=False), 10, 0)
    with pytest.raises(ValueError, match="samples"):
        mc_estimate_rhs(two_edge, w, {"e1": 1.0, "e2": 1.0}, tree_of("e1"), 0, 0)


def test_mc_laplace_normalization(triangle):
    w = DirichletWeights.from_graph(triangle)
    est = mc_laplace(triangle, w, {eid: 0.0 for eid in triangle.edge_ids}, 1000, seed=11)
    assert est.value == 1.0 and est.std_error == 0.0


def test_mc_laplace_two_edge_unit_rates(two_edge):
    w = DirichletWeights.from_graph(two_edge)
    est = mc_laplace(two_edge, w, {"e1": 1.0, "e2": 1.0}, 20_000, seed=12)
    assert abs(est.value - np.exp(-1)) < 1e-12  # z1 + z2 = 1 almost surely


def test_mc_laplace_equals_tree_sum(triangle):
    w = DirichletWeights.from_graph(triangle, {"e1": 2, "e4": Fraction(1, 2)})
    lam = {"e1": 1.0, "e2": 2.0, "e3": 3.0, "e4": 4.0}
    n, seed = 30_000, 13
    total = mc_laplace(triangle, w, lam, n, seed)
    acc = sum(mc_estimate_rhs(triangle, w, lam, t, n, seed).value
              for t in enumerate_spanning_trees(triangle, directed_only=True))
    assert abs(total.value - acc) <= 1e-12


def test_mc_bit_identical_per_seed(triangle):
    w = DirichletWeights.from_graph(triangle)
    lam = {eid: 1.0 for eid in triangle.edge_ids}
    a = mc_laplace(triangle, w, lam, 5000, seed=14)
    b = mc_laplace(triangle, w, lam, 5000, seed=14)
    assert a == b
