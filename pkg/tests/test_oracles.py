import networkx as nx
import numpy as np
import pytest

from robustlp.errors import Infeasible
from robustlp.flow import FlowInstance
from robustlp.ipm import LpInstance
from robustlp.lpapps import MdpInstance
from robustlp.oracles import (dense_lewis, dense_scores, dinic_maxflow, enumerate_l1,
                              enumerate_lp, mincut_enumeration, policy_value, ssp_mincost,
                              value_iteration)

from conftest import dense_to_sparse


def test_ssp_examples():
    diamond = FlowInstance(4, [0, 0, 1, 2], [1, 2, 3, 3], [1, 1, 1, 1], [1, 2, 1, 1], 0, 3, 2)
    assert ssp_mincost(diamond).value == 5
    assert ssp_mincost(FlowInstance(2, [0], [1], [4], [3], 0, 1, 4)).value == 12
    assert ssp_mincost(FlowInstance(3, [0, 1], [1, 2], [2, 2], [0, 0], 0, 2, 2)).value == 0
    with pytest.raises(Infeasible):
        ssp_mincost(FlowInstance(2, [0], [1], [1], [1], 0, 1, 2))


def test_ssp_matches_networkx(rng):
    for _ in range(20):
        n = int(rng.integers(3, 8))
        m = int(rng.integers(n, 15))
        tails, heads = rng.integers(0, n, m), rng.integers(0, n, m)
        keep = tails != heads
        tails, heads = tails[keep], heads[keep]
        cap, cost = rng.integers(1, 6, tails.size), rng.integers(0, 6, tails.size)
        F = int(rng.integers(1, 5))
        G = nx.MultiDiGraph()
        G.add_nodes_from(range(n))
        G.nodes[0]["demand"], G.nodes[n - 1]["demand"] = -F, F
        for a, b, u, c in zip(tails, heads, cap, cost):
            G.add_edge(int(a), int(b), capacity=int(u), weight=int(c))
        inst = FlowInstance(n, tails, heads, cap, cost, 0, n - 1, F)
        try:
            ref = nx.min_cost_flow_cost(G)
        except nx.NetworkXUnfeasible:
            with pytest.raises(Infeasible):
                ssp_mincost(inst)
            continue
        assert ssp_mincost(inst).value == ref


def test_dinic_examples_and_cuts(rng):
    assert dinic_maxflow(4, [0, 1, 0, 2], [1, 3, 2, 3], [3, 3, 2, 2], 0, 3).value == 5
    assert dinic_maxflow(4, [0, 2], [1, 3], [5, 5], 0, 3).value == 0
    for _ in range(20):
        n = int(rng.integers(2, 9))
        m = int(rng.integers(1, 16))
        t, h, c = rng.integers(0, n, m), rng.integers(0, n, m), rng.integers(0, 7, m)
        assert dinic_maxflow(n, t, h, c, 0, n - 1).value == mincut_enumeration(n, t, h, c, 0, n - 1)


def test_enumerate_lp():
    box = LpInstance(dense_to_sparse([[1.0], [1.0]]), [1.0], [1.0, 0.0], [0, 0], [1, 1])
    assert enumerate_lp(box).value == 0
    bad = LpInstance(dense_to_sparse([[1.0], [1.0]]), [3.0], [1.0, 0.0], [0, 0], [1, 1])
    with pytest.raises(Infeasible):
        enumerate_lp(bad)


def test_enumerate_lp_agrees_with_ssp_on_flows(rng):
    for _ in range(5):
        n = 4
        tails = np.array([0, 0, 1, 2, 1, 2])
        heads = np.array([1, 2, 3, 3, 2, 1])
        cap = rng.integers(1, 4, 6)
        cost = rng.integers(-3, 4, 6)
        F = int(rng.integers(1, 3))
        inst = FlowInstance(n, tails, heads, cap, cost, 0, 3, F)
        try:
            ref = ssp_mincost(inst).value
        except Infeasible:
            continue
        # drop vertex 0's row to make the incidence matrix full rank
        B = inst.incidence().toarray()[:, 1:]
        lp = LpInstance(dense_to_sparse(B), inst.demand()[1:], cost.astype(float),
                        np.zeros(6), cap.astype(float))
        assert abs(enumerate_lp(lp).value - ref) < 1e-9


def test_enumerate_l1():
    r = enumerate_l1(np.ones((3, 1)), [-1, -2, -4])
    assert abs(r.value - 3) < 1e-12 and abs(r.witness[0] - 2) < 1e-12
    A = np.array([[1.0, 0], [0, 1], [1, 1]])
    assert enumerate_l1(A, -A @ [2.0, -1.0]).value < 1e-12


def test_value_iteration():
    one = MdpInstance([[1.0, 0.0]], [[[1.0], [1.0]]], 0.9)
    assert abs(value_iteration(one).value - 10) < 1e-9
    P = np.full((2, 2, 2), 0.5)
    flat = MdpInstance(np.full((2, 2), 0.3), P, 0.8)
    assert np.allclose(value_iteration(flat).witness, 0.3 / 0.2)
    assert np.allclose(policy_value(flat, [0, 1]), 1.5)


def test_dense_score_oracles():
    assert np.allclose(dense_scores(np.eye(3), np.ones(3)).witness, 1)
    M = np.array([[1.0, 0], [0, 1], [1, 1]])
    assert np.allclose(dense_scores(M, np.ones(3)).witness, 2 / 3)
    z = np.full(3, 0.5)
    assert np.allclose(dense_lewis(M, np.ones(3), z, 2.0).witness, 2 / 3 + 0.5)
