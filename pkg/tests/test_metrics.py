import io
import json
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from valproj import metrics as M

from conftest import make_network, random_network
from oracles import barrat_direct, floyd_warshall, onnela_direct

TRI = [("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 1.0)]
PATH = [("a", "b", 1.0), ("b", "c", 1.0)]


def star(leaves=4, w=1.0):
    return make_network([("hub", f"l{i}", w) for i in range(leaves)])


# -- density / components ---------------------------------------------------------

def test_density_examples():
    assert M.density(make_network(TRI)) == 1.0
    assert M.density(make_network([], nodes=["a", "b", "c"])) == 0.0
    five = make_network([("a", "b", 1.0), ("b", "c", 1.0), ("c", "d", 1.0), ("d", "e", 1.0)])
    assert M.density(five) == 0.4
    with pytest.raises(ValueError):
        M.density(make_network([], nodes=["a"]))


def test_components_examples():
    c = M.components(make_network([], nodes=list("abcd")))
    assert c.count == 4 and c.sizes == (1, 1, 1, 1)
    p5 = make_network([(str(i), str(i + 1), 1.0) for i in range(4)])
    c = M.components(p5)
    assert c.count == 1 and c.sizes == (5,)


# -- distances ------------------------------------------------------------------------

def test_reciprocal_distance():
    d = M.shortest_paths(make_network([("a", "b", 2.0)]))
    assert d[0, 1] == 0.5 and d[0, 0] == 0.0


def test_two_hop_beats_weak_direct_edge():
    net = make_network([("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 0.4)])
    d = M.shortest_paths(net)
    assert d[0, 2] == 2.0


def test_unreachable_is_infinite():
    d = M.shortest_paths(make_network([("a", "b", 1.0)], nodes=["a", "b", "c"]))
    assert math.isinf(d[0, 2])


def test_dijkstra_matches_floyd_warshall():
    rng = np.random.default_rng(1)
    for _ in range(20):
        net = random_network(rng, int(rng.integers(2, 25)), p=0.3, weights=[0.25, 0.5, 1.0, 2.0, 4.0])
        assert np.array_equal(M.shortest_paths(net), floyd_warshall(M.edge_lengths(net)))


def test_avg_shortest_path_examples():
    assert M.avg_shortest_path(make_network([("a", "b", 1.0)])) == 1.0
    assert M.avg_shortest_path(make_network(TRI)) == 1.0
    assert M.avg_shortest_path(make_network(PATH)) == pytest.approx(4 / 3, abs=1e-15)
    with pytest.raises(ValueError):
        M.avg_shortest_path(make_network([], nodes=["a", "b"]))


def test_complete_graph_oracle():
    rng = np.random.default_rng(4)
    nodes = [f"n{i}" for i in range(7)]
    edges = [(a, b, float(rng.uniform(0.2, 5))) for i, a in enumerate(nodes) for b in nodes[i + 1:]]
    net = make_network(edges)
    assert np.all(M.local_clustering(net, "unweighted") == 1.0)
    d = floyd_warshall(M.edge_lengths(net))
    assert M.avg_shortest_path(net) == pytest.approx(d[np.triu_indices(7, 1)].mean(), rel=1e-14)


# -- clustering ---------------------------------------------------------------------------

def test_triangle_and_path_global():
    for weighted in (False, True):
        assert M.global_clustering(make_network(TRI), weighted) == 1.0
        assert M.global_clustering(make_network(PATH), weighted) == 0.0
    with pytest.raises(ValueError):
        M.global_clustering(make_network([("a", "b", 1.0)]))


def test_equal_weights_global_matches_transitivity():
    rng = np.random.default_rng(9)
    for _ in range(30):
        net = random_network(rng, 12, p=0.35, weights="equal").scaled(2.5)
        try:
            uw = M.global_clustering(net, False)
        except ValueError:
            continue
        assert abs(M.global_clustering(net, True) - uw) <= 1e-12
        g = nx.from_numpy_array(net.adjacency)
        assert uw == pytest.approx(nx.transitivity(g), abs=1e-12)


def test_triangle_all_variants_one():
    for v in M.CLUSTERING_VARIANTS:
        assert M.local_clustering(make_network([(a, b, 3.0) for a, b, _ in TRI]), v).tolist() == [1.0, 1.0, 1.0]


def test_star_center_zero():
    for v in M.CLUSTERING_VARIANTS:
        assert np.all(M.local_clustering(star(), v) == 0.0)


def test_weighted_triangle_by_hand():
    net = make_network([("a", "b", 1.0), ("a", "c", 2.0), ("b", "c", 4.0)])
    on = M.local_clustering(net, "onnela")
    # every node sees the single triangle with intensity (1*2*4 / 4^3)^(1/3) = 1/2
    np.testing.assert_allclose(on, [0.5, 0.5, 0.5], rtol=1e-15)
    ba = M.local_clustering(net, "barrat")
    # node a: both links (1, 2) close the triangle, normalised by s(k-1) = 3
    assert ba[0] == pytest.approx(1.0, abs=1e-15)
    assert onnela_direct(net.weights.tolist()) == pytest.approx(on.tolist(), abs=1e-15)


def test_variants_match_loops_and_networkx():
    rng = np.random.default_rng(21)
    for _ in range(15):
        net = random_network(rng, 15, p=0.4)
        w = net.weights.tolist()
        np.testing.assert_allclose(M.local_clustering(net, "onnela"), onnela_direct(w), atol=1e-12)
        np.testing.assert_allclose(M.local_clustering(net, "barrat"), barrat_direct(w), atol=1e-12)
        g = nx.from_numpy_array(net.weights)
        ref = nx.clustering(g, weight="weight")
        np.testing.assert_allclose(M.local_clustering(net, "onnela"), [ref[i] for i in range(15)], atol=1e-12)


# -- centralities --------------------------------------------------------------------------

def test_betweenness_examples():
    assert M.betweenness(make_network(PATH)).tolist() == [0.0, 1.0, 0.0]
    bc = M.betweenness(star(4), False)
    assert bc[0] == 6.0 and np.all(bc[1:] == 0)


def test_betweenness_matches_networkx():
    rng = np.random.default_rng(31)
    for _ in range(10):
        net = random_network(rng, 20, p=0.25)
        g = nx.Graph()
        g.add_nodes_from(range(20))
        for i, j in zip(*np.nonzero(np.triu(net.weights, 1))):
            g.add_edge(int(i), int(j), d=1.0 / net.weights[i, j])
        ref = nx.betweenness_centrality(g, weight="d", normalized=False)
        np.testing.assert_allclose(M.betweenness(net, True), [ref[i] for i in range(20)], atol=1e-9)


def test_closeness_examples():
    assert M.closeness(make_network([("a", "b", 1.0)])).tolist() == [1.0, 1.0]
    c = M.closeness(make_network(PATH))
    assert c[1] == 1.0 and c[0] == pytest.approx(2 / 3, abs=1e-15)
    iso = M.closeness(make_network([("a", "b", 1.0)], nodes=["a", "b", "z"]))
    assert iso[2] == 0.0


def test_pearson_examples():
    x = np.arange(10.0)
    assert M.pearson(x, 2 * x + 1)[0] == pytest.approx(1.0, abs=1e-15)
    assert M.pearson(x, -x)[0] == pytest.approx(-1.0, abs=1e-15)
    assert M.pearson([1, 2, 3], [1, 3, 2])[0] == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        M.pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        M.pearson([1, 2], [1, 2])


# -- invariants -------------------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 14), st.floats(0.05, 20.0))
def test_scaling_invariances(seed, n, c):
    rng = np.random.default_rng(seed)
    net = random_network(rng, n, p=0.5)
    sc = net.scaled(c)
    assert net.degrees.sum() == 2 * net.n_edges
    assert net.strengths.sum() == pytest.approx(2 * np.triu(net.weights, 1).sum(), rel=1e-12)
    np.testing.assert_allclose(sc.strengths, c * net.strengths, rtol=1e-12)
    for v in ("onnela", "barrat", "unweighted"):
        np.testing.assert_allclose(M.local_clustering(sc, v), M.local_clustering(net, v), atol=1e-12)
    try:
        gw = M.global_clustering(net, True)
        assert M.global_clustering(sc, True) == pytest.approx(gw, abs=1e-12)
    except ValueError:
        pass
    np.testing.assert_allclose(M.shortest_paths(sc), M.shortest_paths(net) / c, rtol=1e-12)
    np.testing.assert_allclose(M.closeness(sc), c * M.closeness(net), rtol=1e-12)
    # c changes every length by the same factor, so path ties survive scaling up to rounding
    np.testing.assert_allclose(M.betweenness(sc), M.betweenness(net), atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 16), st.sampled_from([0.3, 1.0, 7.0]))
def test_equal_weight_betweenness_is_unweighted(seed, n, w):
    rng = np.random.default_rng(seed)
    net = random_network(rng, n, p=0.35, weights="equal").scaled(w)
    assert np.array_equal(M.betweenness(net, True), M.betweenness(net, False))


def test_bundles_and_writers():
    net = make_network(TRI + [("c", "d", 2.0)])
    nm = M.node_metrics(net)
    gm = M.graph_metrics(net)
    assert gm.n_nodes == 4 and gm.n_edges == 4 and gm.n_components == 1
    assert gm.largest_component_fraction == 1.0
    assert nm.degree.tolist() == [2, 2, 3, 1]
    out = io.StringIO()
    M.write_node_metrics(nm, out)
    assert out.getvalue().splitlines()[0] == "node," + ",".join(M.NodeMetrics.COLUMNS)
    out = io.StringIO()
    M.write_graph_metrics(M.graph_metrics(make_network([("a", "b", 1.0)])), out)
    doc = json.loads(out.getvalue())
    assert doc["global_clustering_weighted"] is None and doc["density"] == 1.0
