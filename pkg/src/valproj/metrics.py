"""Network metrics for weighted cooperation networks.

Weighted distances use reciprocal weights as edge lengths. Nothing here calls
floating-point BLAS, so every result is reproducible bit for bit.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import IO

import numpy as np
from scipy import sparse, stats
from scipy.sparse import csgraph

from .projection import CooperationNetwork

PATH_RTOL = 1e-12
CLUSTERING_VARIANTS = ("unweighted", "onnela", "barrat")


def density(net: CooperationNetwork) -> float:
    n = net.n_nodes
    if n < 2:
        raise ValueError("density needs at least two nodes")
    return net.n_edges / (n * (n - 1) / 2)


@dataclass(frozen=True)
class Components:
    count: int
    sizes: tuple[int, ...]  # descending
    labels: np.ndarray


def components(net: CooperationNetwork) -> Components:
    if net.n_nodes == 0:
        return Components(0, (), np.zeros(0, dtype=np.int64))
    count, labels = csgraph.connected_components(sparse.csr_matrix(net.adjacency), directed=False)
    sizes = np.bincount(labels, minlength=count)
    return Components(int(count), tuple(sorted(sizes.tolist(), reverse=True)), labels)


def edge_lengths(net: CooperationNetwork, weighted: bool = True) -> np.ndarray:
    """Dense length matrix: ``1 / w`` (or 1) on edges, ``inf`` elsewhere, 0 on the diagonal."""
    w = net.weights
    lengths = np.full(w.shape, np.inf)
    edge = w > 0
    lengths[edge] = 1.0 / w[edge] if weighted else 1.0
    np.fill_diagonal(lengths, 0.0)
    return lengths


def shortest_paths(net: CooperationNetwork, weighted: bool = True) -> np.ndarray:
    """All-pairs shortest path lengths (Dijkstra per source); ``inf`` if unreachable."""
    n = net.n_nodes
    if n == 0:
        return np.zeros((0, 0))
    lengths = edge_lengths(net, weighted)
    graph = sparse.csr_matrix(np.where(np.isfinite(lengths), lengths, 0.0))
    return csgraph.dijkstra(graph, directed=False)


def avg_shortest_path(net: CooperationNetwork, weighted: bool = True,
                      dist: np.ndarray | None = None) -> float:
    """Mean distance over unordered pairs that can reach each other."""
    d = shortest_paths(net, weighted) if dist is None else dist
    iu = np.triu_indices(d.shape[0], k=1)
    vals = d[iu]
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        raise ValueError("no reachable pairs")
    return float(vals.mean())


def _triangle_terms(net: CooperationNetwork):
    a = net.adjacency.astype(float)
    # 0/1 products are exact integers, so BLAS is safe here
    a2 = a @ a
    k = a.sum(axis=1)
    return a, a2, k


def global_clustering(net: CooperationNetwork, weighted: bool = False) -> float:
    """Closed share of all triplets.

    The weighted form values each triplet by the arithmetic mean of its two
    links; the closing link does not enter the value.
    """
    a, a2, k = _triangle_terms(net)
    if weighted:
        s = net.strengths
        den = float((s * (k - 1)).sum())
        num = float((net.weights * a2).sum())
    else:
        den = float((k * (k - 1)).sum())
        num = float((a * a2).sum())
    if den == 0:
        raise ValueError("network has no triplets")
    return num / den


def local_clustering(net: CooperationNetwork, variant: str = "unweighted") -> np.ndarray:
    """Per-node clustering; nodes with fewer than two neighbours get 0.

    ``onnela``: triangle intensities ``(w_ij w_ih w_jh)^(1/3)`` with weights
    scaled by the network maximum. ``barrat``: closed triplets valued by the
    mean of the two links at the node, normalised by ``s (k - 1)``.
    """
    if variant not in CLUSTERING_VARIANTS:
        raise ValueError(f"variant must be one of {CLUSTERING_VARIANTS}")
    n = net.n_nodes
    out = np.zeros(n)
    if n == 0:
        return out
    a, a2, k = _triangle_terms(net)
    ok = k >= 2
    if variant == "unweighted":
        num = (a * a2).sum(axis=1)
        out[ok] = num[ok] / (k[ok] * (k[ok] - 1))
    elif variant == "onnela":
        wmax = net.weights.max()
        if wmax > 0:
            c = np.cbrt(net.weights / wmax)
            num = np.einsum("ij,jh,ih->i", c, c, c)
            out[ok] = num[ok] / (k[ok] * (k[ok] - 1))
    else:
        s = net.strengths
        num = (net.weights * a2).sum(axis=1)
        out[ok] = num[ok] / (s[ok] * (k[ok] - 1))
    return out


def _path_dag(dist: np.ndarray, lengths: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """``cond[s, v]``: v precedes ``targets[s]`` on a shortest path from s."""
    src = np.arange(dist.shape[0])
    dw = dist[src, targets][:, None]
    with np.errstate(invalid="ignore"):
        cand = dist + lengths[:, targets].T
        return np.abs(cand - dw) <= PATH_RTOL * dw


def betweenness(net: CooperationNetwork, weighted: bool = True,
                dist: np.ndarray | None = None) -> np.ndarray:
    """Unnormalised betweenness over unordered pairs (Brandes accumulation).

    All sources are processed together: step r handles, for every source,
    the node at rank r in that source's distance order.
    """
    n = net.n_nodes
    if n < 3:
        return np.zeros(n)
    lengths = edge_lengths(net, weighted)
    np.fill_diagonal(lengths, np.inf)
    d = shortest_paths(net, weighted) if dist is None else dist
    src = np.arange(n)
    order = np.argsort(d, axis=1, kind="stable")
    finite = np.isfinite(np.take_along_axis(d, order, axis=1))
    last = int(finite.sum(axis=1).max())

    sigma = np.zeros((n, n))
    sigma[src, src] = 1.0
    for r in range(1, last):
        w = order[:, r]
        live = finite[:, r]
        cond = _path_dag(d, lengths, w) & live[:, None]
        sigma[src, w] = np.where(live, (sigma * cond).sum(axis=1), 0.0)

    delta = np.zeros((n, n))
    for r in range(last - 1, 0, -1):
        w = order[:, r]
        live = finite[:, r]
        cond = _path_dag(d, lengths, w) & live[:, None]
        sw = sigma[src, w]
        coeff = np.divide(1.0 + delta[src, w], sw, out=np.zeros(n), where=live & (sw > 0))
        delta += cond * sigma * coeff[:, None]
    delta[src, src] = 0.0
    return delta.sum(axis=0) / 2.0


def closeness(net: CooperationNetwork, weighted: bool = True,
              dist: np.ndarray | None = None) -> np.ndarray:
    """Reachable others divided by their total distance; 0 for isolated nodes."""
    d = shortest_paths(net, weighted) if dist is None else dist
    n = d.shape[0]
    out = np.zeros(n)
    for i in range(n):
        row = d[i]
        reach = np.isfinite(row)
        reach[i] = False
        total = row[reach].sum()
        if total > 0:
            out[i] = reach.sum() / total
    return out


def pearson(x, y) -> tuple[float, float]:
    """Pearson r and its two-sided p-value."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d and of equal length")
    if x.size < 3:
        raise ValueError("pearson needs at least three observations")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValueError("zero variance")
    with warnings.catch_warnings():
        # nearly constant columns are legitimate here (e.g. all-equal clustering)
        warnings.simplefilter("ignore", stats.NearConstantInputWarning)
        res = stats.pearsonr(x, y)
    return float(res.statistic), float(res.pvalue)


# ---------------------------------------------------------------------------
# bundles

@dataclass(frozen=True, eq=False)
class NodeMetrics:
    nodes: tuple[str, ...]
    degree: np.ndarray
    strength: np.ndarray
    local_clustering_unweighted: np.ndarray
    local_clustering_onnela: np.ndarray
    local_clustering_barrat: np.ndarray
    betweenness: np.ndarray
    closeness: np.ndarray

    COLUMNS = ("degree", "strength", "local_clustering_unweighted", "local_clustering_onnela",
               "local_clustering_barrat", "betweenness", "closeness")


@dataclass(frozen=True)
class GraphMetrics:
    n_nodes: int
    n_edges: int
    density: float
    n_components: int
    largest_component_fraction: float
    avg_shortest_path: float
    global_clustering_weighted: float
    global_clustering_unweighted: float
    mean_degree: float
    mean_strength: float


def _or_nan(fn, *args, **kw) -> float:
    try:
        return float(fn(*args, **kw))
    except ValueError:
        return math.nan


def node_metrics(net: CooperationNetwork, dist: np.ndarray | None = None) -> NodeMetrics:
    d = shortest_paths(net, True) if dist is None else dist
    return NodeMetrics(
        nodes=net.nodes,
        degree=net.degrees,
        strength=net.strengths,
        local_clustering_unweighted=local_clustering(net, "unweighted"),
        local_clustering_onnela=local_clustering(net, "onnela"),
        local_clustering_barrat=local_clustering(net, "barrat"),
        betweenness=betweenness(net, True, dist=d),
        closeness=closeness(net, True, dist=d),
    )


def graph_metrics(net: CooperationNetwork, dist: np.ndarray | None = None) -> GraphMetrics:
    """Scalar metrics; undefined values (e.g. no triplets) are NaN."""
    n = net.n_nodes
    comp = components(net)
    d = shortest_paths(net, True) if dist is None else dist
    return GraphMetrics(
        n_nodes=n,
        n_edges=net.n_edges,
        density=_or_nan(density, net),
        n_components=comp.count,
        largest_component_fraction=comp.sizes[0] / n if n else math.nan,
        avg_shortest_path=_or_nan(avg_shortest_path, net, dist=d),
        global_clustering_weighted=_or_nan(global_clustering, net, weighted=True),
        global_clustering_unweighted=_or_nan(global_clustering, net, weighted=False),
        mean_degree=float(net.degrees.mean()) if n else math.nan,
        mean_strength=float(net.strengths.mean()) if n else math.nan,
    )


def write_node_metrics(nm: NodeMetrics, out: IO[str]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["node", *NodeMetrics.COLUMNS])
    cols = [getattr(nm, c) for c in NodeMetrics.COLUMNS]
    for i, node in enumerate(nm.nodes):
        w.writerow([node, *(repr(c[i].item()) for c in cols)])


def write_graph_metrics(gm: GraphMetrics, out: IO[str], extra: dict | None = None) -> None:
    doc = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in asdict(gm).items()}
    if extra:
        doc.update(extra)
    json.dump(doc, out, sort_keys=True, indent=1)
    out.write("\n")
