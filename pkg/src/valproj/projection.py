"""Newman-weighted one-mode projection restricted to validated country pairs."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .bipartite import BipartiteSnapshot, SnapshotFilter
from .validation import ValidatedEdgeSet

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CooperationNetwork:
    """Weighted undirected country network stored as a dense symmetric matrix.

    ``weights[i, j] == 0`` means no edge. Isolated nodes are allowed.
    """

    year: int
    nodes: tuple[str, ...]
    weights: np.ndarray
    p_values: dict[tuple[str, str], float] = field(default_factory=dict)
    filter: SnapshotFilter = SnapshotFilter()
    alpha: float | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        n = len(self.nodes)
        if w.shape != (n, n):
            raise ValueError(f"weight matrix shape {w.shape} does not match {n} nodes")
        if not np.array_equal(w, w.T):
            raise ValueError("weight matrix must be symmetric")
        if np.any(np.diag(w) != 0):
            raise ValueError("self-loops are not allowed")
        if np.any(w < 0):
            raise ValueError("negative weight")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_edges(cls, nodes: Sequence[str], edges: Iterable[tuple[str, str, float]],
                   year: int = 0, **kw) -> "CooperationNetwork":
        nodes = tuple(nodes)
        pos = {v: i for i, v in enumerate(nodes)}
        w = np.zeros((len(nodes), len(nodes)))
        for a, b, x in edges:
            if a == b:
                raise ValueError(f"self-loop on {a!r}")
            if not x > 0:
                raise ValueError(f"non-positive weight {x!r} on ({a!r}, {b!r})")
            w[pos[a], pos[b]] = w[pos[b], pos[a]] = x
        return cls(year, nodes, w, **kw)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.weights, 1)))

    @property
    def adjacency(self) -> np.ndarray:
        return (self.weights > 0).astype(np.int64)

    @property
    def degrees(self) -> np.ndarray:
        return np.count_nonzero(self.weights, axis=1)

    @property
    def strengths(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def edges(self) -> list[tuple[str, str, float]]:
        i, j = np.nonzero(np.triu(self.weights, 1))
        return [(self.nodes[a], self.nodes[b], float(self.weights[a, b])) for a, b in zip(i, j)]

    def subnetwork(self, keep) -> "CooperationNetwork":
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.nonzero(keep)[0]
        nodes = tuple(self.nodes[i] for i in keep)
        kept = set(nodes)
        pv = {k: v for k, v in self.p_values.items() if k[0] in kept and k[1] in kept}
        return CooperationNetwork(self.year, nodes, self.weights[np.ix_(keep, keep)], pv,
                                  self.filter, self.alpha)

    def active(self) -> "CooperationNetwork":
        """The network restricted to nodes with at least one edge."""
        return self.subnetwork(self.degrees > 0)

    def scaled(self, c: float) -> "CooperationNetwork":
        return CooperationNetwork(self.year, self.nodes, self.weights * c, dict(self.p_values),
                                  self.filter, self.alpha)


def _size_groups(snap: BipartiteSnapshot):
    """Treaty column indices grouped by signatory count, ascending, for ``n_t >= 2``."""
    n = snap.treaty_degrees
    for size in np.unique(n[n >= 2]):
        yield int(size), np.nonzero(n == size)[0]


def newman_weight(snap: BipartiteSnapshot, pair: tuple[str, str]) -> float:
    """Sum of ``1 / (n_t - 1)`` over the treaties both countries signed."""
    a, b = pair
    if a == b:
        raise ValueError("pair must consist of two distinct countries")
    i, j = snap.countries.index(a), snap.countries.index(b)
    both = snap.incidence[i] & snap.incidence[j]
    w = 0.0
    for size, cols in _size_groups(snap):
        w += int(both[cols].sum()) / (size - 1)
    return w


def newman_weights(snap: BipartiteSnapshot) -> np.ndarray:
    """All pairwise Newman weights as a dense matrix with zero diagonal.

    Co-signature counts are accumulated exactly per treaty size and combined
    in a fixed order, so the result does not depend on BLAS threading.
    """
    # 0/1 float products are exact integers whatever the summation order
    b = snap.incidence.astype(float)
    w = np.zeros((snap.n_countries, snap.n_countries))
    for size, cols in _size_groups(snap):
        sub = b[:, cols]
        w += (sub @ sub.T) / (size - 1)
    np.fill_diagonal(w, 0.0)
    return w


def project(snap: BipartiteSnapshot, validated: ValidatedEdgeSet) -> CooperationNetwork:
    """Validated pairs of *snap* weighted by their Newman weights.

    Every snapshot country is a node, including those without validated edges.
    """
    if validated.snapshot_digest is not None and validated.snapshot_digest != snap.digest:
        raise ValueError("validated edge set was derived from a different snapshot")
    pos = {c: i for i, c in enumerate(snap.countries)}
    unknown = [p for p in validated.edges if p[0] not in pos or p[1] not in pos]
    if unknown:
        raise ValueError(f"validated pairs not in snapshot: {unknown[:3]}")
    full = newman_weights(snap) if validated.edges else np.zeros((snap.n_countries,) * 2)
    w = np.zeros_like(full)
    pvals = {}
    for (a, b), p in validated.edges.items():
        i, j = pos[a], pos[b]
        x = full[i, j]
        if x <= 0:
            log.warning("dropping validated pair %s-%s without co-signed treaties (p=%g)", a, b, p)
            continue
        w[i, j] = w[j, i] = x
        key = (a, b) if i < j else (b, a)
        pvals[key] = p
    return CooperationNetwork(snap.year, snap.countries, w, pvals, snap.filter, validated.alpha)


def write_edges_csv(net: CooperationNetwork, out: IO[str]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["country_i", "country_j", "weight", "p_value"])
    for a, b, x in net.edges():
        p = net.p_values.get((a, b), net.p_values.get((b, a)))
        w.writerow([a, b, repr(x), "" if p is None else repr(p)])


def write_graphml(net: CooperationNetwork, path) -> None:
    import networkx as nx

    g = nx.Graph(year=net.year, filter=net.filter.label)
    g.add_nodes_from(net.nodes)
    for a, b, x in net.edges():
        p = net.p_values.get((a, b), net.p_values.get((b, a)))
        g.add_edge(a, b, weight=x, p_value=float("nan") if p is None else p)
    nx.write_graphml(g, path)
