"""Per-year pipelines assembled into metric time series, centrality rankings
and rank-stability statistics."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from . import metrics as M
from .bipartite import BipartiteSnapshot, SnapshotFilter, degree_summary, snapshot
from .ingest import Panel
from .projection import CooperationNetwork, project
from .validation import ValidatedEdgeSet, validate

log = logging.getLogger(__name__)

BIPARTITE_METRICS = ("n_countries_bipartite", "n_treaties", "mean_country_degree", "mean_treaty_degree")
NETWORK_METRICS = (
    "n_validated_pairs", "n_nodes", "n_edges", "mean_degree", "mean_strength", "density",
    "n_components", "largest_component_fraction", "avg_shortest_path",
    "global_clustering_weighted", "global_clustering_unweighted",
)
SERIES_METRICS = BIPARTITE_METRICS + NETWORK_METRICS
MEASURES = ("strength", "betweenness", "closeness")
CORRELATIONS = (
    ("degree", "local_clustering_unweighted"),
    ("strength", "local_clustering_onnela"),
    ("strength", "local_clustering_barrat"),
)
STRENGTH_BINS = 30


@dataclass(frozen=True, eq=False)
class YearResult:
    """Everything computed for one (year, filter).

    ``network`` keeps every snapshot country; ``active`` drops countries
    without a validated edge and is what the graph and node metrics describe.
    """

    year: int
    filter: SnapshotFilter
    snapshot: BipartiteSnapshot
    validated: ValidatedEdgeSet | None
    network: CooperationNetwork | None
    active: CooperationNetwork | None
    values: dict[str, float]
    node_metrics: M.NodeMetrics | None
    correlations: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)

    @property
    def significant(self) -> bool:
        return self.validated is not None and self.validated.significant


@dataclass(frozen=True)
class MetricSeries:
    metric: str
    filter: SnapshotFilter
    years: tuple[int, ...]
    values: tuple[float, ...]
    significant: tuple[bool, ...]

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.years, self.years[1:])):
            raise ValueError("series years must be strictly increasing")

    @property
    def points(self) -> list[tuple[int, float]]:
        return list(zip(self.years, self.values))


def analyze_year(panel: Panel, year: int, flt: SnapshotFilter = SnapshotFilter(),
                 alpha: float = 0.01, constrained_layer: str = "countries") -> YearResult:
    """snapshot -> validate -> project -> metrics for a single year."""
    snap = snapshot(panel, year, flt)
    values = {name: math.nan for name in SERIES_METRICS}
    values.update(n_countries_bipartite=snap.n_countries, n_treaties=snap.n_treaties,
                  n_validated_pairs=0, n_nodes=0, n_edges=0)
    if snap.empty:
        return YearResult(year, flt, snap, None, None, None, values, None)
    ds = degree_summary(snap)
    values.update(mean_country_degree=ds.mean_country_degree, mean_treaty_degree=ds.mean_treaty_degree)
    if snap.n_countries < 2:
        return YearResult(year, flt, snap, None, None, None, values, None)

    validated = validate(snap, alpha, constrained_layer)
    net = project(snap, validated)
    active = net.active()
    values["n_validated_pairs"] = len(validated)
    if active.n_nodes == 0:
        return YearResult(year, flt, snap, validated, net, active, values, None)

    dist = M.shortest_paths(active, True)
    gm = M.graph_metrics(active, dist=dist)
    for name in NETWORK_METRICS[1:]:
        values[name] = getattr(gm, name)
    nm = M.node_metrics(active, dist=dist)
    corr = {}
    for xa, ya in CORRELATIONS:
        try:
            corr[(xa, ya)] = M.pearson(getattr(nm, xa), getattr(nm, ya))
        except ValueError:
            pass
    return YearResult(year, flt, snap, validated, net, active, values, nm, corr)


_WORKER_PANEL: Panel | None = None


def _init_worker(panel: Panel) -> None:
    global _WORKER_PANEL
    _WORKER_PANEL = panel


def _worker(args) -> YearResult:
    return analyze_year(_WORKER_PANEL, *args)


def analyze_years(panel: Panel, years: Iterable[int], flt: SnapshotFilter = SnapshotFilter(),
                  alpha: float = 0.01, constrained_layer: str = "countries",
                  workers: int = 1) -> list[YearResult]:
    """Run :func:`analyze_year` for each year, in parallel when ``workers > 1``.

    Results come back in year order whatever the worker count.
    """
    years = sorted(set(years))
    for y in years:
        if y < panel.first_year or y > panel.last_year:
            raise ValueError(f"year {y} outside panel range {panel.first_year}:{panel.last_year}")
    if workers <= 1 or len(years) <= 1:
        return [analyze_year(panel, y, flt, alpha, constrained_layer) for y in years]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(panel,)) as ex:
        return list(ex.map(_worker, [(y, flt, alpha, constrained_layer) for y in years]))


def build_series(results: Sequence[YearResult], names: Sequence[str] | None = None) -> dict[str, MetricSeries]:
    names = list(SERIES_METRICS if names is None else names)
    unknown = [n for n in names if n not in SERIES_METRICS]
    if unknown:
        raise ValueError(f"unknown metrics {unknown}")
    if not results:
        return {}
    flt = results[0].filter
    if any(r.filter != flt for r in results):
        raise ValueError("results mix different filters")
    years = tuple(r.year for r in results)
    sig = tuple(r.significant for r in results)
    return {n: MetricSeries(n, flt, years, tuple(float(r.values[n]) for r in results), sig) for n in names}


def run_series(panel: Panel, years: Iterable[int] | None = None, flt: SnapshotFilter = SnapshotFilter(),
               alpha: float = 0.01, metrics: Sequence[str] | None = None,
               constrained_layer: str = "countries", workers: int = 1
               ) -> tuple[list[YearResult], dict[str, MetricSeries]]:
    """Per-year results and the requested metric series for one filter."""
    years = panel.years if years is None else years
    results = analyze_years(panel, years, flt, alpha, constrained_layer, workers)
    for r in results:
        if not r.significant:
            log.info("%s %d: no statistically significant pair", flt.label, r.year)
    return results, build_series(results, metrics)


# ---------------------------------------------------------------------------
# rankings

@dataclass(frozen=True)
class Ranking:
    """Countries ranked by a centrality; rank 1 is the largest value, ties share the average rank."""

    year: int
    measure: str
    countries: tuple[str, ...]
    ranks: tuple[float, ...]
    values: tuple[float, ...]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.countries, self.ranks))


def rank_values(values) -> np.ndarray:
    return stats.rankdata(-np.asarray(values, dtype=float), method="average")


def rank(net: CooperationNetwork, measure: str, nm: M.NodeMetrics | None = None) -> Ranking:
    """Rank the nodes of *net* by strength, betweenness or closeness (weighted)."""
    if measure not in MEASURES:
        raise ValueError(f"measure must be one of {MEASURES}")
    if net.n_nodes == 0:
        raise ValueError("cannot rank an empty network")
    if nm is None:
        if measure == "strength":
            vals = net.strengths
        elif measure == "betweenness":
            vals = M.betweenness(net, True)
        else:
            vals = M.closeness(net, True)
    else:
        vals = getattr(nm, measure)
    r = rank_values(vals)
    order = sorted(range(net.n_nodes), key=lambda i: (r[i], net.nodes[i]))
    return Ranking(net.year, measure,
                   tuple(net.nodes[i] for i in order),
                   tuple(float(r[i]) for i in order),
                   tuple(float(vals[i]) for i in order))


def tau_b(x, y) -> float:
    """Tau-b from exact integer pair counts; NaN when either side is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d and of equal length")
    i, j = np.triu_indices(x.size, k=1)
    sx = np.sign(x[i] - x[j]).astype(np.int64)
    sy = np.sign(y[i] - y[j]).astype(np.int64)
    s = int((sx * sy).sum())  # concordant minus discordant
    untied_x = int(np.count_nonzero(sx))
    untied_y = int(np.count_nonzero(sy))
    denom = untied_x * untied_y
    if denom == 0:
        return math.nan
    return s / math.sqrt(denom)


def kendall_tau(a: Ranking | dict[str, float], b: Ranking | dict[str, float]) -> float:
    """Tau-b between two rankings over the countries present in both."""
    ra = a.as_dict() if isinstance(a, Ranking) else dict(a)
    rb = b.as_dict() if isinstance(b, Ranking) else dict(b)
    common = sorted(set(ra) & set(rb))
    if len(common) < 2:
        raise ValueError("rankings share fewer than two countries")
    return tau_b([ra[c] for c in common], [rb[c] for c in common])


def rankings_for(results: Sequence[YearResult]) -> list[Ranking]:
    out = []
    for r in results:
        if r.active is None or r.active.n_nodes == 0:
            continue
        for measure in MEASURES:
            out.append(rank(r.active, measure, r.node_metrics))
    return out


def tau_series(rankings: Sequence[Ranking]) -> list[tuple[int, str, float, int]]:
    """(year, measure, tau, n_common) between each ranking and the previous year's."""
    by_measure: dict[str, dict[int, Ranking]] = {}
    for rk in rankings:
        by_measure.setdefault(rk.measure, {})[rk.year] = rk
    out = []
    for measure in MEASURES:
        seq = by_measure.get(measure, {})
        for year in sorted(seq):
            prev = seq.get(year - 1)
            if prev is None:
                continue
            common = len(set(prev.countries) & set(seq[year].countries))
            if common < 2:
                continue
            out.append((year, measure, kendall_tau(prev, seq[year]), common))
    return out


# ---------------------------------------------------------------------------
# distributions

@dataclass(frozen=True)
class Histogram:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    counts: tuple[int, ...]
    mean: float
    variance: float

    @property
    def mass(self) -> int:
        return sum(self.counts)


def histogram(values, kind: str = "strength") -> Histogram:
    """Integer bins for ``kind="degree"``; otherwise 30 equal-width bins over the observed range."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("histogram of no values")
    mean, var = float(v.mean()), float(v.var())
    lo_v, hi_v = float(v.min()), float(v.max())
    if kind == "degree":
        ints = np.rint(v).astype(np.int64)
        base = int(ints.min())
        counts = np.bincount(ints - base)
        edges = np.arange(base, base + counts.size + 1, dtype=float)
        return Histogram(tuple(edges[:-1]), tuple(edges[1:]), tuple(counts.tolist()), mean, var)
    if hi_v == lo_v:
        return Histogram((lo_v,), (hi_v,), (int(v.size),), mean, var)
    counts, edges = np.histogram(v, bins=STRENGTH_BINS, range=(lo_v, hi_v))
    return Histogram(tuple(edges[:-1].tolist()), tuple(edges[1:].tolist()), tuple(counts.tolist()), mean, var)


def distributions(values_by_year: dict[int, Sequence[float]], kind: str = "strength") -> dict[int, Histogram]:
    return {year: histogram(vals, kind) for year, vals in sorted(values_by_year.items()) if len(vals)}
