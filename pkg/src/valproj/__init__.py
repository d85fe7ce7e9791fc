"""Statistically validated projections of country-treaty affiliation data."""

from .bipartite import BipartiteSnapshot, SnapshotFilter, biadjacency_sorted, snapshot
from .ingest import (Panel, PanelError, ParseError, build_panel, derive_membership_intervals,
                     load_subject_map, parse_records, read_records)
from .metrics import graph_metrics, node_metrics
from .projection import CooperationNetwork, newman_weights, project
from .temporal import analyze_year, analyze_years, kendall_tau, rank, run_series
from .validation import fdr_filter, poisson_binomial_sf, validate

__version__ = "0.1.0"

__all__ = [
    "BipartiteSnapshot", "CooperationNetwork", "Panel", "PanelError", "ParseError", "SnapshotFilter",
    "analyze_year", "analyze_years", "biadjacency_sorted", "build_panel", "derive_membership_intervals",
    "fdr_filter", "graph_metrics", "kendall_tau", "load_subject_map", "newman_weights", "node_metrics",
    "parse_records", "poisson_binomial_sf", "project", "rank", "read_records", "run_series", "snapshot",
    "validate",
]
