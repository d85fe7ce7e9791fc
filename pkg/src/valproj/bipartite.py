"""End-of-year bipartite country x treaty snapshots."""

from __future__ import annotations

import csv
import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .ingest import CATEGORIES, Panel


@dataclass(frozen=True)
class SnapshotFilter:
    """Treaty filter; the two conditions are combined with AND."""

    subject_category: str | None = None
    exclude_sponsored: bool = False

    def __post_init__(self):
        if self.subject_category is not None and self.subject_category not in CATEGORIES:
            raise ValueError(f"unknown subject category {self.subject_category!r}")

    @property
    def label(self) -> str:
        name = self.subject_category or "all"
        return f"{name}__no_un" if self.exclude_sponsored else name

    def accepts(self, panel: Panel, treaty_id: str) -> bool:
        if self.exclude_sponsored and panel.catalog[treaty_id].sponsored:
            return False
        if self.subject_category is not None and self.subject_category not in panel.categories(treaty_id):
            return False
        return True

    def to_dict(self) -> dict:
        return {"subject_category": self.subject_category, "exclude_sponsored": self.exclude_sponsored}


@dataclass(frozen=True, eq=False)
class BipartiteSnapshot:
    """Binary country x treaty incidence; rows are countries.

    Countries and treaties without any incidence are never part of a snapshot.
    """

    year: int
    countries: tuple[str, ...]
    treaties: tuple[str, ...]
    incidence: np.ndarray
    filter: SnapshotFilter = SnapshotFilter()
    country_degrees: np.ndarray = field(init=False)
    treaty_degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        inc = np.ascontiguousarray(self.incidence, dtype=np.uint8)
        if inc.shape != (len(self.countries), len(self.treaties)):
            raise ValueError(f"incidence shape {inc.shape} does not match ids "
                             f"({len(self.countries)}, {len(self.treaties)})")
        if inc.size and inc.max() > 1:
            raise ValueError("incidence must be binary")
        inc.setflags(write=False)
        k = inc.sum(axis=1, dtype=np.int64)
        n = inc.sum(axis=0, dtype=np.int64)
        if (k == 0).any() or (n == 0).any():
            raise ValueError("snapshot contains zero-degree nodes; use from_incidence to drop them")
        object.__setattr__(self, "incidence", inc)
        object.__setattr__(self, "country_degrees", k)
        object.__setattr__(self, "treaty_degrees", n)

    @classmethod
    def from_incidence(cls, incidence, countries: Sequence[str], treaties: Sequence[str],
                       year: int = 0, filter: SnapshotFilter = SnapshotFilter()) -> "BipartiteSnapshot":
        """Build a snapshot from any 0/1 matrix, dropping empty rows and columns."""
        inc = np.asarray(incidence).astype(np.uint8)
        rows = inc.any(axis=1)
        inc = inc[rows]
        cols = inc.any(axis=0)
        inc = inc[:, cols]
        return cls(year,
                   tuple(c for c, keep in zip(countries, rows) if keep),
                   tuple(t for t, keep in zip(treaties, cols) if keep),
                   inc, filter)

    @property
    def n_countries(self) -> int:
        return len(self.countries)

    @property
    def n_treaties(self) -> int:
        return len(self.treaties)

    @property
    def n_incidences(self) -> int:
        return int(self.country_degrees.sum())

    @property
    def empty(self) -> bool:
        return self.n_countries == 0

    @property
    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps([self.year, self.filter.to_dict(), self.countries, self.treaties]).encode())
        h.update(self.incidence.tobytes())
        return h.hexdigest()

    def incidence_set(self) -> set[tuple[str, str]]:
        rows, cols = np.nonzero(self.incidence)
        return {(self.countries[r], self.treaties[c]) for r, c in zip(rows, cols)}


def snapshot(panel: Panel, year: int, flt: SnapshotFilter = SnapshotFilter()) -> BipartiteSnapshot:
    """Memberships held at the end of *year* restricted to treaties passing *flt*."""
    if year < panel.first_year or year > panel.last_year:
        raise ValueError(f"year {year} outside panel range {panel.first_year}:{panel.last_year}")
    c_idx, t_idx = panel.members_at(year)
    allowed = np.fromiter((flt.accepts(panel, t) for t in panel.treaty_ids), dtype=bool,
                          count=len(panel.treaty_ids))
    keep = allowed[t_idx] if t_idx.size else np.zeros(0, dtype=bool)
    c_idx, t_idx = c_idx[keep], t_idx[keep]
    rows = np.unique(c_idx)
    cols = np.unique(t_idx)
    inc = np.zeros((rows.size, cols.size), dtype=np.uint8)
    inc[np.searchsorted(rows, c_idx), np.searchsorted(cols, t_idx)] = 1
    return BipartiteSnapshot(
        year,
        tuple(panel.countries[i] for i in rows),
        tuple(panel.treaty_ids[j] for j in cols),
        inc,
        flt,
    )


@dataclass(frozen=True)
class DegreeSummary:
    mean_country_degree: float
    mean_treaty_degree: float
    country_degree_hist: dict[int, int]
    treaty_degree_hist: dict[int, int]


def degree_summary(snap: BipartiteSnapshot) -> DegreeSummary:
    if snap.empty:
        raise ValueError("degree summary of an empty snapshot")
    return DegreeSummary(
        mean_country_degree=float(snap.country_degrees.mean()),
        mean_treaty_degree=float(snap.treaty_degrees.mean()),
        country_degree_hist=dict(sorted(Counter(snap.country_degrees.tolist()).items())),
        treaty_degree_hist=dict(sorted(Counter(snap.treaty_degrees.tolist()).items())),
    )


@dataclass(frozen=True)
class SortedBiadjacency:
    matrix: np.ndarray  # countries x treaties, both sorted by descending degree
    country_perm: np.ndarray
    treaty_perm: np.ndarray
    countries: tuple[str, ...]
    treaties: tuple[str, ...]


def _degree_order(degrees: np.ndarray, ids: Sequence[str]) -> np.ndarray:
    # descending degree, then ascending id
    id_rank = np.argsort(np.array(ids, dtype=object), kind="stable")
    pos = np.empty_like(id_rank)
    pos[id_rank] = np.arange(len(ids))
    return np.lexsort((pos, -degrees))


def biadjacency_sorted(snap: BipartiteSnapshot) -> SortedBiadjacency:
    """Incidence with rows and columns permuted by descending degree (ties by id)."""
    if snap.empty:
        raise ValueError("cannot sort an empty snapshot")
    cp = _degree_order(snap.country_degrees, snap.countries)
    tp = _degree_order(snap.treaty_degrees, snap.treaties)
    return SortedBiadjacency(
        matrix=snap.incidence[np.ix_(cp, tp)],
        country_perm=cp,
        treaty_perm=tp,
        countries=tuple(snap.countries[i] for i in cp),
        treaties=tuple(snap.treaties[j] for j in tp),
    )


def write_biadjacency(sb: SortedBiadjacency, csv_out: IO[str], json_out: IO[str] | None = None,
                      meta: dict | None = None) -> None:
    """Dense 0/1 CSV, treaties as rows and countries as columns, plus a JSON sidecar."""
    w = csv.writer(csv_out, lineterminator="\n")
    w.writerow(["treaty_id", *sb.countries])
    for j, t in enumerate(sb.treaties):
        w.writerow([t, *sb.matrix[:, j].tolist()])
    if json_out is not None:
        doc = dict(meta or {})
        doc.update({
            "countries": list(sb.countries),
            "treaties": list(sb.treaties),
            "country_permutation": sb.country_perm.tolist(),
            "treaty_permutation": sb.treaty_perm.tolist(),
        })
        json.dump(doc, json_out, sort_keys=True, indent=1)
        json_out.write("\n")
