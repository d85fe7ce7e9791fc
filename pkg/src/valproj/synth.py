"""Seeded synthetic affiliation data with planted block structure."""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping

import numpy as np

from .bipartite import BipartiteSnapshot
from .ingest import (CATEGORIES, EVENT_COLUMNS, TREATY_COLUMNS, MembershipEvent, TreatyRecord,
                     load_subject_map)


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 42
    n_countries: int = 200
    n_treaties: int = 546
    first_year: int = 1948
    last_year: int = 2015
    n_blocks: int = 2
    within_rate: float = 0.6    # join probability for a treaty of the country's own block
    cross_rate: float = 0.02    # join probability for another block's treaty
    small_share: float = 0.3    # treaties restricted to a handful of same-block countries
    small_size: tuple[int, int] = (2, 6)
    ratification_rate: float = 0.95
    withdrawal_rate: float = 0.01
    founding_share: float = 0.6  # countries active from first_year; others enter later
    last_entry_year: int = 1995
    sponsored_share: float = 0.2
    sponsored_share_by_subject: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        errors = []
        if self.n_countries < 2:
            errors.append("n_countries must be >= 2")
        if self.n_treaties < 1:
            errors.append("n_treaties must be >= 1")
        if self.last_year < self.first_year:
            errors.append("last_year must be >= first_year")
        if not 1 <= self.n_blocks <= self.n_countries:
            errors.append("n_blocks must lie in [1, n_countries]")
        for name in ("within_rate", "cross_rate", "small_share", "ratification_rate",
                     "withdrawal_rate", "founding_share", "sponsored_share"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                errors.append(f"{name} must lie in [0, 1]")
        lo, hi = self.small_size
        if not 2 <= lo <= hi:
            errors.append("small_size must satisfy 2 <= lo <= hi")
        for cat, v in dict(self.sponsored_share_by_subject).items():
            if cat not in CATEGORIES:
                errors.append(f"sponsored_share_by_subject: unknown category {cat!r}")
            elif not 0.0 <= v <= 1.0:
                errors.append(f"sponsored_share_by_subject[{cat}] must lie in [0, 1]")
        if errors:
            raise ValueError("; ".join(errors))

    @classmethod
    def from_mapping(cls, doc: Mapping) -> "SynthSpec":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValueError(f"unknown synth field(s): {', '.join(unknown)}")
        doc = dict(doc)
        if "small_size" in doc:
            doc["small_size"] = tuple(doc["small_size"])
        if "sponsored_share_by_subject" in doc:
            doc["sponsored_share_by_subject"] = dict(doc["sponsored_share_by_subject"])
        return cls(**doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["small_size"] = list(self.small_size)
        d["sponsored_share_by_subject"] = dict(sorted(self.sponsored_share_by_subject.items()))
        return d


@dataclass
class SynthData:
    spec: SynthSpec
    treaties: list[TreatyRecord]
    events: list[MembershipEvent]
    country_blocks: dict[str, int]
    treaty_blocks: dict[str, int]

    def manifest(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "n_treaties": len(self.treaties),
            "n_countries": len({e.country_id for e in self.events}),
            "n_events": len(self.events),
            "country_blocks": self.country_blocks,
        }


def _tags_by_category() -> dict[str, list[str]]:
    out: dict[str, list[str]] = {c: [] for c in CATEGORIES}
    for tag, cats in sorted(load_subject_map().items()):
        if len(cats) == 1:
            out[cats[0]].append(tag)
    return out


def _date(rng: np.random.Generator, year: int) -> dt.date:
    return dt.date(year, 1, 1) + dt.timedelta(days=int(rng.integers(0, 365)))


def generate(spec: SynthSpec = SynthSpec()) -> SynthData:
    rng = np.random.default_rng(spec.seed)
    nc, nt = spec.n_countries, spec.n_treaties
    span = spec.last_year - spec.first_year + 1
    countries = [f"C{i:03d}" for i in range(nc)]
    c_block = np.arange(nc) % spec.n_blocks
    founding = rng.random(nc) < spec.founding_share
    entry = np.where(founding, spec.first_year,
                     rng.integers(spec.first_year, max(spec.first_year, spec.last_entry_year) + 1, nc))

    # treaty activity grows over time: signing-year density rises linearly
    t_year = np.sort(spec.first_year + np.floor(span * np.sqrt(rng.random(nt))).astype(int))
    t_year = np.minimum(t_year, spec.last_year)
    t_block = rng.integers(0, spec.n_blocks, nt)
    small = rng.random(nt) < spec.small_share

    tags = _tags_by_category()
    cat_weights = np.array([0.3, 0.22, 0.2, 0.15, 0.08, 0.05])
    treaties = []
    for j in range(nt):
        cat = CATEGORIES[rng.choice(len(CATEGORIES), p=cat_weights)]
        subj = {tags[cat][rng.integers(len(tags[cat]))]}
        cats = {cat}
        if rng.random() < 0.3:
            other = CATEGORIES[rng.integers(len(CATEGORIES))]
            subj.add(tags[other][rng.integers(len(tags[other]))])
            cats.add(other)
        # a per-subject share applies to every treaty touching that subject
        overrides = [spec.sponsored_share_by_subject[c] for c in cats if c in spec.sponsored_share_by_subject]
        share = max(overrides) if overrides else spec.sponsored_share
        signed = _date(rng, int(t_year[j]))
        in_force = None if rng.random() < 0.1 else signed + dt.timedelta(days=int(rng.integers(180, 1500)))
        treaties.append(TreatyRecord(f"T{j:04d}", f"Synthetic agreement {j}", frozenset(subj),
                                     bool(rng.random() < share), signed, in_force))

    member = np.zeros((nc, nt), dtype=bool)
    for j in range(nt):
        if small[j]:
            pool = np.nonzero(c_block == t_block[j])[0]
            lo, hi = spec.small_size
            size = min(int(rng.integers(lo, hi + 1)), pool.size)
            member[rng.choice(pool, size=size, replace=False), j] = True
        else:
            p = np.where(c_block == t_block[j], spec.within_rate, spec.cross_rate)
            member[:, j] = rng.random(nc) < p
    # every country belongs to at least one treaty of its own block
    for i in np.nonzero(~member.any(axis=1))[0]:
        own = np.nonzero(t_block == c_block[i])[0]
        member[i, rng.choice(own if own.size else np.arange(nt))] = True

    # each country ratifies its first treaty so it appears under either policy
    first_membership = member.argmax(axis=1)
    events: list[MembershipEvent] = []
    for i, j in zip(*np.nonzero(member)):
        cid, rec = countries[i], treaties[j]
        start = max(int(t_year[j]), int(entry[i]))
        forced = j == first_membership[i]
        if start == t_year[j]:
            sign = rec.date_signed
            events.append(MembershipEvent(rec.treaty_id, cid, "signature", sign))
        else:
            sign = _date(rng, start)
        if forced or rng.random() < spec.ratification_rate:
            lag = int(rng.geometric(0.5)) - 1
            ryear = min(start + lag, spec.last_year)
            rdate = max(sign, _date(rng, ryear))
            kind = ("ratification", "acceptance", "approval")[int(rng.choice(3, p=[0.8, 0.1, 0.1]))]
            events.append(MembershipEvent(rec.treaty_id, cid, kind, rdate))
            if not forced and rng.random() < spec.withdrawal_rate and ryear + 1 <= spec.last_year:
                wyear = int(rng.integers(ryear + 1, spec.last_year + 1))
                events.append(MembershipEvent(rec.treaty_id, cid, "withdrawal", _date(rng, wyear)))
    events.sort(key=lambda e: (e.date, e.treaty_id, e.country_id, e.kind))
    return SynthData(
        spec,
        treaties,
        events,
        {c: int(b) for c, b in zip(countries, c_block)},
        {t.treaty_id: int(b) for t, b in zip(treaties, t_block)},
    )


def write(data: SynthData, out_dir: str | Path) -> dict[str, Path]:
    """Write treaties.csv, events.csv and manifest.json into *out_dir*."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"treaties": out / "treaties.csv", "events": out / "events.csv", "manifest": out / "manifest.json"}
    with open(paths["treaties"], "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=TREATY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for rec in data.treaties:
            w.writerow(rec.to_row())
    with open(paths["events"], "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=EVENT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for ev in data.events:
            w.writerow(ev.to_row())
    with open(paths["manifest"], "w", encoding="utf-8") as fh:
        json.dump(data.manifest(), fh, sort_keys=True, indent=1)
        fh.write("\n")
    return paths


def shuffle_preserving_degrees(snap: BipartiteSnapshot, rng: np.random.Generator) -> np.ndarray:
    """Incidence where each country keeps its degree but picks treaties uniformly at random."""
    out = np.zeros(snap.incidence.shape, dtype=np.uint8)
    for i, k in enumerate(snap.country_degrees):
        out[i, rng.choice(snap.n_treaties, size=int(k), replace=False)] = 1
    return out


def unstructured_incidence(degrees, n_treaties: int, rng: np.random.Generator) -> np.ndarray:
    """Country rows with the given degrees and uniformly random treaty choices."""
    out = np.zeros((len(degrees), n_treaties), dtype=np.uint8)
    for i, k in enumerate(degrees):
        out[i, rng.choice(n_treaties, size=int(k), replace=False)] = 1
    return out
