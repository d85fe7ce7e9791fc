"""Treaty catalog and membership-event parsing, interval derivation and the
country-treaty-year panel."""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

CATEGORIES = (
    "sea_fisheries",
    "species_ecosystems",
    "waste_hazardous",
    "natural_resources",
    "air_atmosphere",
    "energy",
)
EVENT_KINDS = ("signature", "ratification", "acceptance", "approval", "withdrawal")
RATIFYING_KINDS = frozenset({"ratification", "acceptance", "approval"})
POLICIES = ("ratification_based", "signature_based")

TREATY_COLUMNS = ("treaty_id", "title", "subjects", "sponsor_flag", "date_signed", "date_in_force")
EVENT_COLUMNS = ("treaty_id", "country_id", "event_kind", "date")

PANEL_FORMAT = "valproj.panel/1"


class ParseError(ValueError):
    """Fatal input error. ``rejects`` holds every row collected before giving up."""

    def __init__(self, message: str, source: str, line: int | None, column: str | None,
                 rejects: Sequence["Reject"] = ()):
        where = f"{source}"
        if line is not None:
            where += f" row {line}"
        if column is not None:
            where += f" column {column!r}"
        super().__init__(f"{where}: {message}")
        self.source = source
        self.line = line
        self.column = column
        self.rejects = list(rejects)


class PanelError(ValueError):
    pass


@dataclass(frozen=True)
class TreatyRecord:
    treaty_id: str
    title: str
    subjects: frozenset[str]
    sponsored: bool
    date_signed: dt.date
    date_in_force: dt.date | None = None

    def to_row(self) -> dict[str, str]:
        return {
            "treaty_id": self.treaty_id,
            "title": self.title,
            "subjects": ";".join(sorted(self.subjects)),
            "sponsor_flag": "true" if self.sponsored else "false",
            "date_signed": self.date_signed.isoformat(),
            "date_in_force": self.date_in_force.isoformat() if self.date_in_force else "",
        }


@dataclass(frozen=True)
class MembershipEvent:
    treaty_id: str
    country_id: str
    kind: str
    date: dt.date

    def to_row(self) -> dict[str, str]:
        return {
            "treaty_id": self.treaty_id,
            "country_id": self.country_id,
            "event_kind": self.kind,
            "date": self.date.isoformat(),
        }


@dataclass(frozen=True)
class MembershipInterval:
    """Membership over the year-ends ``start_year <= y < end_year``."""

    treaty_id: str
    country_id: str
    start_year: int
    end_year: int | None = None

    def __post_init__(self):
        if self.end_year is not None and self.end_year <= self.start_year:
            raise ValueError(f"empty interval {self}")

    def contains(self, year: int) -> bool:
        return self.start_year <= year and (self.end_year is None or year < self.end_year)


@dataclass(frozen=True)
class Reject:
    source: str
    line: int | None
    record: Mapping[str, object]
    reason: str


@dataclass
class ParsedRecords:
    catalog: dict[str, TreatyRecord]
    events: list[MembershipEvent]
    rejects: list[Reject]
    n_rows: int = 0


# ---------------------------------------------------------------------------
# field parsing

class _FieldError(ValueError):
    def __init__(self, column: str, message: str):
        super().__init__(message)
        self.column = column


def _parse_date(value: object, column: str, optional: bool = False) -> dt.date | None:
    if value is None or (isinstance(value, str) and value.strip() == ""):
        if optional:
            return None
        raise _FieldError(column, "missing date")
    try:
        return dt.date.fromisoformat(str(value).strip())
    except ValueError:
        raise _FieldError(column, f"malformed date {value!r}") from None


def _parse_flag(value: object, column: str) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "t", "yes", "y"):
        return True
    if text in ("0", "false", "f", "no", "n", ""):
        return False
    raise _FieldError(column, f"malformed boolean {value!r}")


def _parse_key(value: object, column: str) -> str:
    text = "" if value is None else str(value).strip()
    if not text:
        raise _FieldError(column, "empty key")
    return text


def _parse_subjects(value: object) -> frozenset[str]:
    if value is None:
        return frozenset()
    if isinstance(value, str):
        items = value.split(";")
    else:
        items = list(value)
    return frozenset(s.strip() for s in items if str(s).strip())


def _treaty_from_row(row: Mapping[str, object]) -> TreatyRecord:
    rec = TreatyRecord(
        treaty_id=_parse_key(row.get("treaty_id"), "treaty_id"),
        title=str(row.get("title") or ""),
        subjects=_parse_subjects(row.get("subjects")),
        sponsored=_parse_flag(row.get("sponsor_flag"), "sponsor_flag"),
        date_signed=_parse_date(row.get("date_signed"), "date_signed"),
        date_in_force=_parse_date(row.get("date_in_force"), "date_in_force", optional=True),
    )
    return rec


def _event_from_row(row: Mapping[str, object]) -> MembershipEvent:
    return MembershipEvent(
        treaty_id=_parse_key(row.get("treaty_id"), "treaty_id"),
        country_id=_parse_key(row.get("country_id"), "country_id"),
        kind=str(row.get("event_kind") or "").strip().lower(),
        date=_parse_date(row.get("date"), "date"),
    )


class _Collector:
    """Accumulates accepted records and rejects across both inputs."""

    def __init__(self):
        self.catalog: dict[str, TreatyRecord] = {}
        self.events: list[MembershipEvent] = []
        self.rejects: list[Reject] = []
        self.n_rows = 0
        self.fatal: ParseError | None = None
        self._seen_events: set[tuple[str, str, str, dt.date]] = set()

    def _field_error(self, source, line, row, err: _FieldError):
        self.rejects.append(Reject(source, line, dict(row), f"{err.column}: {err}"))
        if self.fatal is None:
            self.fatal = ParseError(str(err), source, line, err.column)

    def add_treaty(self, source: str, line: int, row: Mapping[str, object]):
        self.n_rows += 1
        try:
            rec = _treaty_from_row(row)
        except _FieldError as err:
            self._field_error(source, line, row, err)
            return
        if rec.date_in_force is not None and rec.date_in_force < rec.date_signed:
            self.rejects.append(Reject(source, line, dict(row), "date_in_force earlier than date_signed"))
            return
        if rec.treaty_id in self.catalog:
            self.rejects.append(Reject(source, line, dict(row), "duplicate treaty_id"))
            return
        self.catalog[rec.treaty_id] = rec

    def add_event(self, source: str, line: int, row: Mapping[str, object]):
        self.n_rows += 1
        try:
            ev = _event_from_row(row)
        except _FieldError as err:
            self._field_error(source, line, row, err)
            return
        if ev.kind not in EVENT_KINDS:
            self.rejects.append(Reject(source, line, dict(row), f"unknown event_kind {ev.kind!r}"))
            return
        if ev.treaty_id not in self.catalog:
            self.rejects.append(Reject(source, line, dict(row), f"unknown treaty_id {ev.treaty_id!r}"))
            return
        key = (ev.country_id, ev.treaty_id, ev.kind, ev.date)
        if key in self._seen_events:
            self.rejects.append(Reject(source, line, dict(row), "duplicate event"))
            return
        self._seen_events.add(key)
        self.events.append(ev)

    def finish(self) -> ParsedRecords:
        if self.fatal is not None:
            self.fatal.rejects = list(self.rejects)
            raise self.fatal
        return ParsedRecords(self.catalog, self.events, self.rejects, self.n_rows)


def _text(stream: IO) -> IO[str]:
    if isinstance(stream, (io.TextIOBase,)) or isinstance(stream, io.StringIO):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8", newline="")


def _read_csv(collector: _Collector, stream: IO, source: str, columns: Sequence[str], add):
    reader = csv.DictReader(_text(stream))
    header = reader.fieldnames
    if header is None:
        raise ParseError("missing header", source, 1, None)
    missing = [c for c in columns if c not in header]
    if missing:
        raise ParseError(f"missing column(s) {', '.join(missing)}", source, 1, missing[0])
    for row in reader:
        if None in row:
            collector.rejects.append(Reject(source, reader.line_num, {k: v for k, v in row.items() if k},
                                            "too many fields"))
            collector.n_rows += 1
            if collector.fatal is None:
                collector.fatal = ParseError("too many fields", source, reader.line_num, None)
            continue
        add(source, reader.line_num, row)


def parse_records(stream: IO, fmt: str = "csv", events: IO | None = None,
                  sources: tuple[str, str] = ("treaties", "events")) -> ParsedRecords:
    """Parse a treaty catalog and its membership events.

    For ``fmt="csv"`` *stream* is the treaties file and *events* the events
    file. For ``fmt="json"`` *stream* is a single document holding
    ``"treaties"`` and ``"events"`` arrays.

    Malformed headers or field values raise :class:`ParseError`; unknown event
    kinds, unknown treaties and duplicates become row-level rejects.
    """
    col = _Collector()
    if fmt == "csv":
        if events is None:
            raise ValueError("csv input needs both a treaties and an events stream")
        _read_csv(col, stream, sources[0], TREATY_COLUMNS, col.add_treaty)
        _read_csv(col, events, sources[1], EVENT_COLUMNS, col.add_event)
    elif fmt == "json":
        source = sources[0]
        try:
            doc = json.load(_text(stream))
        except json.JSONDecodeError as err:
            raise ParseError(f"malformed JSON: {err.msg}", source, err.lineno, None) from None
        if not isinstance(doc, dict) or "treaties" not in doc or "events" not in doc:
            raise ParseError("document must hold 'treaties' and 'events' arrays", source, None, None)
        for name, columns, add in (("treaties", TREATY_COLUMNS, col.add_treaty),
                                   ("events", EVENT_COLUMNS, col.add_event)):
            required = [c for c in columns if c != "date_in_force"]
            for i, obj in enumerate(doc[name], start=1):
                if not isinstance(obj, dict):
                    raise ParseError("expected an object", f"{source}.{name}", i, None)
                missing = [c for c in required if c not in obj]
                if missing:
                    raise ParseError(f"missing field(s) {', '.join(missing)}", f"{source}.{name}", i, missing[0])
                add(f"{source}.{name}", i, obj)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return col.finish()


def read_records(path: str | Path, events_path: str | Path | None = None) -> ParsedRecords:
    """Parse from files: a ``.json`` document, or a treaties CSV plus an events CSV."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        with open(path, "rb") as fh:
            return parse_records(fh, "json", sources=(path.name, path.name))
    if events_path is None:
        raise ValueError("csv input needs an events file")
    events_path = Path(events_path)
    with open(path, "rb") as tf, open(events_path, "rb") as ef:
        return parse_records(tf, "csv", events=ef, sources=(path.name, events_path.name))


def write_rejects(rejects: Iterable[Reject], stream: IO[str]) -> int:
    """Write the rejects report: source, line, the original fields, reason."""
    rejects = list(rejects)
    fields: list[str] = []
    for r in rejects:
        for k in r.record:
            if k not in fields:
                fields.append(k)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["source", "line", *fields, "reason"])
    for r in rejects:
        writer.writerow([r.source, "" if r.line is None else r.line,
                         *("" if r.record.get(k) is None else r.record.get(k) for k in fields), r.reason])
    return len(rejects)


# ---------------------------------------------------------------------------
# intervals

def derive_membership_intervals(
    catalog: Mapping[str, TreatyRecord],
    events: Iterable[MembershipEvent],
    policy: str = "ratification_based",
) -> tuple[list[MembershipInterval], list[Reject]]:
    """Turn membership events into end-of-year membership intervals.

    Under ``ratification_based`` the interval starts at the earliest
    ratification, acceptance or approval; under ``signature_based`` at the
    earliest joining event of any kind (normally the signature). A withdrawal
    strictly after that event closes the interval at the withdrawal year.
    Returns the intervals and the diagnostics for withdrawals that could not
    be applied.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    by_pair: dict[tuple[str, str], list[MembershipEvent]] = defaultdict(list)
    for ev in events:
        if ev.treaty_id not in catalog:
            raise ValueError(f"event references unknown treaty {ev.treaty_id!r}")
        by_pair[(ev.treaty_id, ev.country_id)].append(ev)

    intervals: list[MembershipInterval] = []
    rejects: list[Reject] = []
    for (treaty, country), evs in sorted(by_pair.items()):
        evs.sort(key=lambda e: (e.date, EVENT_KINDS.index(e.kind)))
        if policy == "ratification_based":
            joins = [e for e in evs if e.kind in RATIFYING_KINDS]
        else:
            joins = [e for e in evs if e.kind != "withdrawal"]
        withdrawals = [e for e in evs if e.kind == "withdrawal"]
        join = joins[0] if joins else None

        end: MembershipEvent | None = None
        for w in withdrawals:
            if join is None:
                reason = f"withdrawal without a prior joining event under {policy}"
            elif w.date <= join.date:
                reason = f"withdrawal on {w.date} not after joining event on {join.date}"
            elif end is not None:
                reason = "additional withdrawal ignored"
            else:
                end = w
                continue
            rejects.append(Reject("events", None, w.to_row(), reason))

        if join is None:
            continue
        start_year = join.date.year
        end_year = end.date.year if end is not None else None
        if end_year is not None and end_year <= start_year:
            # joined and left within the same calendar year: never a member at a year end
            rejects.append(Reject("events", None, end.to_row(),
                                  f"joined and withdrew within {start_year}; no year-end membership"))
            continue
        intervals.append(MembershipInterval(treaty, country, start_year, end_year))
    return intervals, rejects


# ---------------------------------------------------------------------------
# panel

def load_subject_map(path: str | Path | None = None) -> dict[str, tuple[str, ...]]:
    """Load a raw-tag -> category mapping (JSON). Defaults to the bundled map."""
    if path is None:
        text = resources.files("valproj").joinpath("data/subjects.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return normalize_subject_map(json.loads(text))


def normalize_subject_map(raw: Mapping[str, str | Sequence[str]]) -> dict[str, tuple[str, ...]]:
    out: dict[str, tuple[str, ...]] = {}
    for tag, cats in raw.items():
        cats = (cats,) if isinstance(cats, str) else tuple(cats)
        unknown = [c for c in cats if c not in CATEGORIES]
        if unknown:
            raise PanelError(f"subject map: tag {tag!r} maps to unknown categories {unknown}")
        out[str(tag)] = tuple(sorted(set(cats)))
    return out


@dataclass(frozen=True)
class Panel:
    """Immutable country-treaty-year panel.

    Membership at a year is evaluated at the end of that year.
    """

    first_year: int
    last_year: int
    intervals: tuple[MembershipInterval, ...]
    catalog: Mapping[str, TreatyRecord]
    subject_map: Mapping[str, tuple[str, ...]]
    countries: tuple[str, ...] = field(init=False)
    treaty_ids: tuple[str, ...] = field(init=False)
    _index: dict = field(init=False, repr=False, compare=False)
    _arrays: tuple = field(init=False, repr=False, compare=False)
    _categories: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        countries = tuple(sorted({iv.country_id for iv in self.intervals}))
        treaty_ids = tuple(sorted(self.catalog))
        c_pos = {c: i for i, c in enumerate(countries)}
        t_pos = {t: i for i, t in enumerate(treaty_ids)}
        index: dict[tuple[str, str], list[MembershipInterval]] = defaultdict(list)
        for iv in self.intervals:
            index[(iv.country_id, iv.treaty_id)].append(iv)
        no_end = np.iinfo(np.int64).max
        arrays = (
            np.array([c_pos[iv.country_id] for iv in self.intervals], dtype=np.int64),
            np.array([t_pos[iv.treaty_id] for iv in self.intervals], dtype=np.int64),
            np.array([iv.start_year for iv in self.intervals], dtype=np.int64),
            np.array([no_end if iv.end_year is None else iv.end_year for iv in self.intervals], dtype=np.int64),
        )
        cats = {}
        for tid, rec in self.catalog.items():
            cats[tid] = frozenset(c for s in rec.subjects for c in self.subject_map[s])
        object.__setattr__(self, "countries", countries)
        object.__setattr__(self, "treaty_ids", treaty_ids)
        object.__setattr__(self, "_index", dict(index))
        object.__setattr__(self, "_arrays", arrays)
        object.__setattr__(self, "_categories", cats)

    @property
    def years(self) -> range:
        return range(self.first_year, self.last_year + 1)

    def membership(self, country: str, treaty: str, year: int) -> bool:
        return any(iv.contains(year) for iv in self._index.get((country, treaty), ()))

    def categories(self, treaty: str) -> frozenset[str]:
        return self._categories[treaty]

    def members_at(self, year: int) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays (into ``countries`` and ``treaty_ids``) of memberships held at *year*."""
        c, t, start, end = self._arrays
        mask = (start <= year) & (year < end)
        return c[mask], t[mask]

    def member_count(self, year: int) -> int:
        return int(self.members_at(year)[0].size)

    # -- canonical JSON layout ---------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": PANEL_FORMAT,
            "years": [self.first_year, self.last_year],
            "subject_map": {k: list(v) for k, v in sorted(self.subject_map.items())},
            "treaties": [self.catalog[t].to_row() for t in self.treaty_ids],
            "intervals": [
                [iv.treaty_id, iv.country_id, iv.start_year, iv.end_year]
                for iv in sorted(self.intervals, key=lambda iv: (iv.treaty_id, iv.country_id, iv.start_year))
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Panel":
        if doc.get("format") != PANEL_FORMAT:
            raise PanelError(f"not a panel archive (format {doc.get('format')!r})")
        catalog = {}
        for row in doc["treaties"]:
            rec = _treaty_from_row(row)
            catalog[rec.treaty_id] = rec
        intervals = [MembershipInterval(t, c, s, e) for t, c, s, e in doc["intervals"]]
        first, last = doc["years"]
        return build_panel(catalog, intervals, (first, last), doc["subject_map"])

    @classmethod
    def loads(cls, text: str) -> "Panel":
        return cls.from_dict(json.loads(text))


def build_panel(
    catalog: Mapping[str, TreatyRecord],
    intervals: Iterable[MembershipInterval],
    years: tuple[int, int] | range,
    subject_map: Mapping[str, str | Sequence[str]],
) -> Panel:
    """Assemble the panel; *years* is an inclusive ``(first, last)`` pair or a range."""
    if isinstance(years, range):
        if len(years) == 0:
            raise PanelError("empty year range")
        first, last = years[0], years[-1]
    else:
        first, last = years
    if last < first:
        raise PanelError(f"empty year range {first}:{last}")
    smap = normalize_subject_map(subject_map)
    unmapped = sorted({s for rec in catalog.values() for s in rec.subjects if s not in smap})
    if unmapped:
        raise PanelError(f"unmapped subject tag(s): {', '.join(map(repr, unmapped))}")
    intervals = tuple(intervals)
    orphans = sorted({iv.treaty_id for iv in intervals if iv.treaty_id not in catalog})
    if orphans:
        raise PanelError(f"intervals reference unknown treaties: {', '.join(orphans)}")
    return Panel(first, last, intervals, dict(catalog), smap)
