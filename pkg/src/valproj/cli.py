"""Command line entry point: ``valproj {ingest,analyze,synth,export}``.

Exit codes: 0 success, 1 configuration or data error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

from . import metrics as M
from . import synth as S
from .bipartite import SnapshotFilter, biadjacency_sorted, snapshot, write_biadjacency
from .ingest import (CATEGORIES, Panel, PanelError, ParseError, build_panel,
                     derive_membership_intervals, load_subject_map, read_records, write_rejects)
from .projection import project, write_edges_csv, write_graphml
from .temporal import SERIES_METRICS, analyze_years, build_series, distributions, rankings_for, tau_series
from .validation import LAYERS, validate, write_pair_tests

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger("valproj")

EXIT_OK, EXIT_DATA, EXIT_IO = 0, 1, 2
FORMATS = ("csv", "json", "graphml")
POLICY_ALIASES = {"ratification": "ratification_based", "signature": "signature_based",
                  "ratification_based": "ratification_based", "signature_based": "signature_based"}


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field {field_name!r}: {message}")
        self.field = field_name


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def parse_years(text) -> tuple[int, int]:
    if isinstance(text, (list, tuple)) and len(text) == 2:
        a, b = text
    else:
        parts = str(text).split(":")
        if len(parts) != 2:
            raise ValueError(f"expected A:B, got {text!r}")
        a, b = parts
    a, b = int(a), int(b)
    if b < a:
        raise ValueError(f"empty year range {a}:{b}")
    return a, b


def load_document(path: str | Path) -> dict:
    path = Path(path)
    raw = path.read_bytes()
    try:
        if path.suffix.lower() == ".toml":
            return tomllib.loads(raw.decode("utf-8"))
        return json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as err:
        raise ConfigError(str(path), f"cannot parse: {err}") from None


# ---------------------------------------------------------------------------
# run configuration

@dataclass
class RunConfig:
    panel: str | None = None
    treaties: str | None = None
    events: str | None = None
    data: str | None = None
    policy: str = "ratification"
    subject_map: str | None = None
    years: tuple[int, int] | None = None
    alpha: float = 0.01
    subjects: list[str] = field(default_factory=lambda: ["all"])
    exclude_sponsored: bool = False
    metrics: list[str] | None = None
    out: str = "valproj-out"
    formats: list[str] = field(default_factory=lambda: ["csv", "json"])
    threads: int = 1
    constrained_layer: str = "countries"
    biadjacency: bool = True
    dump_pairs: bool = False

    @classmethod
    def from_mapping(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        doc = dict(doc)
        if "subject" in doc:
            if "subjects" in doc:
                raise ConfigError("subject", "give either subject or subjects, not both")
            doc["subjects"] = doc.pop("subject")
        for key in doc:
            if key not in known:
                raise ConfigError(key, "unknown field")
        cfg = cls(**doc)
        cfg.check()
        return cfg

    def check(self) -> None:
        if self.policy not in POLICY_ALIASES:
            raise ConfigError("policy", f"unknown policy {self.policy!r}")
        if self.years is not None:
            try:
                self.years = parse_years(self.years)
            except (TypeError, ValueError) as err:
                raise ConfigError("years", str(err)) from None
        try:
            self.alpha = float(self.alpha)
        except (TypeError, ValueError):
            raise ConfigError("alpha", f"not a number: {self.alpha!r}") from None
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha", "must lie in (0, 1)")
        if isinstance(self.subjects, str):
            self.subjects = [self.subjects]
        for s in self.subjects:
            if s != "all" and s not in CATEGORIES:
                raise ConfigError("subjects", f"unknown subject {s!r}; choose from all, {', '.join(CATEGORIES)}")
        if not isinstance(self.exclude_sponsored, bool):
            raise ConfigError("exclude_sponsored", "must be a boolean")
        if self.metrics is not None:
            bad = [m for m in self.metrics if m not in SERIES_METRICS]
            if bad:
                raise ConfigError("metrics", f"unknown metric(s) {bad}")
        if isinstance(self.formats, str):
            self.formats = [self.formats]
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise ConfigError("formats", f"unknown format(s) {bad}")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ConfigError("threads", "must be a positive integer")
        if self.constrained_layer not in LAYERS:
            raise ConfigError("constrained_layer", f"must be one of {LAYERS}")
        if self.panel is None and self.data is None and (self.treaties is None or self.events is None):
            raise ConfigError("panel", "give a panel archive, a JSON data file, or treaties and events CSVs")

    def filters(self) -> list[SnapshotFilter]:
        seen = []
        for s in self.subjects:
            f = SnapshotFilter(None if s == "all" else s, self.exclude_sponsored)
            if f not in seen:
                seen.append(f)
        return seen

    def to_dict(self) -> dict:
        # out and threads never change results, so they stay out of the record
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("out", "threads")}
        d["years"] = list(self.years) if self.years else None
        return d


# ---------------------------------------------------------------------------
# shared steps

def ingest_files(treaties: str, events: str | None, policy: str, subject_map: str | None = None,
                 years: tuple[int, int] | None = None):
    for p in (treaties, events, subject_map):
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(f"no such file: {p}")
    parsed = read_records(treaties, events)
    intervals, diag = derive_membership_intervals(parsed.catalog, parsed.events, POLICY_ALIASES[policy])
    if years is None:
        ys = [r.date_signed.year for r in parsed.catalog.values()] + [e.date.year for e in parsed.events]
        if not ys:
            raise PanelError("no records to infer a year range from; pass --years")
        years = (min(ys), max(ys))
    panel = build_panel(parsed.catalog, intervals, years, load_subject_map(subject_map))
    return panel, parsed, parsed.rejects + diag


def load_panel(path: str | Path) -> Panel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        return Panel.loads(path.read_text(encoding="utf-8"))
    except (ValueError, KeyError, TypeError) as err:
        raise PanelError(f"{path}: not a valid panel archive ({err})") from None


def _open(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="", encoding="utf-8")


# ---------------------------------------------------------------------------
# commands

def cmd_ingest(args) -> int:
    out = Path(args.out)
    try:
        panel, parsed, rejects = ingest_files(args.treaties, args.events, args.policy,
                                              args.subject_map, parse_years(args.years) if args.years else None)
    except ParseError as err:
        out.mkdir(parents=True, exist_ok=True)
        with _open(out / "rejects.csv") as fh:
            n = write_rejects(err.rejects, fh)
        print(f"error: {err}", file=sys.stderr)
        print(f"rejects: {n} (see {out / 'rejects.csv'})", file=sys.stderr)
        return EXIT_DATA
    out.mkdir(parents=True, exist_ok=True)
    (out / "panel.json").write_text(panel.dumps(), encoding="utf-8")
    with _open(out / "rejects.csv") as fh:
        write_rejects(rejects, fh)
    countries = {e.country_id for e in parsed.events}
    print(f"treaties: {len(parsed.catalog)}")
    print(f"countries: {len(countries)}")
    print(f"events: {len(parsed.events)}")
    print(f"intervals: {len(panel.intervals)}")
    print(f"years: {panel.first_year}:{panel.last_year}")
    print(f"rejects: {len(rejects)}")
    return EXIT_OK


def _config_from_args(args) -> RunConfig:
    doc = {}
    if args.config:
        if not Path(args.config).exists():
            raise FileNotFoundError(f"no such file: {args.config}")
        doc = load_document(args.config)
        base = Path(args.config).parent
        for key in ("panel", "treaties", "events", "data", "subject_map"):
            if isinstance(doc.get(key), str) and not os.path.isabs(doc[key]):
                doc[key] = str(base / doc[key])
    overrides = {
        "panel": args.panel, "years": args.years, "alpha": args.alpha, "subjects": args.subject,
        "policy": args.policy, "out": args.out, "formats": args.format, "threads": args.threads,
        "metrics": args.metrics.split(",") if args.metrics else None,
    }
    for k, v in overrides.items():
        if v is not None:
            doc[k] = v
    if args.exclude_sponsored:
        doc["exclude_sponsored"] = True
    if args.dump_pairs:
        doc["dump_pairs"] = True
    return RunConfig.from_mapping(doc)


def run_analysis(cfg: RunConfig) -> list[Path]:
    """Execute a configured run and return the written directories."""
    if cfg.panel is not None:
        panel = load_panel(cfg.panel)
    else:
        src = cfg.data if cfg.data is not None else cfg.treaties
        panel, _, _ = ingest_files(src, None if cfg.data else cfg.events, cfg.policy, cfg.subject_map)
    years = range(*(cfg.years[0], cfg.years[1] + 1)) if cfg.years else panel.years
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run.json").write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    written = []
    for flt in cfg.filters():
        results = analyze_years(panel, years, flt, cfg.alpha, cfg.constrained_layer, cfg.threads)
        written.append(_write_filter(out / flt.label, flt, results, cfg))
    return written


def _write_filter(d: Path, flt: SnapshotFilter, results, cfg: RunConfig) -> Path:
    d.mkdir(parents=True, exist_ok=True)
    series = build_series(results, cfg.metrics)
    if "csv" in cfg.formats:
        with _open(d / "series.csv") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["year", "metric", "filter", "value", "significant_flag"])
            for name, s in series.items():
                for y, v, sig in zip(s.years, s.values, s.significant):
                    w.writerow([y, name, flt.label, _fmt(v), int(sig)])
    if "json" in cfg.formats:
        doc = {"filter": flt.to_dict(), "alpha": cfg.alpha,
               "series": {name: {"years": list(s.years),
                                 "values": [None if math.isnan(v) else v for v in s.values],
                                 "significant": list(s.significant)} for name, s in series.items()}}
        (d / "series.json").write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")

    rankings = rankings_for(results)
    with _open(d / "rankings.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "measure", "country", "rank", "value"])
        for rk in rankings:
            for c, r, v in zip(rk.countries, rk.ranks, rk.values):
                w.writerow([rk.year, rk.measure, c, _fmt(r), _fmt(v)])
    with _open(d / "tau.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "measure", "tau", "n_common"])
        for year, measure, tau, n in tau_series(rankings):
            w.writerow([year, measure, _fmt(tau), n])
    with _open(d / "distributions.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "kind", "bin_lo", "bin_hi", "count", "mean", "variance"])
        for kind in ("degree", "strength"):
            vals = {r.year: getattr(r.active, kind + "s") for r in results
                    if r.active is not None and r.active.n_nodes}
            for year, h in distributions(vals, kind).items():
                for lo, hi, c in zip(h.lo, h.hi, h.counts):
                    w.writerow([year, kind, _fmt(float(lo)), _fmt(float(hi)), c, _fmt(h.mean), _fmt(h.variance)])
    with _open(d / "correlations.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "x", "y", "r", "p_value"])
        for r in results:
            for (xa, ya), (rv, pv) in r.correlations.items():
                w.writerow([r.year, xa, ya, _fmt(rv), _fmt(pv)])

    for r in results:
        if r.snapshot.empty:
            continue
        yd = d / "years" / str(r.year)
        yd.mkdir(parents=True, exist_ok=True)
        if cfg.biadjacency:
            sb = biadjacency_sorted(r.snapshot)
            with _open(yd / "biadjacency.csv") as fc, _open(yd / "biadjacency.json") as fj:
                write_biadjacency(sb, fc, fj, {"year": r.year, "filter": flt.to_dict()})
        if r.network is None:
            continue
        if "csv" in cfg.formats:
            with _open(yd / "edges.csv") as fh:
                write_edges_csv(r.network, fh)
            if r.node_metrics is not None:
                with _open(yd / "nodes.csv") as fh:
                    M.write_node_metrics(r.node_metrics, fh)
        if "graphml" in cfg.formats:
            write_graphml(r.network, yd / "edges.graphml")
        if "json" in cfg.formats:
            doc = {"year": r.year, "significant": r.significant, "filter": flt.to_dict(),
                   "fdr_threshold_index": r.validated.threshold_index,
                   "fdr_threshold_p": r.validated.threshold_p}
            doc.update({k: (None if isinstance(v, float) and math.isnan(v) else v)
                        for k, v in r.values.items()})
            (yd / "graph.json").write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
        if cfg.dump_pairs and r.validated is not None:
            with _open(yd / "pairs.csv") as fh:
                write_pair_tests(r.validated, fh)
    return d


def cmd_analyze(args) -> int:
    cfg = _config_from_args(args)
    dirs = run_analysis(cfg)
    for d in dirs:
        print(d)
    return EXIT_OK


def cmd_synth(args) -> int:
    doc = {}
    if args.spec:
        if not Path(args.spec).exists():
            raise FileNotFoundError(f"no such file: {args.spec}")
        doc = load_document(args.spec)
    for key, val in (("seed", args.seed), ("n_blocks", args.blocks), ("n_countries", args.countries),
                     ("n_treaties", args.treaties), ("sponsored_share", args.sponsored_share)):
        if val is not None:
            doc[key] = val
    try:
        spec = S.SynthSpec.from_mapping(doc)
    except (TypeError, ValueError) as err:
        raise ConfigError("spec", str(err)) from None
    data = S.generate(spec)
    paths = S.write(data, args.out)
    m = data.manifest()
    print(f"treaties: {m['n_treaties']}")
    print(f"countries: {m['n_countries']}")
    print(f"events: {m['n_events']}")
    for p in paths.values():
        print(p)
    return EXIT_OK


def cmd_export(args) -> int:
    panel = load_panel(args.panel)
    flt = SnapshotFilter(args.subject, args.exclude_sponsored)
    snap = snapshot(panel, args.year, flt)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{flt.label}_{args.year}"
    if args.what == "biadjacency":
        if snap.empty:
            raise PanelError(f"snapshot {args.year} ({flt.label}) is empty")
        with _open(out / f"{stem}_biadjacency.csv") as fc, _open(out / f"{stem}_biadjacency.json") as fj:
            write_biadjacency(biadjacency_sorted(snap), fc, fj, {"year": args.year, "filter": flt.to_dict()})
        return EXIT_OK
    if snap.n_countries < 2:
        raise PanelError(f"snapshot {args.year} ({flt.label}) has fewer than two countries")
    validated = validate(snap, args.alpha)
    if args.what == "pairs":
        with _open(out / f"{stem}_pairs.csv") as fh:
            write_pair_tests(validated, fh)
    else:
        net = project(snap, validated)
        if "graphml" in (args.format or ["csv"]):
            write_graphml(net, out / f"{stem}_edges.graphml")
        if "csv" in (args.format or ["csv"]):
            with _open(out / f"{stem}_edges.csv") as fh:
                write_edges_csv(net, fh)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="valproj", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    pi = sub.add_parser("ingest", help="parse records into a panel archive")
    pi.add_argument("treaties", help="treaties CSV, or a JSON document with treaties and events")
    pi.add_argument("events", nargs="?", help="events CSV (omit for JSON input)")
    pi.add_argument("--policy", choices=["ratification", "signature"], default="ratification")
    pi.add_argument("--subject-map", help="JSON mapping raw subject tag -> category")
    pi.add_argument("--years", help="inclusive year range A:B (default: from the data)")
    pi.add_argument("--out", required=True, help="output directory")
    pi.set_defaults(func=cmd_ingest)

    pa = sub.add_parser("analyze", help="run the per-year pipeline and write series")
    pa.add_argument("--config", help="TOML or JSON run configuration")
    pa.add_argument("--panel", help="panel archive produced by ingest")
    pa.add_argument("--years")
    pa.add_argument("--alpha", type=float)
    pa.add_argument("--subject", action="append", help="category name or 'all' (repeatable)")
    pa.add_argument("--exclude-sponsored", action="store_true")
    pa.add_argument("--policy", choices=["ratification", "signature"])
    pa.add_argument("--metrics", help="comma-separated series metrics")
    pa.add_argument("--out")
    pa.add_argument("--format", action="append", choices=FORMATS)
    pa.add_argument("--threads", type=int)
    pa.add_argument("--dump-pairs", action="store_true")
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser("synth", help="generate a synthetic affiliation dataset")
    ps.add_argument("--spec", help="TOML or JSON generator spec")
    ps.add_argument("--seed", type=int)
    ps.add_argument("--blocks", type=int)
    ps.add_argument("--countries", type=int)
    ps.add_argument("--treaties", type=int)
    ps.add_argument("--sponsored-share", type=float)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_synth)

    pe = sub.add_parser("export", help="export one snapshot: bi-adjacency, pair tests or edge list")
    pe.add_argument("what", choices=["biadjacency", "pairs", "edges"])
    pe.add_argument("--panel", required=True)
    pe.add_argument("--year", type=int, required=True)
    pe.add_argument("--subject", choices=CATEGORIES)
    pe.add_argument("--exclude-sponsored", action="store_true")
    pe.add_argument("--alpha", type=float, default=0.01)
    pe.add_argument("--format", action="append", choices=["csv", "graphml"])
    pe.add_argument("--out", required=True)
    pe.set_defaults(func=cmd_export)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("VALPROJ_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ParseError, PanelError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
