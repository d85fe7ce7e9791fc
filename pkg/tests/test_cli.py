import csv
import filecmp
import json
import subprocess
import sys
from pathlib import Path

import pytest

from valproj.cli import main

T_HEADER = "treaty_id,title,subjects,sponsor_flag,date_signed,date_in_force\n"
E_HEADER = "treaty_id,country_id,event_kind,date\n"


def same_tree(a: Path, b: Path) -> bool:
    cmp = filecmp.dircmp(a, b)
    stack = [cmp]
    while stack:
        c = stack.pop()
        if c.left_only or c.right_only or c.funny_files:
            return False
        _, mismatch, errors = filecmp.cmpfiles(c.left, c.right, c.common_files, shallow=False)
        if mismatch or errors:
            return False
        stack.extend(c.subdirs.values())
    return True


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--seed", "42", "--blocks", "2", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def small_panel(tmp_path_factory):
    d = tmp_path_factory.mktemp("small")
    assert main(["synth", "--seed", "3", "--countries", "40", "--treaties", "80", "--out", str(d / "raw")]) == 0
    assert main(["ingest", str(d / "raw/treaties.csv"), str(d / "raw/events.csv"),
                 "--years", "1980:1990", "--out", str(d / "ing")]) == 0
    return d / "ing" / "panel.json"


def test_ingest_full_scale_summary(synth_dir, tmp_path, capsys):
    manifest = json.loads((synth_dir / "manifest.json").read_text())
    code = main(["ingest", str(synth_dir / "treaties.csv"), str(synth_dir / "events.csv"),
                 "--years", "1948:2015", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert f"treaties: {manifest['n_treaties']}" in out and "treaties: 546" in out
    assert f"countries: {manifest['n_countries']}" in out and "countries: 200" in out
    assert (tmp_path / "panel.json").exists() and (tmp_path / "rejects.csv").exists()


def test_ingest_missing_file(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert main(["ingest", str(missing), str(missing), "--out", str(tmp_path / "o")]) == 2
    assert str(missing) in capsys.readouterr().err


def test_ingest_malformed_date(tmp_path, capsys):
    (tmp_path / "t.csv").write_text(T_HEADER + "T1,x,sea,false,1990-02-30,\n")
    (tmp_path / "e.csv").write_text(E_HEADER)
    code = main(["ingest", str(tmp_path / "t.csv"), str(tmp_path / "e.csv"), "--out", str(tmp_path / "o")])
    assert code == 1
    rows = list(csv.reader(open(tmp_path / "o" / "rejects.csv")))
    assert len(rows) - 1 > 0
    assert "date_signed" in capsys.readouterr().err


def test_ingest_json_input(tmp_path, capsys):
    doc = {"treaties": [{"treaty_id": "T1", "title": "x", "subjects": "sea", "sponsor_flag": "false",
                         "date_signed": "1990-01-01"}],
           "events": [{"treaty_id": "T1", "country_id": "A", "event_kind": "ratification", "date": "1991-01-01"}]}
    (tmp_path / "d.json").write_text(json.dumps(doc))
    assert main(["ingest", str(tmp_path / "d.json"), "--out", str(tmp_path / "o")]) == 0
    assert "intervals: 1" in capsys.readouterr().out


def test_analyze_deterministic_bytes(small_panel, tmp_path):
    args = ["analyze", "--panel", str(small_panel), "--format", "csv", "--format", "json",
            "--format", "graphml", "--dump-pairs"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    assert same_tree(tmp_path / "a", tmp_path / "b")
    d = tmp_path / "a" / "all"
    header = (d / "series.csv").read_text().splitlines()[0]
    assert header == "year,metric,filter,value,significant_flag"
    assert (d / "rankings.csv").read_text().startswith("year,measure,country,rank,value\n")
    assert any((d / "years").glob("*/edges.graphml"))
    assert any((d / "years").glob("*/pairs.csv"))
    assert any((d / "years").glob("*/biadjacency.json"))


def test_analyze_six_categories(small_panel, tmp_path):
    cats = ["sea_fisheries", "species_ecosystems", "waste_hazardous", "natural_resources", "air_atmosphere", "energy"]
    cfg = {"panel": str(small_panel), "subjects": cats, "formats": ["csv"], "years": "1985:1986",
           "out": str(tmp_path / "out")}
    (tmp_path / "run.json").write_text(json.dumps(cfg))
    assert main(["analyze", "--config", str(tmp_path / "run.json")]) == 0
    dirs = sorted(p.name for p in (tmp_path / "out").iterdir() if p.is_dir())
    assert dirs == sorted(cats)


def test_analyze_toml_config_and_overrides(small_panel, tmp_path):
    (tmp_path / "run.toml").write_text(
        f'panel = "{small_panel}"\nalpha = 0.05\nyears = "1985:1987"\nformats = ["csv"]\nout = "{tmp_path / "x"}"\n')
    assert main(["analyze", "--config", str(tmp_path / "run.toml"), "--years", "1986:1986",
                 "--out", str(tmp_path / "y")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "y" / "all" / "series.csv")))
    assert {r["year"] for r in rows} == {"1986"}
    assert json.loads((tmp_path / "y" / "run.json").read_text())["alpha"] == 0.05


@pytest.mark.parametrize("doc,field", [
    ({"alpah": 0.1}, "alpah"),
    ({"alpha": 1.5}, "alpha"),
    ({"years": "2000:1990"}, "years"),
    ({"subjects": ["space"]}, "subjects"),
    ({"formats": ["xlsx"]}, "formats"),
    ({"threads": 0}, "threads"),
])
def test_invalid_config_field(small_panel, tmp_path, capsys, doc, field):
    (tmp_path / "c.json").write_text(json.dumps({"panel": str(small_panel), **doc}))
    assert main(["analyze", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == 1
    assert repr(field) in capsys.readouterr().err


def test_analyze_missing_panel(tmp_path, capsys):
    assert main(["analyze", "--panel", str(tmp_path / "none.json"), "--out", str(tmp_path / "o")]) == 2
    assert "none.json" in capsys.readouterr().err


def test_air_without_sponsored_never_significant(tmp_path):
    # every air treaty is sponsored, so the filtered snapshots are empty
    spec = {"seed": 5, "n_countries": 40, "n_treaties": 80,
            "sponsored_share_by_subject": {"air_atmosphere": 1.0}}
    (tmp_path / "spec.json").write_text(json.dumps(spec))
    assert main(["synth", "--spec", str(tmp_path / "spec.json"), "--out", str(tmp_path / "raw")]) == 0
    assert main(["ingest", str(tmp_path / "raw/treaties.csv"), str(tmp_path / "raw/events.csv"),
                 "--out", str(tmp_path / "ing")]) == 0
    cfg = {"panel": str(tmp_path / "ing/panel.json"), "subject": "air_atmosphere", "exclude_sponsored": True,
           "formats": ["csv"], "out": str(tmp_path / "out")}
    (tmp_path / "run.json").write_text(json.dumps(cfg))
    assert main(["analyze", "--config", str(tmp_path / "run.json")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "out" / "air_atmosphere__no_un" / "series.csv")))
    assert rows and all(r["significant_flag"] == "0" for r in rows)
    assert {r["value"] for r in rows if r["metric"] == "n_treaties"} == {"0.0"}


def test_synth_regenerates_identical_files(tmp_path):
    for name in ("a", "b"):
        assert main(["synth", "--seed", "42", "--blocks", "2", "--countries", "30", "--treaties", "50",
                     "--out", str(tmp_path / name)]) == 0
    assert same_tree(tmp_path / "a", tmp_path / "b")


def test_synth_invalid_spec(tmp_path):
    (tmp_path / "s.json").write_text(json.dumps({"within_rate": 2}))
    assert main(["synth", "--spec", str(tmp_path / "s.json"), "--out", str(tmp_path / "o")]) == 1
    (tmp_path / "s.toml").write_text("seed = [")
    assert main(["synth", "--spec", str(tmp_path / "s.toml"), "--out", str(tmp_path / "o")]) == 1


def test_export_subcommands(small_panel, tmp_path):
    for what in ("biadjacency", "pairs", "edges"):
        assert main(["export", what, "--panel", str(small_panel), "--year", "1988", "--out", str(tmp_path)]) == 0
    assert main(["export", "edges", "--panel", str(small_panel), "--year", "1988", "--format", "graphml",
                 "--out", str(tmp_path)]) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["all_1988_biadjacency.csv", "all_1988_biadjacency.json", "all_1988_edges.csv",
                     "all_1988_edges.graphml", "all_1988_pairs.csv"]
    assert main(["export", "edges", "--panel", str(small_panel), "--year", "1800", "--out", str(tmp_path)]) == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "valproj.cli", "ingest", str(tmp_path / "x.csv"), "e.csv",
                           "--out", str(tmp_path)], capture_output=True, text=True,
                          env={"VALPROJ_LOG": "DEBUG", "PATH": ""})
    assert proc.returncode == 2
    assert "x.csv" in proc.stderr
