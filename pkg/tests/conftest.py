import datetime as dt
import io

import numpy as np
import pytest

from valproj import synth
from valproj.bipartite import BipartiteSnapshot
from valproj.ingest import (TreatyRecord, build_panel, derive_membership_intervals, load_subject_map,
                            parse_records)
from valproj.projection import CooperationNetwork


def make_snapshot(incidence, countries=None, treaties=None, year=2000):
    b = np.asarray(incidence, dtype=np.uint8)
    countries = countries or [f"c{i:02d}" for i in range(b.shape[0])]
    treaties = treaties or [f"t{j:02d}" for j in range(b.shape[1])]
    return BipartiteSnapshot.from_incidence(b, countries, treaties, year)


def make_network(edges, nodes=None, year=2000):
    if nodes is None:
        nodes = sorted({x for a, b, _ in edges for x in (a, b)})
    return CooperationNetwork.from_edges(nodes, edges, year)


def random_network(rng, n, p=0.4, weights="uniform"):
    nodes = [f"n{i:02d}" for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                if weights == "uniform":
                    w = float(rng.uniform(0.1, 3.0))
                elif weights == "equal":
                    w = 1.0
                else:
                    w = float(rng.choice(weights))
                edges.append((nodes[i], nodes[j], w))
    return CooperationNetwork.from_edges(nodes, edges)


def treaty(tid, year=1990, subjects=("sea",), sponsored=False):
    return TreatyRecord(tid, f"Agreement {tid}", frozenset(subjects), sponsored, dt.date(year, 1, 1))


def csv_streams(treaty_rows, event_rows):
    t = "treaty_id,title,subjects,sponsor_flag,date_signed,date_in_force\n" + "".join(r + "\n" for r in treaty_rows)
    e = "treaty_id,country_id,event_kind,date\n" + "".join(r + "\n" for r in event_rows)
    return io.StringIO(t), io.StringIO(e)


def panel_from_rows(treaty_rows, event_rows, years, policy="ratification_based"):
    t, e = csv_streams(treaty_rows, event_rows)
    parsed = parse_records(t, "csv", events=e)
    intervals, _ = derive_membership_intervals(parsed.catalog, parsed.events, policy)
    return build_panel(parsed.catalog, intervals, years, load_subject_map())


@pytest.fixture(scope="session")
def synth_default():
    return synth.generate(synth.SynthSpec())


@pytest.fixture(scope="session")
def synth_panel(synth_default):
    data = synth_default
    catalog = {t.treaty_id: t for t in data.treaties}
    intervals, _ = derive_membership_intervals(catalog, data.events)
    return build_panel(catalog, intervals, (data.spec.first_year, data.spec.last_year), load_subject_map())
