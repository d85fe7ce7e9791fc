"""Regenerate tests/data/connected8.g6: every connected graph on 8 vertices, up to isomorphism.

Every connected graph has a vertex whose removal leaves it connected (a leaf
of any spanning tree), so each 8-vertex graph arises by joining a new vertex
to a nonempty subset of some connected 7-vertex graph from the networkx
atlas. Candidates are bucketed by invariants and deduplicated by isomorphism
tests. The expected count is 11117.

    python3 tools/gen_connected8.py [OUTPUT]
"""

import itertools
import sys
from pathlib import Path

import networkx as nx

EXPECTED = 11117


def connected8():
    base = [g for g in nx.graph_atlas_g() if g.number_of_nodes() == 7 and nx.is_connected(g)]
    buckets: dict[tuple, list[nx.Graph]] = {}
    out = []
    for g in base:
        for r in range(1, 8):
            for subset in itertools.combinations(range(7), r):
                h = g.copy()
                h.add_edges_from((7, s) for s in subset)
                key = (h.number_of_edges(), tuple(sorted(d for _, d in h.degree())),
                       nx.weisfeiler_lehman_graph_hash(h, iterations=3))
                seen = buckets.setdefault(key, [])
                if not any(nx.is_isomorphic(h, o) for o in seen):
                    seen.append(h)
                    out.append(h)
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    path = Path(argv[0]) if argv else Path(__file__).resolve().parents[1] / "tests" / "data" / "connected8.g6"
    graphs = connected8()
    if len(graphs) != EXPECTED:
        raise SystemExit(f"generated {len(graphs)} graphs, expected {EXPECTED}")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        for g in graphs:
            fh.write(nx.to_graph6_bytes(g, header=False))
    print(f"wrote {len(graphs)} graphs to {path}")


if __name__ == "__main__":
    main()
