"""Bipartite partial configuration null model, exact co-signature p-values and
FDR filtering of country pairs."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import IO, Mapping, Sequence

import numpy as np
from scipy import special

from .bipartite import BipartiteSnapshot

log = logging.getLogger(__name__)

LAYERS = ("countries", "treaties")


@dataclass(frozen=True, eq=False)
class NullModel:
    """Independent link probabilities ``p[c, t]`` for a snapshot.

    With ``constrained_layer="countries"`` every row is ``k_c / N_T``, so the
    expected degree of each country equals its observed degree.
    """

    constrained_layer: str
    probabilities: np.ndarray

    def pair_probabilities(self, i: int, j: int) -> np.ndarray:
        """Per-treaty probability that countries *i* and *j* both sign it."""
        return self.probabilities[i] * self.probabilities[j]


def build_null_model(snap: BipartiteSnapshot, constrained_layer: str = "countries") -> NullModel:
    if snap.empty:
        raise ValueError("null model of an empty snapshot")
    if constrained_layer == "countries":
        p = snap.country_degrees / snap.n_treaties
        probs = np.repeat(p[:, None], snap.n_treaties, axis=1)
    elif constrained_layer == "treaties":
        p = snap.treaty_degrees / snap.n_countries
        probs = np.repeat(p[None, :], snap.n_countries, axis=0)
    else:
        raise ValueError(f"constrained_layer must be one of {LAYERS}")
    probs = probs.astype(float)
    probs.setflags(write=False)
    return NullModel(constrained_layer, probs)


def cooccurrence_counts(snap: BipartiteSnapshot) -> np.ndarray:
    """Symmetric matrix of co-signed treaty counts; the diagonal holds the degrees."""
    # float BLAS on 0/1 entries is exact for any realistic treaty count
    b = snap.incidence.astype(float)
    return np.rint(b @ b.T).astype(np.int64)


# ---------------------------------------------------------------------------
# Poisson-Binomial

def _check_probabilities(q) -> np.ndarray:
    q = np.asarray(q, dtype=float).ravel()
    if q.size and (np.isnan(q).any() or q.min() < 0.0 or q.max() > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    return q


def poisson_binomial_pmf(q) -> np.ndarray:
    """PMF of a sum of independent Bernoulli(q_t), by sequential convolution."""
    q = _check_probabilities(q)
    pmf = np.zeros(q.size + 1)
    pmf[0] = 1.0
    for n, qt in enumerate(q, start=1):
        head = pmf[:n + 1].copy()
        pmf[:n + 1] = head * (1.0 - qt)
        pmf[1:n + 1] += head[:n] * qt
    return pmf


def _sf_linear(q: np.ndarray, n_obs: int) -> float:
    # states 0..n_obs-1 plus an absorbing ">= n_obs" bucket; additions only
    state = np.zeros(n_obs)
    state[0] = 1.0
    tail = 0.0
    comp = 0.0
    for qt in q:
        inc = state[-1] * qt - comp
        t = tail + inc
        comp = (t - tail) - inc
        tail = t
        moved = state[:-1] * qt
        state *= 1.0 - qt
        state[1:] += moved
    return tail


def _sf_log(q: np.ndarray, n_obs: int) -> float:
    with np.errstate(divide="ignore"):
        lq = np.log(q)
        l1q = np.log1p(-q)
    state = np.full(n_obs, -np.inf)
    state[0] = 0.0
    tail = -np.inf
    for a, b in zip(lq, l1q):
        tail = np.logaddexp(tail, state[-1] + a)
        moved = state[:-1] + a
        state = state + b
        state[1:] = np.logaddexp(state[1:], moved)
    return float(tail)


def poisson_binomial_logsf(q, n_obs: int) -> float:
    """``log P(X >= n_obs)``, computed entirely in log space."""
    q = _check_probabilities(q)
    _check_count(n_obs, q.size)
    if n_obs == 0:
        return 0.0
    return _sf_log(q, n_obs)


def _check_count(n_obs: int, n: int) -> None:
    if n_obs < 0 or n_obs > n:
        raise ValueError(f"n_obs={n_obs} outside [0, {n}]")


def poisson_binomial_sf(q, n_obs: int) -> float:
    """Exact ``P(X >= n_obs)`` for ``X ~ PoissonBinomial(q)``.

    Runs in O(len(q) * n_obs). Falls back to log space when the linear
    result underflows.
    """
    q = _check_probabilities(q)
    n_obs = int(n_obs)
    _check_count(n_obs, q.size)
    if n_obs == 0:
        return 1.0
    p = _sf_linear(q, n_obs)
    if p < np.finfo(float).tiny and np.count_nonzero(q) >= n_obs:
        p = math.exp(_sf_log(q, n_obs))
    return min(max(p, 0.0), 1.0)


def poisson_binomial_sf_table(q) -> np.ndarray:
    """``P(X >= n)`` for every n in 0..len(q), from upper-tail sums of the PMF."""
    pmf = poisson_binomial_pmf(q)
    sf = np.cumsum(pmf[::-1])[::-1]
    return np.clip(sf, 0.0, 1.0)


def binomial_sf(n: int, p, k) -> np.ndarray:
    """Vectorized ``P(X >= k)`` for ``X ~ Binomial(n, p)``."""
    p = np.asarray(p, dtype=float)
    k = np.asarray(k)
    p, k = np.broadcast_arrays(p, k)
    out = np.ones(p.shape)
    pos = k > 0
    out[pos] = special.bdtrc(k[pos] - 1, n, p[pos])
    # bdtrc is not defined at p == 1; the sum is then n with certainty
    sure = pos & (p >= 1.0)
    out[sure] = (k[sure] <= n).astype(float)
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# pair tests

@dataclass(frozen=True, eq=False)
class PairTests:
    """All country pairs of a snapshot (upper triangle, row-major order)."""

    countries: tuple[str, ...]
    i: np.ndarray
    j: np.ndarray
    n_obs: np.ndarray
    p_values: np.ndarray

    def __len__(self) -> int:
        return int(self.i.size)

    def pair(self, idx: int) -> tuple[str, str]:
        return self.countries[self.i[idx]], self.countries[self.j[idx]]


def pair_tests(snap: BipartiteSnapshot, null: NullModel | None = None) -> PairTests:
    """One-tailed p-values ``P(X >= n_obs)`` for every country pair."""
    if null is None:
        null = build_null_model(snap)
    counts = cooccurrence_counts(snap)
    i, j = np.triu_indices(snap.n_countries, k=1)
    n_obs = counts[i, j]
    n_t = snap.n_treaties
    if null.constrained_layer == "countries":
        # every treaty has the same success probability for a given pair: Binomial
        p_c = null.probabilities[:, 0]
        pv = binomial_sf(n_t, p_c[i] * p_c[j], n_obs)
    else:
        # treaty-dependent but pair-independent probabilities: one shared tail table
        table = poisson_binomial_sf_table(null.probabilities[0] ** 2)
        pv = table[n_obs]
    pv = np.where(n_obs == 0, 1.0, pv)
    return PairTests(snap.countries, i, j, n_obs, pv)


# ---------------------------------------------------------------------------
# FDR

@dataclass(frozen=True, eq=False)
class ValidatedEdgeSet:
    alpha: float
    M: int
    threshold_index: int
    threshold_p: float | None
    edges: dict[tuple[str, str], float]
    snapshot_digest: str | None = None
    tests: PairTests | None = None

    @property
    def significant(self) -> bool:
        return bool(self.edges)

    def __len__(self) -> int:
        return len(self.edges)


def fdr_threshold(p_values, alpha: float) -> tuple[int, float | None]:
    """Largest 1-based index ``i`` with ``p_(i) <= i * alpha / M`` and ``p_(i)``.

    Returns ``(0, None)`` when no index qualifies.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    p = np.sort(np.asarray(p_values, dtype=float))
    m = p.size
    if m == 0:
        return 0, None
    ok = np.nonzero(p <= np.arange(1, m + 1) * alpha / m)[0]
    if ok.size == 0:
        return 0, None
    i_hat = int(ok[-1]) + 1
    return i_hat, float(p[i_hat - 1])


def fdr_filter(p_values: Mapping[tuple[str, str], float] | Sequence[float], alpha: float,
               pairs: Sequence[tuple[str, str]] | None = None) -> ValidatedEdgeSet:
    """Keep every pair whose p-value is at most the FDR threshold.

    *p_values* is either a mapping pair -> p, or a sequence aligned with
    *pairs* (pairs default to their positions).
    """
    if isinstance(p_values, Mapping):
        pairs = list(p_values)
        pv = np.array([p_values[k] for k in pairs], dtype=float)
    else:
        pv = np.asarray(p_values, dtype=float)
        pairs = list(pairs) if pairs is not None else list(range(pv.size))
    i_hat, thr = fdr_threshold(pv, alpha)
    edges = {}
    if thr is not None:
        for k in np.nonzero(pv <= thr)[0]:
            edges[pairs[k]] = float(pv[k])
    return ValidatedEdgeSet(alpha, int(pv.size), i_hat, thr, edges)


def validate(snap: BipartiteSnapshot, alpha: float = 0.01,
             constrained_layer: str = "countries") -> ValidatedEdgeSet:
    """Statistically validated projection of *snap*: null model, p-values, FDR."""
    if snap.empty:
        raise ValueError("cannot validate an empty snapshot")
    tests = pair_tests(snap, build_null_model(snap, constrained_layer))
    i_hat, thr = fdr_threshold(tests.p_values, alpha)
    edges = {}
    if thr is not None:
        for k in np.nonzero(tests.p_values <= thr)[0]:
            edges[tests.pair(k)] = float(tests.p_values[k])
    return ValidatedEdgeSet(alpha, len(tests), i_hat, thr, edges, snap.digest, tests)


def write_pair_tests(result: ValidatedEdgeSet, out: IO[str]) -> None:
    """Audit dump of every tested pair."""
    if result.tests is None:
        raise ValueError("edge set carries no pair tests")
    t = result.tests
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["country_i", "country_j", "n_obs", "p_value", "validated_flag"])
    for k in range(len(t)):
        pair = t.pair(k)
        w.writerow([pair[0], pair[1], int(t.n_obs[k]), repr(float(t.p_values[k])),
                    int(pair in result.edges)])
