"""Fortuin-Kasteleyn coupling of the mean-field Potts model with the random-cluster graph.

A Potts configuration is drawn exactly: the color counts come from the
enumerated count law, the colors are then shuffled uniformly over the
vertices. Conditionally on the colors, every pair of equally colored vertices
is joined independently with probability p = 1 - exp(-beta/n). The resulting
graph is a sample of the random-cluster model G(n, p, q) on the complete graph.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .core import CountVector, ModelParams, phase_boundaries
from .exact import ExactDistribution, _open_out, exact_distribution, logsumexp


def beta_of_p(p: float, n: int) -> float:
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p must lie in [0, 1), got {p}")
    return -n * math.log1p(-p)


def p_of_beta(beta: float, n: int) -> float:
    if not beta >= 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    return -math.expm1(-beta / n)


@dataclass(frozen=True)
class RCParams:
    p: float
    q: int
    n: int
    gamma: float = 0.0

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"q must be an integer >= 1, got {self.q!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")

    @classmethod
    def from_beta_gamma(cls, q: int, n: int, beta: float, gamma: float = 0.0) -> "RCParams":
        """Edge probability p_n = beta/n + gamma/n^2."""
        p = beta / n + gamma / n**2
        if not 0.0 <= p < 1.0:
            raise ValueError(f"beta/n + gamma/n^2 = {p} is not a probability below 1")
        return cls(p, q, n, gamma)

    @property
    def beta(self) -> float:
        return beta_of_p(self.p, self.n)


class CountSampler:
    """Exact inverse-CDF sampling of the count vector from an enumerated law."""

    def __init__(self, dist: ExactDistribution):
        self.dist = dist
        cdf = np.cumsum(dist.probs)
        self._cdf = cdf / cdf[-1]

    def __call__(self, rng: np.random.Generator) -> CountVector:
        i = int(np.searchsorted(self._cdf, rng.random(), side="right"))
        i = min(i, self._cdf.size - 1)
        return CountVector(tuple(self.dist.support[i].tolist()))


def sample_counts(dist: ExactDistribution | CountSampler, rng: np.random.Generator) -> CountVector:
    sampler = dist if isinstance(dist, CountSampler) else CountSampler(dist)
    return sampler(rng)


@dataclass
class Coloring:
    colors: np.ndarray  # 0-based color index per vertex
    q: int

    @property
    def n(self) -> int:
        return int(self.colors.size)

    def counts(self) -> CountVector:
        return CountVector(tuple(np.bincount(self.colors, minlength=self.q).tolist()))


def assemble_coloring(N: CountVector | Sequence[int], rng: np.random.Generator) -> Coloring:
    counts = N.counts if isinstance(N, CountVector) else tuple(int(c) for c in N)
    colors = np.repeat(np.arange(len(counts)), counts)
    rng.shuffle(colors)
    return Coloring(colors, len(counts))


class ComponentForest:
    """Union-find over n vertices with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = np.arange(n)
        self.size = np.ones(n, dtype=np.int64)
        self.components = n
        self.largest = 1 if n else 0

    @property
    def n(self) -> int:
        return int(self.parent.size)

    def find(self, i: int) -> int:
        parent = self.parent
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return int(root)

    def union(self, i: int, j: int) -> bool:
        a, b = self.find(i), self.find(j)
        if a == b:
            return False
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        self.components -= 1
        if self.size[a] > self.largest:
            self.largest = int(self.size[a])
        return True

    def component_sizes(self) -> np.ndarray:
        roots = np.array([self.find(i) for i in range(self.n)], dtype=np.int64)
        return np.bincount(roots, minlength=self.n)[np.unique(roots)]


def _decode_pairs(k: np.ndarray):
    """Map pair indices 0..m(m-1)/2-1 to (i, j) with i < j, ordered by j then i."""
    j = np.floor((1.0 + np.sqrt(1.0 + 8.0 * k)) / 2.0).astype(np.int64)
    # guard the float square root at perfect squares
    j -= (j * (j - 1) // 2) > k
    j += ((j + 1) * j // 2) <= k
    i = k - j * (j - 1) // 2
    return i, j


def fk_percolate(sigma: Coloring, p: float, rng: np.random.Generator) -> ComponentForest:
    """Open each same-color edge independently with probability p.

    Each color class of size m receives Binomial(m(m-1)/2, p) open edges,
    placed on distinct pairs chosen uniformly; the work is proportional to the
    number of open edges rather than to n^2.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    forest = ComponentForest(sigma.n)
    order = np.argsort(sigma.colors, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(np.bincount(sigma.colors, minlength=sigma.q))])
    for c in range(sigma.q):
        members = order[bounds[c]:bounds[c + 1]]
        m = members.size
        pairs = m * (m - 1) // 2
        if pairs == 0:
            continue
        k = int(rng.binomial(pairs, p))
        if k == 0:
            continue
        chosen = np.arange(pairs) if k == pairs else rng.choice(pairs, size=k, replace=False)
        i, j = _decode_pairs(np.asarray(chosen, dtype=np.int64))
        for a, b in zip(members[i].tolist(), members[j].tolist()):
            forest.union(a, b)
    return forest


def giant_fraction(forest: ComponentForest) -> float:
    return forest.largest / forest.n


def giant_component_probability(q: int, gamma: float) -> float:
    """Limit probability that G(n, beta_c/n + gamma/n^2, q) has a component of linear size."""
    if int(q) != q or q <= 2:
        raise ValueError("the giant-component probability is defined for integer q > 2")
    bc = phase_boundaries(q).beta_c
    ratio = (1.0 - bc / q) / (1.0 - bc / (q * (q - 1)))
    expo = -(bc**2 / 4.0 + gamma / 2.0) * (q - 2) ** 2 / (q * (q - 1))
    return 1.0 / (1.0 + ratio ** ((2 - q) / 2.0) * math.exp(expo) / q)


def erdos_renyi_giant(c: float) -> float:
    """Positive root of x = 1 - exp(-c x), zero when c <= 1."""
    if c <= 1.0:
        return 0.0
    return brentq(lambda x: x + math.expm1(-c * x), 1e-12, 1.0, xtol=1e-15)


def expected_giant_fraction(q: int, beta: float) -> float:
    """Giant fraction inside the ordered state at (beta, 0) with p = beta/n."""
    if q == 1:
        return erdos_renyi_giant(beta)
    zc = (q - 2) / q if q > 2 else 0.0
    if q > 2 and beta <= phase_boundaries(q).beta_c:
        top = (1.0 + zc) / 2.0
    else:
        from .phase import find_global_minimizers

        top = float(max(x.max() for x in find_global_minimizers(ModelParams(q, beta)).minimizers))
    return top * erdos_renyi_giant(beta * top)


def _potts_log_Z_zero_field(q: int, beta: float, n: int, cap: int | None = None) -> float:
    if q == 1:
        return beta / n * (n * (n - 1) / 2.0)
    return exact_distribution(ModelParams(q, beta, 0.0), n, cap).log_Z


def zrc_exact(p: float, q: int, n: int, cap: int | None = None) -> float:
    """log of the random-cluster partition function on K_n through the Potts sum."""
    if int(q) != q or q < 1:
        raise ValueError(f"q must be an integer >= 1, got {q!r}")
    beta = beta_of_p(p, n)
    return _potts_log_Z_zero_field(int(q), beta, n, cap) - 0.5 * beta * (n - 1)


def zrc_asymptotic(beta: float, gamma: float, q: int, n: int) -> float:
    """Leading large-n form of log Z^RC at p_n = beta/n + gamma/n^2, for beta below beta_c."""
    if int(q) != q or q < 1:
        raise ValueError(f"q must be an integer >= 1, got {q!r}")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if q >= 2 and beta >= phase_boundaries(q).beta_c:
        raise ValueError(f"beta={beta} is not below beta_c({q})")
    if q == 1:
        # every (q-1) factor vanishes
        return 0.0
    return (
        -0.5 * (q - 1) * math.log1p(-beta / q)
        + n * math.log(q)
        - (2.0 * n * beta + 2.0 * gamma + beta**2) / 4.0 * (q - 1) / q
    )


def ll_discrepancy_ratio(beta: float, q: int) -> float:
    if beta < 0 or q < 1:
        raise ValueError("need beta >= 0 and q >= 1")
    return math.exp(-0.75 + beta / 2.0 + beta**2 / (4.0 * q))


@dataclass
class ReplicaResult:
    seed: int
    replica: int
    counts: tuple[int, ...]
    giant_fraction: float
    component_count: int


@dataclass
class GiantSummary:
    q: int
    n: int
    gamma: float
    p: float
    replicas: int
    threshold: float
    estimate: float
    standard_error: float
    prediction: float
    results: list[ReplicaResult] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("results")
        return d


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(replica)])


def run_replica(
    sampler: CountSampler, p: float, seed: int, replica: int
) -> tuple[ReplicaResult, Coloring, ComponentForest]:
    rng = replica_rng(seed, replica)
    N = sampler(rng)
    sigma = assemble_coloring(N, rng)
    forest = fk_percolate(sigma, p, rng)
    res = ReplicaResult(seed, replica, N.counts, giant_fraction(forest), forest.components)
    return res, sigma, forest


def giant_threshold(q: int, beta: float, floor: float = 0.1, fraction: float = 0.3) -> float:
    return max(floor, fraction * expected_giant_fraction(q, beta))


def giant_monte_carlo(
    q: int,
    n: int,
    gamma: float = 0.0,
    replicas: int = 400,
    seed: int = 0,
    threshold: float | None = None,
    threads: int = 1,
    cap: int | None = None,
) -> GiantSummary:
    """Replica Monte Carlo of the giant-component frequency at p_n = beta_c/n + gamma/n^2."""
    bc = phase_boundaries(q).beta_c
    rc = RCParams.from_beta_gamma(q, n, bc, gamma)
    sampler = CountSampler(exact_distribution(ModelParams(q, rc.beta, 0.0), n, cap))
    if threshold is None:
        threshold = giant_threshold(q, bc)

    def one(r):
        return run_replica(sampler, rc.p, seed, r)[0]

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(replicas)))
    else:
        results = [one(r) for r in range(replicas)]
    hits = sum(r.giant_fraction >= threshold for r in results)
    est = hits / replicas
    se = math.sqrt(est * (1.0 - est) / replicas)
    return GiantSummary(
        q, n, gamma, rc.p, replicas, threshold, est, se, giant_component_probability(q, gamma), results
    )


def write_replica_csv(summary: GiantSummary, path_or_file) -> None:
    q = summary.q
    with _open_out(path_or_file) as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "replica", *[f"N{i + 1}" for i in range(q)], "giant_fraction", "component_count"])
        for r in summary.results:
            w.writerow([r.seed, r.replica, *r.counts, repr(r.giant_fraction), r.component_count])


def summary_json(summary: GiantSummary) -> str:
    return json.dumps(summary.to_dict(), indent=2)


def rc_brute_force_log_Z(p: float, q: float, n: int) -> float:
    """log sum over all edge subsets of K_n of p^|w| (1-p)^(E-|w|) q^C(w)."""
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    E = len(edges)
    if E > 20:
        raise ValueError("brute force over edge subsets is limited to n <= 6")
    terms = []
    for mask in range(1 << E):
        forest = ComponentForest(n)
        k = 0
        for e, (i, j) in enumerate(edges):
            if mask >> e & 1:
                forest.union(i, j)
                k += 1
        terms.append(_log_edge_weight(p, k, E) + forest.components * math.log(q))
    return logsumexp(terms)


def rc_component_count_law(p: float, q: float, n: int) -> np.ndarray:
    """Exact law of the number of clusters, indexed 0..n, by brute force over edge subsets."""
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    E = len(edges)
    if E > 20:
        raise ValueError("brute force over edge subsets is limited to n <= 6")
    logw = np.full(n + 1, -np.inf)
    for mask in range(1 << E):
        forest = ComponentForest(n)
        k = 0
        for e, (i, j) in enumerate(edges):
            if mask >> e & 1:
                forest.union(i, j)
                k += 1
        c = forest.components
        logw[c] = np.logaddexp(logw[c], _log_edge_weight(p, k, E) + c * math.log(q))
    return np.exp(logw - logsumexp(logw[np.isfinite(logw)]))


def _log_edge_weight(p: float, k: int, E: int) -> float:
    out = 0.0
    if k:
        out += k * math.log(p)
    if E - k:
        out += (E - k) * math.log1p(-p)
    return out
