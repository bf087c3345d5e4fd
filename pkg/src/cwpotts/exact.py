"""Exact finite-n laws of the color-count vector.

The count vector N has law proportional to

    n!/(N_1!...N_q!) * exp((beta/n) sum_i N_i(N_i-1)/2 + h N_1)

on the lattice of q-part compositions of n. All tables are kept in the log
domain; factorials go through ``gammaln``.
"""

from __future__ import annotations

import contextlib
import csv
import itertools
import math
import os
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy.special import gammaln

from .core import CountVector, ModelParams, as_density, free_energy

DEFAULT_LATTICE_CAP = 10**7
BRUTE_FORCE_CAP = 10**7


def lattice_cap() -> int:
    """Lattice size cap, overridable through ``POTTS_LATTICE_CAP``."""
    raw = os.environ.get("POTTS_LATTICE_CAP")
    return int(float(raw)) if raw else DEFAULT_LATTICE_CAP


def logsumexp(a) -> float:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return -math.inf
    m = float(np.max(a))
    if not math.isfinite(m):
        return m
    # np.sum reduces contiguous float arrays pairwise, in a fixed order
    return m + math.log(float(np.sum(np.exp(a - m))))


class CountLattice:
    """All q-part compositions of n, in descending lexicographic order."""

    def __init__(self, n: int, q: int):
        if n < 0 or q < 1:
            raise ValueError(f"need n >= 0 and q >= 1, got n={n}, q={q}")
        self.n = int(n)
        self.q = int(q)

    def __len__(self) -> int:
        size = math.comb(self.n + self.q - 1, self.q - 1)
        if size > np.iinfo(np.int64).max:
            raise OverflowError(f"lattice for n={self.n}, q={self.q} has {size} points")
        return size

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        def rec(rem: int, parts: int):
            if parts == 1:
                yield (rem,)
                return
            for first in range(rem, -1, -1):
                for tail in rec(rem - first, parts - 1):
                    yield (first,) + tail

        return rec(self.n, self.q)

    def array(self, cap: int | None = None) -> np.ndarray:
        size = len(self)
        cap = lattice_cap() if cap is None else cap
        if size > cap:
            raise ValueError(
                f"lattice for n={self.n}, q={self.q} has {size} points, above the cap {cap}"
            )
        rem = np.array([self.n], dtype=np.int64)
        cols = []
        for _ in range(self.q - 1):
            reps = rem + 1
            owner = np.repeat(np.arange(rem.size), reps)
            start = np.cumsum(reps) - reps
            offset = np.arange(owner.size) - start[owner]
            value = rem[owner] - offset
            cols = [c[owner] for c in cols] + [value]
            rem = rem[owner] - value
        cols.append(rem)
        return np.stack(cols, axis=1)


def enumerate_counts(n: int, q: int) -> Iterator[CountVector]:
    for c in CountLattice(n, q):
        yield CountVector(c)


def _counts(N) -> np.ndarray:
    if isinstance(N, CountVector):
        return np.asarray(N.counts, dtype=np.int64)
    return np.asarray(N, dtype=np.int64)


def log_weights(params: ModelParams, n: int, counts: np.ndarray) -> np.ndarray:
    """Vectorized log(Z * mu(N)) for an (M, q) array of count vectors."""
    c = np.asarray(counts, dtype=float)
    pair = 0.5 * (c * (c - 1.0)).sum(axis=-1)
    return (
        gammaln(n + 1.0)
        - gammaln(c + 1.0).sum(axis=-1)
        + (params.beta / n) * pair
        + params.h * c[..., 0]
    )


def log_weight(params: ModelParams, n: int, N) -> float:
    c = _counts(N)
    if c.size != params.q or c.sum() != n or np.any(c < 0):
        raise ValueError(f"{c.tolist()} is not a {params.q}-part composition of {n}")
    return float(log_weights(params, n, c[None, :])[0])


@dataclass
class ExactDistribution:
    params: ModelParams
    n: int
    support: np.ndarray
    log_weights: np.ndarray
    log_Z: float

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_Z)

    @property
    def densities(self) -> np.ndarray:
        return self.support / float(self.n)

    def to_csv(self, path_or_file) -> None:
        write_distribution_csv(self, path_or_file)


def exact_distribution(params: ModelParams, n: int, cap: int | None = None) -> ExactDistribution:
    if n < 1:
        raise ValueError("n must be >= 1")
    support = CountLattice(n, params.q).array(cap)
    lw = log_weights(params, n, support)
    return ExactDistribution(params, int(n), support, lw, logsumexp(lw))


def brute_force_log_Z(params: ModelParams, n: int, cap: int = BRUTE_FORCE_CAP) -> float:
    """log Z by direct summation over all q**n spin configurations."""
    q = params.q
    total = q**n
    if total > cap:
        raise ValueError(f"{total} spin configurations exceed the brute-force cap {cap}")
    chunk = max(1, min(total, 1 << 16))
    acc = []
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        sigma = np.empty((idx.size, n), dtype=np.int64)
        for site in range(n):
            sigma[:, site] = idx % q
            idx = idx // q
        same = np.zeros(sigma.shape[0])
        for i, j in itertools.combinations(range(n), 2):
            same += sigma[:, i] == sigma[:, j]
        energy = (params.beta / n) * same + params.h * (sigma == 0).sum(axis=1)
        acc.append(logsumexp(energy))
    return logsumexp(acc)


def stirling_remainder(params: ModelParams, n: int, N) -> float:
    """r with Z mu(N) = (1 + r) n^{-(q-1)/2} A_beta(N/n) exp(-n f(N/n)).

    A_beta(x) = (2 pi)^{-(q-1)/2} prod_i x_i^{-1/2} exp(-beta/2). The value
    does not depend on (beta, h) beyond rounding.
    """
    c = _counts(N)
    if np.any(c <= 0):
        raise ValueError("Stirling remainder needs every count >= 1")
    q = params.q
    x = c / float(n)
    log_A = -0.5 * (q - 1) * math.log(2 * math.pi) - 0.5 * np.log(x).sum() - 0.5 * params.beta
    log_approx = -0.5 * (q - 1) * math.log(n) + log_A - n * free_energy(params, x)
    return math.expm1(log_weight(params, n, c) - log_approx)


@dataclass
class GaussianStats:
    mean: np.ndarray
    covariance: np.ndarray
    marginals: list[tuple[np.ndarray, np.ndarray]]
    mass: float


@dataclass
class TricriticalStats:
    t_values: np.ndarray
    t_probs: np.ndarray
    t_mean: float
    t_var: float
    v_mean: np.ndarray
    v_covariance: np.ndarray
    t_v_correlation: np.ndarray
    mass: float


@dataclass
class FluctuationSample:
    """Rescaled fluctuation variables on the lattice, one row per support point."""

    W: np.ndarray | None
    T: np.ndarray | None
    V: np.ndarray | None
    probability: np.ndarray


def tricritical_direction(q: int) -> np.ndarray:
    u = np.ones(q)
    u[0] = 1.0 - q
    return u


def fluctuation_samples(
    dist: ExactDistribution, center, d=None, mode: str = "gaussian"
) -> FluctuationSample:
    n, q = dist.n, dist.params.q
    center = as_density(center, q)
    N = dist.support.astype(float)
    p = dist.probs
    if mode == "gaussian":
        shift = center if d is None else center + np.asarray(getattr(d, "d", d), dtype=float)
        return FluctuationSample((N - n * shift) / math.sqrt(n), None, None, p)
    if mode == "tricritical":
        u = tricritical_direction(q)
        dev = N - n * center
        T = dev @ u / (u @ u) / n**0.75
        V = (dev - np.outer(n**0.75 * T, u)) / math.sqrt(n)
        return FluctuationSample(None, T, V, p)
    raise ValueError(f"unknown mode {mode!r}")


def _window_mask(dist: ExactDistribution, point: np.ndarray, radius: float | None, strict: bool):
    if radius is None:
        return np.ones(dist.support.shape[0], dtype=bool)
    r = np.linalg.norm(dist.densities - point, axis=1)
    return r < radius if strict else r <= radius


def _weighted_cov(X: np.ndarray, p: np.ndarray):
    mean = p @ X
    C = X - mean
    return mean, (C * p[:, None]).T @ C


def fluctuation_statistics(
    dist: ExactDistribution,
    center,
    d=None,
    mode: str = "gaussian",
    window: float | None = None,
):
    """Exact moments of the rescaled fluctuations, optionally conditioned on a window.

    The window keeps the lattice points with ||N/n - center - d|| <= window.
    Returns ``GaussianStats`` or ``TricriticalStats`` according to ``mode``.
    """
    q = dist.params.q
    center = as_density(center, q)
    dvec = np.zeros(q) if d is None else np.asarray(getattr(d, "d", d), dtype=float)
    if window is not None and window <= 0:
        raise ValueError("window must be positive")
    mask = _window_mask(dist, center + dvec, window, strict=False)
    sample = fluctuation_samples(dist, center, dvec, mode)
    p = sample.probability[mask]
    mass = float(p.sum())
    if mass <= 0:
        raise ValueError("the conditioning window carries no probability mass")
    p = p / mass
    N = dist.support[mask]

    if mode == "gaussian":
        W = sample.W[mask]
        mean, cov = _weighted_cov(W, p)
        marginals = []
        for i in range(q):
            probs = np.bincount(N[:, i], weights=p, minlength=dist.n + 1)
            keep = probs > 0
            vals = (np.arange(dist.n + 1) - dist.n * (center[i] + dvec[i])) / math.sqrt(dist.n)
            marginals.append((vals[keep], probs[keep]))
        return GaussianStats(mean, cov, marginals, mass)

    T = sample.T[mask]
    V = sample.V[mask]
    # T depends on N only through the integer N.u
    key = N @ tricritical_direction(q).astype(np.int64)
    uniq, inv = np.unique(key, return_inverse=True)
    t_probs = np.bincount(inv, weights=p)
    t_vals = np.zeros(uniq.size)
    t_vals[inv] = T
    order = np.argsort(t_vals)
    t_mean = float(p @ T)
    t_var = float(p @ (T - t_mean) ** 2)
    v_mean, v_cov = _weighted_cov(V, p)
    cross = ((T - t_mean) * p) @ (V - v_mean)
    corr = np.full(q, np.nan)
    ok = np.diag(v_cov) > 1e-12
    corr[ok] = cross[ok] / np.sqrt(t_var * np.diag(v_cov)[ok])
    return TricriticalStats(
        t_vals[order], t_probs[order], t_mean, t_var, v_mean, v_cov, corr, mass
    )


def ball_probability(dist: ExactDistribution, x, eps: float) -> float:
    """Exact mass of {N : ||N/n - x||_2 < eps}."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = as_density(x, dist.params.q)
    return float(dist.probs[_window_mask(dist, x, eps, strict=True)].sum())


def default_radius(minimizers) -> float:
    """One third of the smallest distance between two distinct minimizers."""
    xs = [np.asarray(x, dtype=float) for x in minimizers]
    dists = [np.linalg.norm(a - b) for i, a in enumerate(xs) for b in xs[i + 1:]]
    if not dists:
        raise ValueError("need at least two minimizers to define a default radius")
    return min(dists) / 3.0


def ks_distance(values: np.ndarray, probs: np.ndarray, cdf: Callable) -> float:
    """Sup distance between a discrete law (sorted atoms) and a continuous cdf."""
    F = np.cumsum(probs)
    G = cdf(np.asarray(values))
    return float(max(np.max(np.abs(F - G)), np.max(np.abs(F - probs - G))))


def write_distribution_csv(dist: ExactDistribution, path_or_file) -> None:
    header = [f"n{i + 1}" for i in range(dist.params.q)] + ["log_weight", "prob"]
    probs = dist.probs
    with _open_out(path_or_file) as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row, lw, p in zip(dist.support, dist.log_weights, probs):
            w.writerow([*row.tolist(), repr(float(lw)), repr(float(p))])


def write_marginal_csv(values, probs, path_or_file) -> None:
    with _open_out(path_or_file) as fh:
        w = csv.writer(fh)
        w.writerow(["value", "prob"])
        for v, p in zip(values, probs):
            w.writerow([repr(float(v)), repr(float(p))])


def _open_out(target):
    if hasattr(target, "write"):
        return contextlib.nullcontext(target)
    return open(target, "w", newline="")
