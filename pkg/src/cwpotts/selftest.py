"""Fast invariant checks across all modules, run by ``cwpotts selftest``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from . import exact, limits, phase, rcgraph
from .core import ModelParams, critical_point_from_z, phase_boundaries, x_from_z


@dataclass
class Check:
    name: str
    ok: bool
    detail: str


def _exact_vs_brute(rng):
    worst = 0.0
    for q, n in [(2, 8), (3, 6)]:
        params = ModelParams(q, rng.uniform(0, 4), rng.uniform(0, 1))
        a = exact.exact_distribution(params, n).log_Z
        b = exact.brute_force_log_Z(params, n)
        worst = max(worst, abs(a - b) / abs(b))
    return worst < 1e-10, f"max relative log_Z gap {worst:.2e}"


def _lattice_size(rng):
    ok = all(len(exact.CountLattice(n, q).array()) == math.comb(n + q - 1, q - 1) for n, q in [(7, 3), (5, 4), (12, 2)])
    return ok, "lattice sizes match binomial counts"


def _structured(rng):
    worst = 0.0
    for _ in range(50):
        m = int(rng.integers(1, 9))
        M = limits.StructuredMatrix(rng.uniform(-2, 2), rng.uniform(0.5, 3), m)
        D = M.dense()
        det = np.linalg.det(D)
        worst = max(worst, abs(M.det() - det) / max(abs(det), 1e-300))
        inv = limits.structured_inverse(M).dense()
        worst = max(worst, float(np.max(np.abs(D @ inv - np.eye(m)))))
    return worst < 1e-9, f"max error {worst:.2e}"


def _covariance(rng):
    for z in (0.05, 0.2, 0.3):
        cp = critical_point_from_z(3, z)
        for x in (x_from_z(3, z), x_from_z(3, -z)):
            K = limits.covariance_matrix(x, cp.beta_z)
            E = K.entries
            sym = limits.covariance_matrix_symmetric_form(x, cp.beta_z)
            if not (
                np.allclose(E, E.T, atol=1e-12)
                and np.max(np.abs(E.sum(axis=1))) < 1e-9
                and np.linalg.eigvalsh(E).min() > -1e-9
                and K.numerical_rank() == 2
                and np.max(np.abs(E - sym)) < 1e-12 * np.max(np.abs(E))
            ):
                return False, f"covariance invariant broken at z={z}"
    return True, "symmetric, PSD, zero row sums, rank q-1, both forms agree"


def _coexistence(rng):
    for z in rng.uniform(0.01, 0.32, 10):
        a, b = x_from_z(3, z), x_from_z(3, -z)
        if abs(a.min() * a.max() - b.min() * b.max()) > 1e-12:
            return False, f"min*max differs across the pair at z={z}"
    cp = critical_point_from_z(3, 0.2)
    probs = limits.coexistence_probabilities(phase.find_global_minimizers(cp.params()), cp.beta_z).probs
    return abs(probs.sum() - 1) < 1e-12 and abs(probs[0] - 0.391) < 1e-3, f"z=0.2 probabilities {probs.round(4).tolist()}"


def _quartic(rng):
    law = limits.quartic_law(3)
    mass = 2 * quad(law.pdf, 0, np.inf, epsabs=1e-12)[0]
    return abs(mass - 1) < 1e-8 and law.cdf(0.0) == 0.5, f"mass {mass:.12f}"


def _tricritical_v(rng):
    ok = all(limits.tricritical_V_covariance(q).numerical_rank() == q - 2 for q in (3, 4, 5))
    return ok, "V covariance rank q-2"


def _phase(rng):
    cp = critical_point_from_z(3, 0.2)
    ms = phase.find_global_minimizers(cp.params())
    zs = sorted(2 * x[0] - 1 for x in ms.minimizers)
    res = max(phase.stationarity_residual(cp.params(), x) for x in ms.minimizers)
    pb = phase_boundaries(3)
    n_c = len(phase.find_global_minimizers(ModelParams(3, pb.beta_c, 0.0)))
    ok = abs(zs[0] + 0.2) < 1e-8 and abs(zs[1] - 0.2) < 1e-8 and res < 1e-10 and n_c == 4
    return ok, f"z pair {zs}, residual {res:.1e}, {n_c} states at beta_c"


def _rc_identities(rng):
    worst = max(abs(rcgraph.zrc_exact(rng.uniform(0, 0.9), 1, int(rng.integers(1, 200)))) for _ in range(10))
    p = rng.uniform(0, 0.99)
    rt = abs(rcgraph.p_of_beta(rcgraph.beta_of_p(p, 50), 50) - p)
    g = [rcgraph.giant_component_probability(3, gm) for gm in (-5.0, 0.0, 5.0)]
    ok = worst <= 1e-9 and rt < 1e-14 and g[0] < g[1] < g[2]
    return ok, f"q=1 log Z^RC max {worst:.1e}, round trip {rt:.1e}"


def _union_find(rng):
    sampler = rcgraph.CountSampler(exact.exact_distribution(ModelParams(3, 2.0), 60))
    r1, s1, f1 = rcgraph.run_replica(sampler, 0.05, seed=7, replica=3)
    r2, s2, f2 = rcgraph.run_replica(sampler, 0.05, seed=7, replica=3)
    same = np.array_equal(s1.colors, s2.colors) and np.array_equal(f1.parent, f2.parent) and r1 == r2
    sizes = f1.component_sizes()
    ok = same and sizes.sum() == 60 and sizes.max() == f1.largest
    return ok, "component sizes sum to n; replicas reproducible"


CHECKS: list[tuple[str, Callable]] = [
    ("exact log Z vs brute force", _exact_vs_brute),
    ("lattice size", _lattice_size),
    ("structured determinant and inverse", _structured),
    ("covariance invariants", _covariance),
    ("coexistence weights", _coexistence),
    ("quartic law normalization", _quartic),
    ("tricritical V rank", _tricritical_v),
    ("phase structure", _phase),
    ("random-cluster identities", _rc_identities),
    ("union-find and determinism", _union_find),
]


def run_all(seed: int = 0) -> list[Check]:
    out = []
    for name, fn in CHECKS:
        rng = np.random.default_rng(seed)
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(Check(name, bool(ok), detail))
    return out
