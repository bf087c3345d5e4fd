"""Closed-form limiting objects: quadratic form, covariances, coexistence weights, quartic law."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import gammainc

from .core import ModelParams, as_density, free_energy, phase_boundaries, x_from_z
from .exact import _open_out

H_TOL = 1e-9
RANK_TOL = 1e-9
# margins below this are rounding noise at the tricritical point
DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class StructuredMatrix:
    """a * A_m + b * I_m, where A_m is the m x m all-ones matrix."""

    a: float
    b: float
    m: int

    def dense(self) -> np.ndarray:
        return self.a * np.ones((self.m, self.m)) + self.b * np.eye(self.m)

    def det(self) -> float:
        return self.b ** (self.m - 1) * (self.b + self.m * self.a)


def structured_inverse(M: StructuredMatrix) -> StructuredMatrix:
    a, b, m = M.a, M.b, M.m
    if m == 1:
        if a + b == 0:
            raise ZeroDivisionError("singular 1x1 matrix")
        return StructuredMatrix(0.0, 1.0 / (a + b), 1)
    if b == 0 or b + m * a == 0:
        raise ZeroDivisionError(f"singular structured matrix a={a}, b={b}, m={m}")
    return StructuredMatrix(-a / (b * (m * a + b)), 1.0 / b, m)


@dataclass
class CovarianceMatrix:
    entries: np.ndarray
    rank: int
    degenerate: bool = False

    def numerical_rank(self, tol: float = RANK_TOL) -> int:
        return int(np.count_nonzero(np.linalg.eigvalsh(self.entries) > tol))


def _check_hyperplane(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if abs(w.sum()) > H_TOL:
        raise ValueError(f"vector {w} does not lie in the hyperplane sum(w) = 0")
    return w


def quadratic_form(x, beta: float, w) -> float:
    """sum_i (1/x_i - beta) w_i^2 for w in the zero-sum hyperplane."""
    x = as_density(x)
    if np.any(x <= 0):
        raise ValueError("quadratic form needs x in the simplex interior")
    w = _check_hyperplane(w)
    return float(np.sum((1.0 / x - beta) * w * w))


def _minimizer_shape(x, tol: float = 1e-9):
    x = as_density(x)
    lo, hi = x.min(), x.max()
    if lo <= 0:
        raise ValueError("expected a point in the simplex interior")
    if np.count_nonzero(np.abs(x - lo) <= tol) < x.size - 1:
        raise ValueError(f"point {x} does not have its minimum repeated q-1 times")
    return x, lo, hi


def is_positive_definite_on_H(x, beta: float) -> bool:
    x, lo, hi = _minimizer_shape(x)
    q = x.size
    return bool(1.0 - beta * lo > DEGENERACY_TOL and 1.0 - q * beta * lo * hi > DEGENERACY_TOL)


def covariance_matrix(x, beta: float) -> CovarianceMatrix:
    """Limiting covariance of the Gaussian fluctuations around a minimizer x.

    Built from the (q-1)x(q-1) inverse of the quadratic form in the
    coordinates other than the largest one, then completed through the
    zero-sum constraint.
    """
    x, lo, hi = _minimizer_shape(x)
    q = x.size
    if not is_positive_definite_on_H(x, beta):
        raise ValueError("quadratic form is degenerate at this (x, beta); no Gaussian limit")
    j = int(np.argmax(x))
    rest = [i for i in range(q) if i != j]
    inv = structured_inverse(StructuredMatrix(1.0 / hi - beta, 1.0 / lo - beta, q - 1)).dense()
    K = np.empty((q, q))
    K[np.ix_(rest, rest)] = inv
    col = -inv.sum(axis=1)
    K[rest, j] = col
    K[j, rest] = col
    K[j, j] = inv.sum()
    return CovarianceMatrix(K, q - 1)


def covariance_matrix_symmetric_form(x, beta: float) -> np.ndarray:
    """The same covariance written through alpha(x_i, x_j) = (1/max - beta)/(1/max(x_i, x_j) - beta)."""
    x, lo, hi = _minimizer_shape(x)
    q = x.size
    top = 1.0 / hi - beta
    alpha = top / (1.0 / np.maximum.outer(x, x) - beta)
    K = -alpha
    K[np.diag_indices(q)] = 1.0 + (q - 2) * np.diag(alpha)
    return K / (1.0 / (lo * hi) - q * beta)


def coexistence_weight(x, beta: float, lam: float = 0.0, nu: float = 0.0) -> float:
    x = as_density(x)
    q = x.size
    base = 1.0 - beta * x.min()
    if base <= 0:
        raise ValueError(f"1 - beta*min(x) = {base} must be positive")
    return float(base ** ((2 - q) / 2) * math.exp(0.5 * lam * np.dot(x, x) + nu * x[0]))


@dataclass
class CoexistenceWeights:
    taus: np.ndarray
    probs: np.ndarray


def coexistence_probabilities(minimizers, beta: float, lam: float = 0.0, nu: float = 0.0) -> CoexistenceWeights:
    """Limit probabilities of the states of a multi-minimizer set.

    ``minimizers`` is a ``MinimizerSet`` or a plain sequence of density vectors.
    """
    xs = getattr(minimizers, "minimizers", minimizers)
    if len(xs) < 2:
        raise ValueError("coexistence probabilities need at least two minimizers")
    taus = np.array([coexistence_weight(x, beta, lam, nu) for x in xs])
    return CoexistenceWeights(taus, taus / taus.sum())


class QuarticLaw:
    """Density proportional to exp(-a t^4) with a = 4(q-1)^4/3."""

    def __init__(self, q: int):
        if q < 2:
            raise ValueError("q must be >= 2")
        self.q = int(q)
        self.coefficient = 4.0 * (q - 1) ** 4 / 3.0
        self.normalization = self.coefficient**0.25 / (2.0 * gamma_fn(1.25))

    def pdf(self, t):
        return self.normalization * np.exp(-self.coefficient * np.asarray(t, dtype=float) ** 4)

    def cdf(self, t):
        # int_0^t exp(-a s^4) ds = a^{-1/4} Gamma(1/4) P(1/4, a t^4) / 4
        t = np.asarray(t, dtype=float)
        return 0.5 + 0.5 * np.sign(t) * gammainc(0.25, self.coefficient * t**4)

    def moment(self, k: int) -> float:
        if k % 2:
            return 0.0
        return gamma_fn((k + 1) / 4.0) / (gamma_fn(0.25) * self.coefficient ** (k / 4.0))

    def cdf_table(self, t_max: float | None = None, points: int = 401):
        if t_max is None:
            # tail mass beyond t_max is below 1e-12
            t_max = (28.0 / self.coefficient) ** 0.25
        t = np.linspace(-t_max, t_max, points)
        return t, self.cdf(t)


def quartic_law(q: int) -> QuarticLaw:
    return QuarticLaw(q)


def tricritical_V_covariance(q: int) -> CovarianceMatrix:
    if q < 2:
        raise ValueError("q must be >= 2")
    if q == 2:
        return CovarianceMatrix(np.zeros((2, 2)), 0, degenerate=True)
    # first row and column vanish; on coordinates 2..q the block is
    # scale * ((q-1) I - A), the pseudo-inverse of the quadratic form there
    K = np.zeros((q, q))
    scale = q / (2.0 * (q - 1) ** 2 * (q - 2))
    K[1:, 1:] = scale * StructuredMatrix(-1.0, q - 1.0, q - 1).dense()
    return CovarianceMatrix(K, q - 2)


class TaylorConstants(NamedTuple):
    quartic_coeff: float
    v_quad_coeff: float
    stated_quartic_coeff: float
    fd_quartic: float
    fd_v_quad: float | None


def _v_direction(q: int) -> np.ndarray:
    v = np.zeros(q)
    if q >= 3:
        v[1], v[2] = 1.0, -1.0
    return v


def t4_coefficient_check(q: int, t: float = 1e-2, s: float = 1e-3) -> TaylorConstants:
    """Expansion constants of the free energy at the tricritical minimizer.

    ``quartic_coeff`` is (1/12) sum_i u_i^4 / x_i^3 evaluated directly, which
    equals (4/3)(q-1)^4; ``stated_quartic_coeff`` is the (4/3)(q-1)^3 form
    found in some statements of the expansion. The finite-difference
    estimates [f(x0+tu)-f(x0)]/t^4 and [f(x0+sv)-f(x0)]/(s^2 |v|^2) are
    returned alongside.
    """
    pb = phase_boundaries(q)
    params = ModelParams(q, pb.beta_0, max(pb.h_0, 0.0))
    x0 = x_from_z(q, 0.0)
    u = np.ones(q)
    u[0] = 1.0 - q
    quartic = float(np.sum(u**4 / x0**3) / 12.0)
    v_quad = (q - 1) * (q - 2) / q
    f0 = free_energy(params, x0)
    fd4 = (free_energy(params, x0 + t * u) - f0) / t**4
    fd2 = None
    if q >= 3:
        v = _v_direction(q)
        fd2 = float((free_energy(params, x0 + s * v) - f0) / (s**2 * np.dot(v, v)))
    return TaylorConstants(quartic, v_quad, 4.0 * (q - 1) ** 3 / 3.0, fd4, fd2)


def write_matrix_csv(M, path_or_file) -> None:
    """Long-format export with 1-based (i, j, value) rows."""
    M = np.asarray(M, dtype=float)
    with _open_out(path_or_file) as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "value"])
        for (i, j), v in np.ndenumerate(M):
            w.writerow([i + 1, j + 1, repr(float(v))])


def write_cdf_table(law: QuarticLaw, path_or_file, t_max: float | None = None, points: int = 401) -> None:
    t, F = law.cdf_table(t_max, points)
    with _open_out(path_or_file) as fh:
        w = csv.writer(fh)
        w.writerow(["t", "cdf"])
        for a, b in zip(t, F):
            w.writerow([repr(float(a)), repr(float(b))])
