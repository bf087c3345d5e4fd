"""Domain types, free energy and closed-form phase-boundary quantities.

The free energy of the mean-field Potts model on the simplex is

    f(x) = sum_i x_i log x_i - (beta/2) sum_i x_i^2 - h x_1

and every candidate minimizer lies on the one-parameter family

    x_z = ((1+z)/2, (1-z)/(2(q-1)), ..., (1-z)/(2(q-1))),  z in [-1, 1]

(up to coordinate permutations when h = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    q: int
    beta: float
    h: float = 0.0

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise ValueError(f"q must be an integer >= 2, got {self.q!r}")
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be finite and >= 0, got {self.beta!r}")
        if not (self.h >= 0 and math.isfinite(self.h)):
            # h < 0 is outside the treated quadrant
            raise ValueError(f"h must be finite and >= 0, got {self.h!r}")
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "h", float(self.h))


def as_density(x: Sequence[float], q: int | None = None, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate ``x`` as a point of the probability simplex and return it as an array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("density vector must be one-dimensional and non-empty")
    if q is not None and arr.size != q:
        raise ValueError(f"density vector has {arr.size} coordinates, expected {q}")
    if np.any(~np.isfinite(arr)) or np.any(arr < -tol):
        raise ValueError(f"density vector has negative or non-finite coordinates: {arr}")
    if abs(arr.sum() - 1.0) > tol:
        raise ValueError(f"density vector sums to {arr.sum()!r}, not 1")
    return np.clip(arr, 0.0, None)


@dataclass(frozen=True)
class CountVector:
    counts: tuple[int, ...]

    def __post_init__(self):
        c = tuple(int(v) for v in self.counts)
        if any(v < 0 for v in c):
            raise ValueError(f"counts must be nonnegative, got {c}")
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def q(self) -> int:
        return len(self.counts)

    def density(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.n


@dataclass(frozen=True)
class CriticalPoint:
    """A point (beta_z, h_z) of the coexistence line with its z-parameter."""

    q: int
    beta_z: float
    h_z: float
    z: float

    def params(self) -> ModelParams:
        return ModelParams(self.q, self.beta_z, self.h_z)


class PhaseBoundaries(NamedTuple):
    beta_c: float
    beta_0: float
    h_0: float


class CriticalField(NamedTuple):
    h: float
    on_segment: bool


class ProfileParts(NamedTuple):
    value: float
    even: float
    odd_coefficient: float


def _xlogx(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos])
    return out


def free_energy(params: ModelParams, x: Sequence[float]) -> float:
    x = as_density(x, params.q)
    return float(
        _xlogx(x).sum() - 0.5 * params.beta * np.dot(x, x) - params.h * x[0]
    )


def _check_z(z: float, closed: bool = True) -> float:
    z = float(z)
    if closed and not -1.0 <= z <= 1.0:
        raise ValueError(f"z must lie in [-1, 1], got {z}")
    if not closed and not -1.0 < z < 1.0:
        raise ValueError(f"z must lie in (-1, 1), got {z}")
    return z


def x_from_z(q: int, z: float) -> np.ndarray:
    z = _check_z(z)
    rest = (1.0 - z) / (2.0 * (q - 1))
    x = np.full(q, rest)
    x[0] = (1.0 + z) / 2.0
    return x


def odd_coefficient(params: ModelParams) -> float:
    """Coefficient c with f(x_z) - f(x_{-z}) = c z; vanishes exactly on the critical line."""
    q, beta, h = params.q, params.beta, params.h
    return math.log(q - 1) - beta * (q - 2) / (2.0 * (q - 1)) - h


def free_energy_z_parts(params: ModelParams, z: float) -> ProfileParts:
    """Free energy along x_z split into its even part and odd coefficient."""
    z = _check_z(z)
    q, beta, h = params.q, params.beta, params.h
    a, b = (1.0 + z) / 2.0, (1.0 - z) / 2.0
    ent = (a * math.log(a) if a > 0 else 0.0) + (b * math.log(b) if b > 0 else 0.0)
    even = (
        ent
        - 0.5 * math.log(q - 1)
        - beta * (1.0 + z * z) / 8.0 * (1.0 + 1.0 / (q - 1))
        - 0.5 * h
    )
    c = odd_coefficient(params)
    return ProfileParts(even + 0.5 * z * c, even, 0.5 * c)


def free_energy_z(params: ModelParams, z: float) -> float:
    return free_energy_z_parts(params, z).value


def df_dz(params: ModelParams, z: float) -> float:
    z = _check_z(z, closed=False)
    q = params.q
    kappa = params.beta * q / (4.0 * (q - 1))
    return math.atanh(z) - kappa * z + 0.5 * odd_coefficient(params)


def d2f_dz2(params: ModelParams, z: float) -> float:
    z = _check_z(z, closed=False)
    q = params.q
    return 1.0 / (1.0 - z * z) - params.beta * q / (4.0 * (q - 1))


def inflection_z(params: ModelParams) -> float | None:
    """Return z_i = sqrt(1 - beta_0/beta) when beta > beta_0, else None."""
    b0 = phase_boundaries(params.q).beta_0
    if params.beta <= b0:
        return None
    return math.sqrt(1.0 - b0 / params.beta)


def phase_boundaries(q: int) -> PhaseBoundaries:
    if int(q) != q or q < 2:
        raise ValueError(f"q must be an integer >= 2, got {q!r}")
    if q <= 2:
        beta_c = float(q)
    else:
        beta_c = 2.0 * (q - 1) / (q - 2) * math.log(q - 1)
    beta_0 = 4.0 * (q - 1) / q
    h_0 = math.log(q - 1) - 2.0 * (q - 2) / q
    return PhaseBoundaries(beta_c, beta_0, h_0)


def beta_of_z(q: int, z: float) -> float:
    return 4.0 * (q - 1) / q * math.atanh(z) / z


def critical_point_from_z(q: int, z: float) -> CriticalPoint:
    if q <= 2:
        raise ValueError("the coexistence line h_T is empty for q <= 2")
    zmax = (q - 2) / q
    if not 0.0 < z < zmax:
        raise ValueError(f"z must lie in (0, {zmax}), got {z}")
    beta_z = beta_of_z(q, z)
    h_z = math.log(q - 1) - (q - 2) / (2.0 * (q - 1)) * beta_z
    return CriticalPoint(q, beta_z, h_z, float(z))


def critical_field(q: int, beta: float) -> CriticalField:
    """Affine critical-line field at ``beta`` with an on-segment marker.

    The segment runs from (beta_0, h_0) (excluded) to (beta_c, 0).
    """
    if q <= 2:
        raise ValueError("the coexistence line h_T is empty for q <= 2")
    h = math.log(q - 1) - beta * (q - 2) / (2.0 * (q - 1))
    pb = phase_boundaries(q)
    on = pb.beta_0 < beta <= pb.beta_c + 1e-12 and 0.0 <= h + 1e-12 and h < pb.h_0
    return CriticalField(h, bool(on))


def z_from_beta_on_line(q: int, beta: float) -> float:
    """Invert beta_z for z in (0, (q-2)/q); beta_z is increasing in z."""
    pb = phase_boundaries(q)
    if not pb.beta_0 < beta <= pb.beta_c * (1 + 1e-12):
        raise ValueError(f"beta={beta} is not on the critical segment for q={q}")
    zmax = (q - 2) / q
    if beta >= pb.beta_c:
        return zmax
    return brentq(lambda z: beta_of_z(q, z) - beta, 1e-12, zmax, xtol=1e-15, rtol=1e-15)
