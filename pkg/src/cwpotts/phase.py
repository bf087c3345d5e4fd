"""Global minimizers of the free energy and the finite-n centering shift.

Every global minimizer has one coordinate value repeated at least q-1 times,
so the search runs on the one-dimensional profile z -> f(x_z). The profile is
scanned in the coordinate s = atanh(z), where its derivative

    g(s) = s - kappa tanh(s) + c/2,   kappa = beta q / (4(q-1))

is smooth on the whole real line and all its roots lie in
|s| <= kappa + |c|/2. Points are rebuilt from s without forming 1 - z, so
minimizers pressed against a face of the simplex keep full precision.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .core import (
    ModelParams,
    as_density,
    critical_field,
    free_energy,
    odd_coefficient,
    phase_boundaries,
    x_from_z,
    z_from_beta_on_line,
)

Z_TOL = 1e-10
VALUE_TOL = 1e-9
PROXIMITY_TOL = 1e-6
GRID_POINTS = 4097


class Regime(str, enum.Enum):
    UNIQUE_OFF_LINE = "UniqueOffLine"
    CRITICAL_LINE_PAIR = "CriticalLinePair"
    SUBCRITICAL_ZERO_FIELD = "SubcriticalZeroField"
    SUPERCRITICAL_ZERO_FIELD = "SupercriticalZeroField_qStates"
    CRITICAL_ZERO_FIELD = "CriticalZeroField_qPlus1States"
    TRICRITICAL = "Tricritical"


@dataclass
class MinimizerSet:
    params: ModelParams
    minimizers: list[np.ndarray]
    regime: Regime
    z_values: list[float]
    warnings: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.minimizers)

    def min_pairwise_distance(self) -> float:
        xs = self.minimizers
        d = [np.linalg.norm(a - b) for i, a in enumerate(xs) for b in xs[i + 1:]]
        return min(d) if d else math.inf

    def to_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "minimizers": [x.tolist() for x in self.minimizers],
            "z_values": list(self.z_values),
            "warnings": list(self.warnings),
        }


@dataclass
class CenteringCorrection:
    d: np.ndarray
    norm: float
    ambiguous: bool = False


def _kappa(params: ModelParams) -> float:
    return params.beta * params.q / (4.0 * (params.q - 1))


def _profile_derivative(params: ModelParams, s):
    return s - _kappa(params) * np.tanh(s) + 0.5 * odd_coefficient(params)


def x_from_s(q: int, s: float, big: int = 0) -> np.ndarray:
    """x_z at z = tanh(s) with the (1+z)/2 coordinate placed at index ``big``."""
    x = np.full(q, expit(-2.0 * s) / (q - 1))
    x[big] = expit(2.0 * s)
    return x


def _profile_local_minima(params: ModelParams, points: int = GRID_POINTS) -> list[float]:
    """s-coordinates of all local minima of the profile, ascending."""
    c = odd_coefficient(params)
    bound = _kappa(params) + 0.5 * abs(c) + 1.0
    s = np.linspace(-bound, bound, points)
    g = _profile_derivative(params, s)
    roots = []
    for i in np.flatnonzero((g[:-1] < 0) & (g[1:] >= 0)):
        if g[i + 1] == 0.0:
            roots.append(float(s[i + 1]))
            continue
        roots.append(
            brentq(lambda t: _profile_derivative(params, t), s[i], s[i + 1], xtol=1e-15, rtol=1e-15)
        )
    if not roots:
        raise RuntimeError(f"failed to bracket any profile minimum for {params}")
    return roots


def _is_uniform(x: np.ndarray, tol: float = 1e-9) -> bool:
    return float(np.ptp(x)) <= tol


def _with_permutations(q: int, s: float) -> list[np.ndarray]:
    return [x_from_s(q, s, big=j) for j in range(q)]


def _dedupe(points: list[np.ndarray], zs: list[float], tol: float = 1e-8):
    out, out_z = [], []
    for x, z in zip(points, zs):
        if all(np.linalg.norm(x - y) > tol for y in out):
            out.append(x)
            out_z.append(z)
    return out, out_z


def find_global_minimizers(
    params: ModelParams, tol: float = Z_TOL, value_tol: float = VALUE_TOL
) -> MinimizerSet:
    """Locate and classify every global minimizer of the free energy.

    ``tol`` bounds the error on z; ``value_tol`` is the free-energy gap below
    which two local minima are declared degenerate. Membership of the
    coexistence line and of the zero-field critical point is decided
    analytically when (beta, h) satisfies the closed-form relations to
    rounding precision, so parameters built from ``critical_point_from_z``
    always yield the pair.
    """
    q, beta, h = params.q, params.beta, params.h
    pb = phase_boundaries(q)

    if abs(beta - pb.beta_0) <= 1e-9 and abs(h - pb.h_0) <= 1e-9:
        return MinimizerSet(params, [x_from_z(q, 0.0)], Regime.TRICRITICAL, [0.0])

    if q > 2 and h > 0:
        line = critical_field(q, beta)
        if line.on_segment and abs(h - line.h) <= 1e-12 * max(1.0, abs(h)):
            z = z_from_beta_on_line(q, beta)
            return MinimizerSet(
                params, [x_from_z(q, z), x_from_z(q, -z)], Regime.CRITICAL_LINE_PAIR, [z, -z]
            )

    if q > 2 and h == 0 and abs(beta - pb.beta_c) <= 1e-12 * pb.beta_c:
        zc = (q - 2) / q
        xs = [np.full(q, 1.0 / q)] + _with_permutations(q, math.atanh(zc))
        return MinimizerSet(
            params, xs, Regime.CRITICAL_ZERO_FIELD, [-zc] + [zc] * q
        )

    roots = _profile_local_minima(params)
    values = [free_energy(params, x_from_s(q, s)) for s in roots]
    fmin = min(values)
    warnings = []
    best = [s for s, v in zip(roots, values) if v <= fmin + value_tol]
    near = [v - fmin for v in values if value_tol < v - fmin <= PROXIMITY_TOL]
    if near:
        warnings.append(
            f"a competing local minimum lies {min(near):.3e} above the global one; "
            "parameters are close to a phase boundary"
        )
    if len(best) > 1 and not (h == 0 and q == 2):
        warnings.append(
            "multiplicity decided by free-energy degeneracy, not by the analytic critical relations"
        )

    xs, zs = [], []
    for s in best:
        z = math.tanh(s)
        if h == 0:
            pts = [np.full(q, 1.0 / q)] if _is_uniform(x_from_s(q, s)) else _with_permutations(q, s)
        else:
            pts = [x_from_s(q, s)]
        xs.extend(pts)
        zs.extend([z] * len(pts))
    xs, zs = _dedupe(xs, zs)

    if h == 0:
        has_uniform = any(_is_uniform(x) for x in xs)
        if has_uniform and len(xs) > 1:
            regime = Regime.CRITICAL_ZERO_FIELD
        elif has_uniform:
            regime = Regime.SUBCRITICAL_ZERO_FIELD
        else:
            regime = Regime.SUPERCRITICAL_ZERO_FIELD
    else:
        regime = Regime.CRITICAL_LINE_PAIR if len(xs) == 2 else Regime.UNIQUE_OFF_LINE
    return MinimizerSet(params, xs, regime, zs, warnings)


def stationarity_residual(params: ModelParams, x) -> float:
    """Largest violation of the pairwise stationarity conditions at an interior point."""
    x = as_density(x, params.q)
    if np.any(x <= 0):
        raise ValueError("stationarity residual needs a point in the simplex interior")
    g = np.log(x) - params.beta * x
    g[0] -= params.h
    return float(g.max() - g.min())


def _pattern_index(x: np.ndarray, tol: float = 1e-9) -> int:
    """Index of the distinguished coordinate of a minimizer-shaped point."""
    q = x.size
    lo = x.min()
    if np.count_nonzero(np.abs(x - lo) <= tol) < q - 1:
        raise ValueError(f"point {x} does not have a coordinate repeated q-1 times")
    if _is_uniform(x, tol):
        return 0
    return int(np.argmax(x))


def _newton_profile(params: ModelParams, s0: float, max_iter: int) -> float:
    kappa = _kappa(params)
    s = s0
    for _ in range(max_iter):
        g = _profile_derivative(params, s)
        dg = 1.0 - kappa / math.cosh(s) ** 2
        if dg <= 0:
            raise RuntimeError("Newton step left the convex basin of the starting point")
        step = g / dg
        s -= step
        if abs(step) <= 1e-14 * max(1.0, abs(s)):
            return s
    raise RuntimeError(f"Newton did not converge within {max_iter} iterations")


def _newton_simplex(params: ModelParams, x0: np.ndarray, max_iter: int) -> np.ndarray:
    q = params.q
    x = x0.copy()
    kkt = np.zeros((q + 1, q + 1))
    kkt[:q, q] = kkt[q, :q] = 1.0
    for _ in range(max_iter):
        grad = np.log(x) + 1.0 - params.beta * x
        grad[0] -= params.h
        kkt[np.arange(q), np.arange(q)] = 1.0 / x - params.beta
        step = np.linalg.solve(kkt, np.concatenate([-grad, [0.0]]))[:q]
        t = 1.0
        while np.any(x + t * step <= 0):
            t /= 2
        x = x + t * step
        if np.linalg.norm(step) < 1e-14:
            return x
    raise RuntimeError(f"Newton did not converge within {max_iter} iterations")


def refine_local_minimizer(
    params_n: ModelParams, x0, max_iter: int = 100, max_distance: float = 0.1
) -> CenteringCorrection:
    """Shift d in the hyperplane sum(d)=0 taking x0 to the nearby local minimizer of f at params_n."""
    q = params_n.q
    x0 = as_density(x0, q)
    j = _pattern_index(x0)

    if _is_uniform(x0, 1e-14) and params_n.h == 0:
        # the uniform point is stationary for every beta at zero field
        return CenteringCorrection(np.zeros(q), 0.0)

    ambiguous = False
    if j == 0 or params_n.h == 0:
        z0 = 2.0 * x0[j] - 1.0
        s_star = _newton_profile(params_n, math.atanh(z0), max_iter)
        x_star = x_from_s(q, s_star, big=j)
        others = [x_from_s(q, s, big=j) for s in _profile_local_minima(params_n)]
        dists = sorted(np.linalg.norm(x - x0) for x in others)
        ambiguous = len(dists) > 1 and dists[1] - dists[0] <= 1e-9
    else:
        x_star = _newton_simplex(params_n, x0, max_iter)

    d = x_star - x0
    d -= d.mean() if abs(d.sum()) > 1e-15 else 0.0
    norm = float(np.linalg.norm(d))
    if norm > max_distance:
        raise RuntimeError(
            f"local minimizer at distance {norm:.3g} from x0; the perturbation left the basin"
        )
    return CenteringCorrection(d, norm, ambiguous)
