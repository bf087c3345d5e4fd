import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import free_energy_grid, simplex_grid
from cwpotts.core import ModelParams, critical_field, critical_point_from_z, free_energy, phase_boundaries, x_from_z
from cwpotts.phase import (
    Regime,
    find_global_minimizers,
    refine_local_minimizer,
    stationarity_residual,
    x_from_s,
)


def _as_set(points):
    return sorted(tuple(np.round(p, 10)) for p in points)


class TestExamples:
    def test_subcritical_zero_field(self):
        ms = find_global_minimizers(ModelParams(3, 1.0, 0.0))
        assert ms.regime is Regime.SUBCRITICAL_ZERO_FIELD
        assert len(ms) == 1
        np.testing.assert_allclose(ms.minimizers[0], [1 / 3] * 3, atol=1e-12)

    def test_critical_line_pair(self):
        cp = critical_point_from_z(3, 0.2)
        ms = find_global_minimizers(cp.params())
        assert ms.regime is Regime.CRITICAL_LINE_PAIR
        assert _as_set(ms.minimizers) == _as_set([[0.6, 0.2, 0.2], [0.4, 0.3, 0.3]])
        assert sorted(ms.z_values) == pytest.approx([-0.2, 0.2], abs=1e-12)

    def test_critical_zero_field(self):
        ms = find_global_minimizers(ModelParams(3, 4 * math.log(2), 0.0))
        assert ms.regime is Regime.CRITICAL_ZERO_FIELD
        expected = [[1 / 3] * 3] + [list(p) for p in set(itertools.permutations([2 / 3, 1 / 6, 1 / 6]))]
        assert _as_set(ms.minimizers) == _as_set(expected)

    @pytest.mark.parametrize("q", [3, 4, 5])
    def test_tricritical(self, q):
        pb = phase_boundaries(q)
        ms = find_global_minimizers(ModelParams(q, pb.beta_0, pb.h_0))
        assert ms.regime is Regime.TRICRITICAL
        np.testing.assert_allclose(ms.minimizers[0], x_from_z(q, 0.0))

    @pytest.mark.parametrize("q", [2, 3, 5])
    def test_supercritical_zero_field(self, q):
        beta = phase_boundaries(q).beta_c + 0.7
        ms = find_global_minimizers(ModelParams(q, beta))
        assert ms.regime is Regime.SUPERCRITICAL_ZERO_FIELD
        assert len(ms) == q
        base = sorted(ms.minimizers[0])
        for x in ms.minimizers:
            assert sorted(x) == pytest.approx(base, abs=1e-12)

    def test_unique_off_line(self):
        ms = find_global_minimizers(ModelParams(3, 2.0, 0.3))
        assert ms.regime is Regime.UNIQUE_OFF_LINE and len(ms) == 1

    def test_q2_critical_point(self):
        ms = find_global_minimizers(ModelParams(2, 2.0, 0.0))
        assert ms.regime is Regime.TRICRITICAL

    def test_critical_line_by_value_degeneracy(self):
        # a (beta, h) pair not built from critical_point_from_z still resolves to two states
        beta = 2.75
        ms = find_global_minimizers(ModelParams(3, beta, critical_field(3, beta).h))
        assert ms.regime is Regime.CRITICAL_LINE_PAIR and len(ms) == 2

    def test_proximity_warning(self):
        cp = critical_point_from_z(3, 0.2)
        ms = find_global_minimizers(ModelParams(3, cp.beta_z, cp.h_z + 1e-8))
        assert len(ms) == 1
        assert any("phase boundary" in w for w in ms.warnings)

    def test_to_dict(self):
        d = find_global_minimizers(ModelParams(3, 1.0)).to_dict()
        assert d["regime"] == "SubcriticalZeroField"


class TestStationarity:
    def test_examples(self):
        u = [1 / 3] * 3
        assert stationarity_residual(ModelParams(3, 1.0, 0.0), u) == pytest.approx(0.0, abs=1e-15)
        assert stationarity_residual(ModelParams(3, 1.0, 0.5), u) == pytest.approx(0.5, abs=1e-15)

    def test_rejects_boundary(self):
        with pytest.raises(ValueError):
            stationarity_residual(ModelParams(3, 1.0), [0.5, 0.5, 0.0])

    @given(st.integers(2, 5), st.floats(0.0, 6.0), st.floats(0.0, 1.0))
    def test_minimizers_are_stationary(self, q, beta, h):
        ms = find_global_minimizers(ModelParams(q, beta, h))
        for x in ms.minimizers:
            assert stationarity_residual(ms.params, x) <= 1e-8


class TestStructure:
    @given(st.integers(2, 6), st.floats(0.0, 8.0), st.one_of(st.just(0.0), st.floats(1e-4, 1.0)))
    def test_minimizer_shape(self, q, beta, h):
        params = ModelParams(q, beta, h)
        ms = find_global_minimizers(params)
        pb = phase_boundaries(q)
        special = (abs(beta - pb.beta_0) < 1e-9 and abs(h - pb.h_0) < 1e-9) or (
            q == 2 and abs(beta - pb.beta_c) < 1e-9 and h == 0
        )
        for x in ms.minimizers:
            lo = x.min()
            assert np.count_nonzero(np.abs(x - lo) <= 1e-9) >= q - 1
            assert lo > 0
            if not special and beta > 0:
                assert lo < 1 / beta
            if h > 0:
                assert x[0] > x[1:].max() + 1e-10
        if ms.regime is Regime.CRITICAL_LINE_PAIR:
            z = ms.z_values
            assert len(ms) == 2 and z[0] == pytest.approx(-z[1], abs=1e-8)
        if ms.regime is Regime.SUPERCRITICAL_ZERO_FIELD:
            assert len(ms) == q
        if ms.regime is Regime.CRITICAL_ZERO_FIELD:
            assert len(ms) == q + 1

    @pytest.mark.parametrize("z", [0.1, 0.2, 0.3])
    def test_continuity_across_line(self, z):
        cp = critical_point_from_z(3, z)
        above = find_global_minimizers(ModelParams(3, cp.beta_z, cp.h_z + 1e-4)).minimizers
        below = find_global_minimizers(ModelParams(3, cp.beta_z, cp.h_z - 1e-4)).minimizers
        assert len(above) == len(below) == 1
        assert np.linalg.norm(above[0] - x_from_z(3, z)) < 1e-2
        assert np.linalg.norm(below[0] - x_from_z(3, -z)) < 1e-2

    @pytest.mark.parametrize("q,resolution", [(2, 200), (3, 200), (4, 60)])
    def test_dense_grid_oracle(self, q, resolution, rng):
        grid = simplex_grid(q, resolution)
        for _ in range(50):
            beta, h = rng.uniform(0, 5), rng.uniform(0, 1)
            params = ModelParams(q, beta, h)
            ms = find_global_minimizers(params)
            fmin = min(free_energy(params, x) for x in ms.minimizers)
            assert free_energy_grid(grid, beta, h).min() >= fmin - 1e-9

    def test_search_is_deterministic(self):
        p = ModelParams(4, 3.3, 0.0)
        a, b = find_global_minimizers(p), find_global_minimizers(p)
        for x, y in zip(a.minimizers, b.minimizers):
            assert np.array_equal(x, y)

    def test_x_from_s_keeps_precision_near_faces(self):
        x = x_from_s(3, 20.0)
        assert x[1] > 0 and x.sum() == pytest.approx(1.0, abs=1e-15)


class TestCentering:
    def test_uniform_zero_field_is_exact(self):
        d = refine_local_minimizer(ModelParams(3, 2.0 + 0.01, 0.0), [1 / 3] * 3)
        assert d.norm == 0.0 and np.all(d.d == 0.0)

    def test_unperturbed(self):
        cp = critical_point_from_z(3, 0.2)
        for x in find_global_minimizers(cp.params()).minimizers:
            d = refine_local_minimizer(cp.params(), x)
            assert d.norm < 1e-12
            assert not d.ambiguous

    def test_linear_scaling(self):
        cp = critical_point_from_z(3, 0.2)
        for x in (x_from_z(3, 0.2), x_from_z(3, -0.2)):
            d1 = refine_local_minimizer(ModelParams(3, cp.beta_z + 1e-3, cp.h_z), x)
            d2 = refine_local_minimizer(ModelParams(3, cp.beta_z + 5e-4, cp.h_z), x)
            assert abs(d1.d.sum()) < 1e-12
            assert np.all(x + d1.d >= 0)
            assert d1.norm / d2.norm == pytest.approx(2.0, rel=0.02)
            assert d1.norm < 0.05

    def test_permuted_state_with_field(self):
        beta = phase_boundaries(3).beta_c + 0.7
        ms = find_global_minimizers(ModelParams(3, beta, 0.0))
        for x in ms.minimizers:
            d = refine_local_minimizer(ModelParams(3, beta, 1e-3), x)
            y = x + d.d
            assert stationarity_residual(ModelParams(3, beta, 1e-3), y) < 1e-10
            assert d.norm < 1e-2

    def test_left_basin(self):
        with pytest.raises(RuntimeError):
            refine_local_minimizer(ModelParams(3, 1.0, 0.0), x_from_z(3, 0.6))

    def test_malformed(self):
        with pytest.raises(ValueError):
            refine_local_minimizer(ModelParams(3, 1.0), [0.5, 0.3, 0.2])
