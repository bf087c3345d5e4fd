import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare, multinomial

from cwpotts.core import CountVector, ModelParams, phase_boundaries
from cwpotts.exact import ExactDistribution, ball_probability, exact_distribution
from cwpotts.limits import coexistence_probabilities
from cwpotts.phase import find_global_minimizers
from cwpotts.rcgraph import (
    ComponentForest,
    CountSampler,
    RCParams,
    _decode_pairs,
    assemble_coloring,
    beta_of_p,
    erdos_renyi_giant,
    expected_giant_fraction,
    fk_percolate,
    giant_component_probability,
    giant_fraction,
    giant_monte_carlo,
    ll_discrepancy_ratio,
    p_of_beta,
    rc_brute_force_log_Z,
    rc_component_count_law,
    run_replica,
    sample_counts,
    summary_json,
    write_replica_csv,
    zrc_asymptotic,
    zrc_exact,
)


class TestBetaP:
    def test_zero(self):
        assert beta_of_p(0.0, 10) == 0.0 and p_of_beta(0.0, 10) == 0.0

    def test_round_trip(self, rng):
        for p in rng.uniform(0, 1, 100):
            n = int(rng.integers(1, 10_000))
            assert p_of_beta(beta_of_p(p, n), n) == pytest.approx(p, abs=1e-14)

    def test_second_order_expansion(self):
        n, beta, gamma = 10_000, 2.0, 1.0
        beta_n = RCParams.from_beta_gamma(3, n, beta, gamma).beta
        assert abs(beta_n - beta - (gamma + beta**2 / 2) / n) < 1e-6

    def test_errors(self):
        with pytest.raises(ValueError):
            beta_of_p(1.0, 10)
        with pytest.raises(ValueError):
            p_of_beta(-1.0, 10)
        with pytest.raises(ValueError):
            RCParams(0.5, 2.5, 10)


class TestSampling:
    def test_free_spins_are_multinomial(self):
        n, q = 30, 3
        dist = exact_distribution(ModelParams(q, 0.0), n)
        sampler = CountSampler(dist)
        rng = np.random.default_rng(11)
        draws = np.array([sampler(rng).counts for _ in range(10_000)])
        expected = multinomial.pmf(dist.support, n, [1 / 3] * 3) * len(draws)
        index = {tuple(s): i for i, s in enumerate(dist.support.tolist())}
        observed = np.bincount([index[tuple(d)] for d in draws.tolist()], minlength=len(index))
        # pool sparse cells into one bin so every expected count is at least 5
        big = expected >= 5
        obs = np.append(observed[big], observed[~big].sum())
        exp = np.append(expected[big], expected[~big].sum())
        assert chisquare(obs, exp).pvalue > 1e-3

    def test_point_mass(self):
        dist = ExactDistribution(ModelParams(3, 1.0), 4, np.array([[2, 1, 1]]), np.array([0.3]), 0.3)
        rng = np.random.default_rng(0)
        assert all(sample_counts(dist, rng).counts == (2, 1, 1) for _ in range(50))

    def test_ball_frequencies(self):
        params = ModelParams(3, 2.7, 0.02)
        dist = exact_distribution(params, 60)
        xs = find_global_minimizers(params).minimizers
        sampler = CountSampler(dist)
        rng = np.random.default_rng(5)
        draws = np.array([sampler(rng).counts for _ in range(10_000)]) / 60
        for x in xs + [np.array([1 / 3] * 3)]:
            p = ball_probability(dist, x, 0.1)
            freq = np.mean(np.linalg.norm(draws - x, axis=1) < 0.1)
            assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / 10_000) + 1e-12


class TestColoring:
    def test_single_color(self):
        sigma = assemble_coloring(CountVector((7, 0, 0)), np.random.default_rng(0))
        assert np.all(sigma.colors == 0)

    @given(st.lists(st.integers(0, 20), min_size=1, max_size=5), st.integers(0, 2**32 - 1))
    def test_counts_preserved(self, counts, seed):
        sigma = assemble_coloring(counts, np.random.default_rng(seed))
        assert sigma.counts().counts == tuple(counts)

    def test_pair_statistics(self):
        N = (5, 3, 2)
        n = sum(N)
        rng = np.random.default_rng(3)
        same = np.mean([(lambda c: c[0] == c[1])(assemble_coloring(N, rng).colors) for _ in range(10_000)])
        p = sum(k * (k - 1) for k in N) / (n * (n - 1))
        assert abs(same - p) <= 3 * math.sqrt(p * (1 - p) / 10_000)


class TestForest:
    @given(st.integers(1, 60), st.lists(st.tuples(st.integers(0, 59), st.integers(0, 59)), max_size=120))
    def test_union_find_invariants(self, n, edges):
        f = ComponentForest(n)
        for a, b in edges:
            if a < n and b < n:
                f.union(a, b)
        sizes = f.component_sizes()
        assert sizes.sum() == n and sizes.size == f.components
        assert sizes.max() == f.largest <= n
        roots = [f.find(i) for i in range(n)]
        assert roots == [f.find(r) for r in roots]

    def test_decode_pairs(self):
        k = np.arange(50_000)
        i, j = _decode_pairs(k)
        assert np.all(i >= 0) and np.all(i < j) and np.array_equal(j * (j - 1) // 2 + i, k)

    def test_extreme_probabilities(self):
        rng = np.random.default_rng(1)
        sigma = assemble_coloring((4, 0, 3), rng)
        assert fk_percolate(sigma, 0.0, rng).components == 7
        f = fk_percolate(sigma, 1.0, rng)
        assert f.components == 2 and giant_fraction(f) == pytest.approx(4 / 7)
        assert giant_fraction(ComponentForest(9)) == pytest.approx(1 / 9)
        with pytest.raises(ValueError):
            fk_percolate(sigma, 1.5, rng)

    def test_only_same_color_edges(self):
        rng = np.random.default_rng(4)
        sigma = assemble_coloring((30, 30), rng)
        f = fk_percolate(sigma, 1.0, rng)
        for i in range(60):
            assert sigma.colors[f.find(i)] == sigma.colors[i]

    def test_erdos_renyi_giant(self):
        n, c = 3000, 2.0
        rng = np.random.default_rng(8)
        sigma = assemble_coloring((n,), rng)
        fr = [giant_fraction(fk_percolate(sigma, c / n, rng)) for _ in range(200)]
        assert erdos_renyi_giant(c) == pytest.approx(0.7968, abs=1e-4)
        assert abs(np.mean(fr) - erdos_renyi_giant(c)) < 0.02

    def test_symmetric_state_has_no_giant(self):
        n = 3000
        p = phase_boundaries(3).beta_c / n
        rng = np.random.default_rng(9)
        fr = [giant_fraction(fk_percolate(assemble_coloring((1000, 1000, 1000), rng), p, rng)) for _ in range(50)]
        assert max(fr) < 0.1

    def test_fk_marginal_matches_random_cluster(self):
        q, n, p = 2, 5, 0.3
        sampler = CountSampler(exact_distribution(ModelParams(q, beta_of_p(p, n)), n))
        counts = np.zeros(n + 1)
        for r in range(100_000):
            counts[run_replica(sampler, p, seed=2, replica=r)[2].components] += 1
        law = rc_component_count_law(p, q, n)
        assert 0.5 * np.abs(counts / counts.sum() - law).sum() < 0.02

    def test_determinism(self):
        sampler = CountSampler(exact_distribution(ModelParams(3, 2.0), 80))
        a = run_replica(sampler, 0.03, 5, 17)
        b = run_replica(sampler, 0.03, 5, 17)
        assert a[0] == b[0]
        assert np.array_equal(a[1].colors, b[1].colors)
        assert np.array_equal(a[2].parent, b[2].parent)
        c = run_replica(sampler, 0.03, 5, 18)
        assert not np.array_equal(a[1].colors, c[1].colors)


class TestGiantProbability:
    def test_q3(self):
        assert giant_component_probability(3, 0.0) == pytest.approx(0.608, abs=1e-3)

    def test_limits_and_monotonicity(self):
        vals = [giant_component_probability(3, g) for g in np.linspace(-30, 30, 61)]
        assert np.all(np.diff(vals) > 0)
        assert giant_component_probability(3, 600.0) == pytest.approx(1.0, abs=1e-12)
        for q in (4, 6):
            assert giant_component_probability(q, 1.0) > giant_component_probability(q, 0.0)

    @pytest.mark.parametrize("q,gamma", [(3, 0.0), (3, 2.5), (4, -1.0), (6, 0.5)])
    def test_matches_coexistence_weights(self, q, gamma):
        bc = phase_boundaries(q).beta_c
        ms = find_global_minimizers(ModelParams(q, bc))
        probs = coexistence_probabilities(ms, bc, lam=gamma + bc**2 / 2).probs
        sym = sum(p for x, p in zip(ms.minimizers, probs) if np.ptp(x) < 1e-12)
        assert giant_component_probability(q, gamma) == pytest.approx(1 - sym, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            giant_component_probability(2, 0.0)

    def test_expected_fraction(self):
        # ordered state (2/3, 1/6, 1/6) with mean degree 2/3 beta_c inside the big class
        bc = phase_boundaries(3).beta_c
        rho = erdos_renyi_giant(2 / 3 * bc)
        assert expected_giant_fraction(3, bc) == pytest.approx(2 / 3 * rho, abs=1e-12)
        assert rho == pytest.approx(1 - math.exp(-2 / 3 * bc * rho), abs=1e-12)


class TestPartitionFunction:
    def test_q1_is_trivial(self, rng):
        for _ in range(20):
            p, n = rng.uniform(0, 0.99), int(rng.integers(1, 500))
            assert abs(zrc_exact(p, 1, n)) <= 1e-9
        assert zrc_asymptotic(1.7, 3.0, 1, 100) == 0.0

    @pytest.mark.parametrize("q,n", [(2, 6), (3, 10), (4, 7)])
    def test_no_edges(self, q, n):
        assert zrc_exact(0.0, q, n) == pytest.approx(n * math.log(q), abs=1e-12)
        assert zrc_asymptotic(0.0, 0.0, q, n) == pytest.approx(n * math.log(q), abs=1e-12)

    @pytest.mark.parametrize("p", [0.01, 0.1, 0.37])
    def test_brute_force_k3(self, p):
        assert zrc_exact(p, 2, 3) == pytest.approx(rc_brute_force_log_Z(p, 2, 3), abs=1e-12)

    def test_brute_force_larger(self):
        for q, n in [(3, 4), (2, 5)]:
            assert zrc_exact(0.2, q, n) == pytest.approx(rc_brute_force_log_Z(0.2, q, n), abs=1e-11)

    def test_asymptotic_agreement(self):
        diffs = [abs(zrc_exact(RCParams.from_beta_gamma(3, n, 1.0).p, 3, n) - zrc_asymptotic(1.0, 0.0, 3, n)) for n in (125, 250, 500)]
        assert diffs[0] > diffs[1] > diffs[2]
        assert diffs[2] < 0.05

    def test_asymptotic_errors(self):
        with pytest.raises(ValueError):
            zrc_asymptotic(phase_boundaries(3).beta_c, 0.0, 3, 100)
        with pytest.raises(ValueError):
            zrc_exact(0.1, 0, 10)

    def test_component_law_normalized(self):
        law = rc_component_count_law(0.3, 2, 4)
        assert law.sum() == pytest.approx(1.0, abs=1e-14) and law[0] == 0.0


class TestDiscrepancy:
    def test_values(self):
        for q in (1, 3, 7):
            assert ll_discrepancy_ratio(0.0, q) == pytest.approx(math.exp(-0.75))
        assert ll_discrepancy_ratio(1.0, 1) == pytest.approx(1.0, abs=1e-15)

    @given(st.integers(1, 8), st.floats(0.0, 10.0))
    def test_monotone(self, q, beta):
        assert ll_discrepancy_ratio(beta + 0.01, q) > ll_discrepancy_ratio(beta, q)


class TestMonteCarlo:
    def test_summary_and_csv(self):
        s = giant_monte_carlo(3, 200, replicas=20, seed=4)
        t = giant_monte_carlo(3, 200, replicas=20, seed=4, threads=3)
        assert s.to_dict() == t.to_dict()
        assert [r.counts for r in s.results] == [r.counts for r in t.results]
        assert 0 <= s.estimate <= 1 and s.replicas == 20
        buf = io.StringIO()
        write_replica_csv(s, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "seed,replica,N1,N2,N3,giant_fraction,component_count"
        assert len(lines) == 21
        assert '"estimate"' in summary_json(s)
