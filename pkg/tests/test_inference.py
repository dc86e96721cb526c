"""Inference tests: combiner arithmetic, the half-normal tail, permutation
pooling mechanics re-derived by hand, and seeded determinism."""

import math

import numpy as np
import pytest

from gammadep import (
    INFINITY,
    GammaSet,
    GammadepError,
    KernelPairSpec,
    PermutationPlan,
    asymptotic_pvalue,
    combine_cauchy,
    combine_fisher,
    combine_min,
    build_pair_matrices,
    fast_triple_pair,
    permutation_test,
    rate_w,
    validate_sample,
)
from gammadep.inference import derive_seed


class TestAsymptoticPvalue:
    def test_zero_statistic_gives_one(self):
        assert asymptotic_pvalue(0.0, 100, 2, 1.0, 4) == 1.0

    def test_standard_normal_quantile(self):
        # t = 1.959964 when scaled_mu = t * 2^(1/2) * m * sigma0
        t = 1.959964
        p = asymptotic_pvalue(t * math.sqrt(2.0) * 4 * 0.5, 100, 2, 0.5, 4)
        assert p == pytest.approx(0.05, abs=1e-6)

    def test_infinite_gamma_drops_the_root_factor(self):
        p2 = asymptotic_pvalue(1.0, 50, 2, 1.0, 4)
        pinf = asymptotic_pvalue(1.0, 50, INFINITY, 1.0, 4)
        # same scaled statistic studentizes larger without the 2^(1/2)
        assert pinf < p2

    def test_odd_gamma_rejected(self):
        with pytest.raises(GammadepError) as exc:
            asymptotic_pvalue(1.0, 100, 3, 1.0, 4)
        assert exc.value.code == "BAD_GAMMA"

    def test_bad_sigma(self):
        with pytest.raises(GammadepError) as exc:
            asymptotic_pvalue(1.0, 100, 2, 0.0, 4)
        assert exc.value.code == "BAD_SIGMA"

    def test_negative_statistic_clamps_to_one(self):
        assert asymptotic_pvalue(-3.0, 100, INFINITY, 1.0, 4) == 1.0


class TestCombiners:
    def test_fisher_examples(self):
        assert combine_fisher([0.05, 0.05]) == pytest.approx(-4.0 * math.log(0.05), rel=1e-12)
        assert combine_fisher([0.05, 0.05]) == pytest.approx(11.9829, abs=1e-4)
        assert combine_fisher([1.0, 1.0, 1.0]) == 0.0
        assert combine_fisher([0.5]) == pytest.approx(1.386294, abs=1e-6)

    def test_fisher_zero_p(self):
        with pytest.raises(GammadepError) as exc:
            combine_fisher([0.2, 0.0])
        assert exc.value.code == "ZERO_P"

    def test_fisher_monotone_and_order_free(self):
        base = combine_fisher([0.2, 0.4, 0.6])
        assert combine_fisher([0.6, 0.2, 0.4]) == pytest.approx(base, rel=1e-12)
        assert combine_fisher([0.1, 0.4, 0.6]) > base

    def test_min_examples(self):
        assert combine_min([0.2, 0.05, 0.6]) == -0.05
        assert combine_min([1.0, 1.0]) == -1.0
        assert combine_min([0.5]) == -0.5

    def test_cauchy_examples(self):
        assert combine_cauchy([0.5, 0.5]) == pytest.approx(0.0, abs=1e-12)
        assert combine_cauchy([0.25]) == pytest.approx(0.5, rel=1e-12)
        assert combine_cauchy([0.75]) == pytest.approx(-0.5, rel=1e-12)

    def test_cauchy_boundary(self):
        with pytest.raises(GammadepError) as exc:
            combine_cauchy([1.0, 0.2])
        assert exc.value.code == "P_BOUNDARY"


class TestPermutationPlan:
    def test_pure_function_of_seed_and_index(self):
        plan = PermutationPlan(16, 99)
        a = plan.permutation(5, 20)
        b = PermutationPlan(16, 99).permutation(5, 20)
        assert np.array_equal(a, b)

    def test_distinct_across_indices(self):
        plan = PermutationPlan(16, 99)
        assert not np.array_equal(plan.permutation(1, 50), plan.permutation(2, 50))

    def test_seed_required(self):
        plan = PermutationPlan(16, None)
        with pytest.raises(GammadepError) as exc:
            plan.permutation(1, 10)
        assert exc.value.code == "SEED_REQUIRED"

    def test_positive_b_count(self):
        with pytest.raises(GammadepError):
            PermutationPlan(0, 1)


def small_sample(seed=0, n=30, dependent=False):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 2))
    y = rng.standard_normal((n, 2))
    if dependent:
        y = y + x
    return validate_sample(x, y)


class TestPermutationTest:
    def test_pool_pvalues_match_a_manual_loop(self):
        # re-derive the per-exponent p-value from the raw pool
        sample = small_sample(1, n=24)
        spec = KernelPairSpec.dcov()
        gammas = GammaSet((1, 2, INFINITY))
        plan = PermutationPlan(40, 7)
        report = permutation_test(sample, spec, gammas, plan)

        mats = build_pair_matrices(sample, spec)
        base = fast_triple_pair(mats)
        y = np.array(sample.y)
        for g in gammas:
            def scaled_stat(triple):
                from gammadep import aggregate

                return rate_w(triple.n, g) * aggregate(triple.u, triple.v, g)

            pool = [scaled_stat(base)]
            for b in range(1, 41):
                perm = plan.permutation(b, sample.n)
                sp = validate_sample(sample.x, y[perm])
                pool.append(scaled_stat(fast_triple_pair(build_pair_matrices(sp, spec))))
            count = sum(1 for v in pool[1:] if v > pool[0])
            assert report.per_gamma[g].p_perm == pytest.approx((1 + count) / 41.0, abs=1e-12)

    def test_combined_pvalue_matches_manual_pooling(self):
        sample = small_sample(2, n=24, dependent=True)
        spec = KernelPairSpec.dcov()
        gammas = GammaSet((1, 2))
        plan = PermutationPlan(30, 11)
        report = permutation_test(sample, spec, gammas, plan, combiners=("fisher",))

        # rebuild the full (B+1) x L scaled-statistic pool
        from gammadep import aggregate

        y = np.array(sample.y)
        pool = np.empty((31, 2))
        for b in range(31):
            if b == 0:
                sp = sample
            else:
                sp = validate_sample(sample.x, y[plan.permutation(b, sample.n)])
            t = fast_triple_pair(build_pair_matrices(sp, spec))
            pool[b] = [rate_w(t.n, g) * aggregate(t.u, t.v, g) for g in gammas]
        pmat = np.empty_like(pool)
        for j in range(2):
            for i in range(31):
                greater = np.sum(pool[:, j] > pool[i, j])
                pmat[i, j] = (1 + greater) / 31.0
        fisher = -2.0 * np.log(pmat).sum(axis=1)
        count = np.sum(fisher[1:] > fisher[0])
        assert report.combined["fisher"].p_perm == pytest.approx((1 + count) / 31.0, abs=1e-12)
        assert report.combined["fisher"].stat == pytest.approx(fisher[0], rel=1e-12)

    def test_gamma_one_reproduces_unbiased_distance_covariance(self):
        # independent re-implementation of the U-centered distance-covariance
        # inner product (Szekely-Huo form); statistics and pooled p-values
        # must agree replicate for replicate
        sample = small_sample(3, n=26, dependent=True)
        n = sample.n
        plan = PermutationPlan(50, 13)
        report = permutation_test(sample, KernelPairSpec.dcov(), GammaSet((1,)), plan)

        def u_centered(dmat):
            rows = dmat.sum(axis=1, keepdims=True) / (n - 2)
            cols = dmat.sum(axis=0, keepdims=True) / (n - 2)
            total = dmat.sum() / ((n - 1) * (n - 2))
            out = dmat - rows - cols + total
            np.fill_diagonal(out, 0.0)
            return out

        def udcov(dx, dy):
            return float((u_centered(dx) * u_centered(dy)).sum() / (n * (n - 3)))

        dx = np.sqrt(((sample.x[:, None, :] - sample.x[None, :, :]) ** 2).sum(-1))
        dy = np.sqrt(((sample.y[:, None, :] - sample.y[None, :, :]) ** 2).sum(-1))
        pool = [udcov(dx, dy)]
        for b in range(1, 51):
            perm = plan.permutation(b, n)
            pool.append(udcov(dx, dy[np.ix_(perm, perm)]))
        # statistic: w_{n,1} = n times the metric
        assert report.per_gamma[1].scaled_stat == pytest.approx(n * pool[0], rel=1e-9)
        count = sum(1 for v in pool[1:] if v > pool[0])
        assert report.per_gamma[1].p_perm == pytest.approx((1 + count) / 51.0, abs=1e-12)

    def test_seeded_determinism_and_thread_invariance(self):
        sample = small_sample(4, n=28)
        spec = KernelPairSpec.dcov()
        gammas = GammaSet.default()
        a = permutation_test(sample, spec, gammas, PermutationPlan(60, 5), threads=1)
        b = permutation_test(sample, spec, gammas, PermutationPlan(60, 5), threads=4)
        assert a.per_gamma == b.per_gamma
        assert a.combined == b.combined
        assert a.triple == b.triple
        assert a.sigma0_sq == b.sigma0_sq

    def test_constant_y_degenerate_path(self):
        x = np.random.default_rng(6).standard_normal((20, 2))
        sample = validate_sample(x, np.zeros((20, 1)))
        report = permutation_test(sample, KernelPairSpec.dcov(), GammaSet.default(), PermutationPlan(25, 3))
        for res in report.per_gamma.values():
            assert res.scaled_stat == 0.0
            assert res.p_perm == 1.0
            assert res.p_asym is None
        for res in report.combined.values():
            assert res.p_perm == 1.0
        assert report.sigma0_sq == 0.0

    def test_inclusive_tie_mode_keeps_pvalues_valid(self):
        sample = small_sample(7, n=22)
        report = permutation_test(
            sample,
            KernelPairSpec.dcov(),
            GammaSet((1, 2)),
            PermutationPlan(30, 21),
            tie_mode="inclusive",
        )
        for res in report.per_gamma.values():
            assert 1.0 / 31.0 <= res.p_perm <= 1.0

    def test_seed_required(self):
        sample = small_sample(8, n=20)
        with pytest.raises(GammadepError) as exc:
            permutation_test(sample, KernelPairSpec.dcov(), GammaSet((1,)), PermutationPlan(10, None))
        assert exc.value.code == "SEED_REQUIRED"

    def test_sample_too_small(self):
        sample = small_sample(9, n=3)
        with pytest.raises(GammadepError) as exc:
            permutation_test(sample, KernelPairSpec.dcov(), GammaSet((1,)), PermutationPlan(10, 1))
        assert exc.value.code == "TOO_SMALL"

    def test_asymptotic_pvalues_only_for_even_and_infinite(self):
        sample = small_sample(10, n=30)
        report = permutation_test(
            sample, KernelPairSpec.dcov(), GammaSet.default(), PermutationPlan(20, 17)
        )
        for g, res in report.per_gamma.items():
            if g is not INFINITY and g % 2 == 1:
                assert res.p_asym is None
            else:
                assert res.p_asym is not None
                assert 0.0 < res.p_asym <= 1.0

    def test_pcov_report_has_no_asymptotic_pvalues(self):
        sample = small_sample(11, n=9)
        report = permutation_test(
            sample, KernelPairSpec.pcov(), GammaSet((1, 2)), PermutationPlan(15, 19)
        )
        assert report.sigma0_sq is None
        assert all(r.p_asym is None for r in report.per_gamma.values())
        assert all(0 < r.p_perm <= 1 for r in report.per_gamma.values())


class TestDeriveSeed:
    def test_deterministic_and_path_sensitive(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
        assert derive_seed(1) != derive_seed(2)


class TestPValueVector:
    def test_feeds_the_combiners(self):
        from gammadep import PValueVector

        vec = PValueVector((1, 2, INFINITY), (0.5, 0.25, 0.75))
        assert combine_min(vec) == -0.25
        assert combine_cauchy(vec) == pytest.approx(0.0, abs=1e-12)
        assert vec.per_gamma()[2] == 0.25


class TestPvaluesShrinkUnderDependence:
    def test_median_pvalue_decreases_with_n(self):
        # weak linear signal: the permutation p-value drifts toward zero as
        # the sample grows
        spec = KernelPairSpec.dcov()
        gammas = GammaSet((2,))
        medians = {}
        for n in (50, 200):
            ps = []
            for rep in range(40):
                rng = np.random.default_rng(derive_seed(606, n, rep))
                x = rng.standard_normal((n, 2))
                y = 0.35 * x + rng.standard_normal((n, 2))
                rpt = permutation_test(
                    validate_sample(x, y), spec, gammas,
                    PermutationPlan(80, derive_seed(607, n, rep)),
                )
                ps.append(rpt.per_gamma[2].p_perm)
            medians[n] = float(np.median(ps))
        assert medians[200] < medians[50]
