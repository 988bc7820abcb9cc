import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from idrs.special import (
    BinomialEstimate,
    NcChiSq,
    UnstableRegimeError,
    betainc,
    binomial_two_sided_pvalue,
    chernoff_central_bound,
    clopper_pearson_lower,
    clopper_pearson_upper,
    ncchsq_cdf,
    ncchsq_isf,
    ncchsq_quantile,
    ncchsq_sf,
    normal_cdf,
    normal_quantile,
)


def _density(t):
    return math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)


class TestNormal:
    def test_median(self):
        assert normal_cdf(0.0) == 0.5
        assert normal_quantile(0.5) == 0.0

    def test_cdf_against_quadrature(self):
        ref, _ = integrate.quad(_density, -np.inf, 1.0)
        assert abs(normal_cdf(1.0) - ref) < 1e-12
        assert normal_cdf(1.0) == pytest.approx(0.841345, abs=1e-6)

    def test_symmetry(self):
        assert normal_cdf(-1.0) == pytest.approx(1.0 - normal_cdf(1.0), abs=1e-15)

    def test_quantile_inverts_cdf(self):
        assert normal_quantile(0.841345) == pytest.approx(1.0, abs=1e-4)

    def test_extreme_tail_round_trip(self):
        z = normal_quantile(1e-12)
        assert math.isfinite(z) and z < 0
        assert normal_cdf(z) == pytest.approx(1e-12, rel=1e-6)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
    def test_quantile_domain(self, p):
        with pytest.raises(ValueError):
            normal_quantile(p)

    @given(st.floats(1e-300, 1 - 1e-16))
    def test_round_trip(self, p):
        assert abs(normal_cdf(normal_quantile(p)) - p) <= 1e-10


class TestNcChiSqCdf:
    def test_one_dof_central(self):
        ref = 2.0 * normal_cdf(1.0) - 1.0
        assert ncchsq_cdf(NcChiSq(1, 0.0), 1.0) == pytest.approx(ref, abs=1e-12)
        assert ncchsq_cdf(NcChiSq(1, 0.0), 1.0) == pytest.approx(0.682689, abs=1e-6)

    @pytest.mark.parametrize("dof", [1, 7, 300, 4000])
    def test_limits(self, dof):
        d = NcChiSq(dof, 3.0)
        assert ncchsq_cdf(d, 0.0) == 0.0
        assert ncchsq_cdf(d, 1e7) == 1.0

    def test_monte_carlo(self):
        rng = np.random.default_rng(20240611)
        z = np.array([math.sqrt(2.5), 0.0, 0.0, 0.0])
        hits = 0
        total = 10_000_000
        for _ in range(10):
            g = rng.standard_normal((total // 10, 4)) + z
            hits += int(np.count_nonzero(np.einsum("ij,ij->i", g, g) <= 3.0))
        p_hat = hits / total
        se = math.sqrt(p_hat * (1 - p_hat) / total)
        assert abs(ncchsq_cdf(NcChiSq(4, 2.5), 3.0) - p_hat) < 3 * se

    @pytest.mark.parametrize(
        "dof, lam, x",
        [(1, 0.0, 0.3), (2, 1.0, 2.0), (10, 5.0, 12.0), (100, 400.0, 480.0), (784, 3.0, 700.0),
         (3072, 1e4, 13500.0), (2, 2e5, 2.01e5), (50, 1e6, 1.002e6)],
    )
    def test_against_scipy(self, dof, lam, x):
        ref = stats.ncx2(dof, lam).cdf(x) if lam > 0 else stats.chi2(dof).cdf(x)
        assert ncchsq_cdf(NcChiSq(dof, lam), x) == pytest.approx(ref, rel=1e-9, abs=1e-14)

    # 50-digit references; the plain lower incomplete gamma is off by up to 30% here
    @pytest.mark.parametrize(
        "shape, x, ref",
        [(1e6, 994000.0, 9.178900262302e-10), (1e7, 9981026.33403899, 9.643931796038e-10),
         (1e8, 99910000.0, 1.1014878354921e-19)],
    )
    def test_huge_central_lower_tail(self, shape, x, ref):
        got = ncchsq_cdf(NcChiSq(int(2 * shape), 0.0), 2 * x)
        assert got == pytest.approx(ref, rel=1e-10)

    @pytest.mark.parametrize(
        "lam, x, ref",
        [(1e7, 9968380.221026609, 2.810541145068785e-07), (5e7, 49915150.184984826, 9.716489471872068e-10)],
    )
    def test_huge_noncentral_lower_tail(self, lam, x, ref):
        assert ncchsq_cdf(NcChiSq(3, lam), x) == pytest.approx(ref, rel=1e-9)

    @pytest.mark.parametrize("dof, lam, x", [(2, 0.5, 30.0), (20, 10.0, 90.0), (784, 100.0, 1200.0)])
    def test_upper_tail_precision(self, dof, lam, x):
        ref = stats.ncx2(dof, lam).sf(x)
        assert ncchsq_sf(NcChiSq(dof, lam), x) == pytest.approx(ref, rel=1e-8)

    @given(
        st.integers(1, 4000),
        st.floats(0.0, 1e5),
        st.floats(0.0, 1e5),
        st.floats(0.0, 2e5),
    )
    def test_nonincreasing_in_noncentrality(self, dof, lam_a, lam_b, x):
        lo, hi = sorted((lam_a, lam_b))
        assert ncchsq_cdf(NcChiSq(dof, hi), x) <= ncchsq_cdf(NcChiSq(dof, lo), x) + 1e-13

    @given(st.integers(1, 2000), st.floats(0.0, 1e4), st.floats(0.0, 3e4), st.floats(0.0, 3e4))
    def test_nondecreasing_in_x(self, dof, lam, a, b):
        d = NcChiSq(dof, lam)
        lo, hi = sorted((a, b))
        assert ncchsq_cdf(d, lo) <= ncchsq_cdf(d, hi) + 1e-13

    @given(st.integers(1, 2000), st.floats(0.0, 1e4), st.floats(0.0, 3e4))
    def test_cdf_plus_sf(self, dof, lam, x):
        d = NcChiSq(dof, lam)
        assert abs(ncchsq_cdf(d, x) + ncchsq_sf(d, x) - 1.0) < 1e-12

    def test_negative_argument(self):
        with pytest.raises(ValueError):
            ncchsq_cdf(NcChiSq(3, 1.0), -1.0)

    @pytest.mark.parametrize("dof, lam", [(0, 1.0), (2.5, 1.0), (3, -1.0)])
    def test_invalid_law(self, dof, lam):
        with pytest.raises(ValueError):
            NcChiSq(dof, lam)

    @pytest.mark.parametrize("lam", [float("inf"), float("nan"), 1e16])
    def test_unstable_noncentrality(self, lam):
        with pytest.raises(UnstableRegimeError):
            ncchsq_cdf(NcChiSq(3, lam), 1.0)

    def test_path_switch(self):
        assert NcChiSq(10, 1e6).path == "series"
        big = NcChiSq(10, 1e9)
        assert big.path == "normal-approx"
        # the approximation is still centred where the law is
        assert big.cdf(big.mean - 10 * big.std) < 1e-10
        assert big.cdf(big.mean + 10 * big.std) > 1 - 1e-10
        assert abs(big.cdf(big.mean) - 0.5) < 1e-3

    def test_strict_mode_refuses_approximation(self):
        with pytest.raises(UnstableRegimeError):
            NcChiSq(10, 1e9, strict=True)


class TestNcChiSqQuantile:
    def test_exponential_case(self):
        q = ncchsq_quantile(NcChiSq(2, 0.0), 1.0 - math.exp(-1.0))
        assert q == pytest.approx(2.0, abs=1e-8)

    @given(st.integers(1, 4000))
    def test_central_median_sandwich(self, dof):
        med = ncchsq_quantile(NcChiSq(dof, 0.0), 0.5)
        assert dof - 1 <= med < dof

    @given(st.integers(1, 4000), st.floats(0.0, 1e5))
    def test_noncentral_median_bounds(self, dof, c):
        med = ncchsq_quantile(NcChiSq(dof, c), 0.5)
        central = ncchsq_quantile(NcChiSq(dof, 0.0), 0.5)
        assert dof - 1 + c <= med * (1 + 1e-12)
        assert med <= (central + c) * (1 + 1e-12)

    def test_round_trip_example(self):
        d = NcChiSq(10, 5.0)
        assert ncchsq_cdf(d, ncchsq_quantile(d, 0.9)) == pytest.approx(0.9, abs=1e-8)

    @given(st.integers(1, 4000), st.floats(0.0, 1e6), st.floats(1e-6, 1 - 1e-6))
    def test_round_trip(self, dof, lam, p):
        d = NcChiSq(dof, lam)
        assert abs(ncchsq_cdf(d, ncchsq_quantile(d, p)) - p) <= 1e-8

    @given(st.integers(1, 4000), st.floats(0.0, 1e5), st.floats(1e-12, 1e-3))
    def test_isf_upper_tail(self, dof, lam, q):
        d = NcChiSq(dof, lam)
        assert ncchsq_sf(d, ncchsq_isf(d, q)) == pytest.approx(q, rel=1e-6)

    @pytest.mark.parametrize("dof, lam, p", [(3, 0.0, 0.25), (40, 12.0, 0.7), (3072, 2e4, 1e-4)])
    def test_against_scipy(self, dof, lam, p):
        ref = stats.ncx2(dof, lam).ppf(p) if lam > 0 else stats.chi2(dof).ppf(p)
        assert ncchsq_quantile(NcChiSq(dof, lam), p) == pytest.approx(ref, rel=1e-8)

    @pytest.mark.parametrize("p", [0.0, 1.0, -1.0, 2.0])
    def test_domain(self, p):
        with pytest.raises(ValueError):
            ncchsq_quantile(NcChiSq(2, 1.0), p)


class TestChernoff:
    def test_limit_near_one(self):
        assert chernoff_central_bound(50, 1 - 1e-9) == pytest.approx(1.0, abs=1e-12)

    def test_lower_tail_example(self):
        bound = chernoff_central_bound(100, 0.5)
        assert bound == pytest.approx((0.5 * math.exp(0.5)) ** 50, rel=1e-12)
        assert bound == pytest.approx(6.3953197704e-05, rel=1e-9)
        assert ncchsq_cdf(NcChiSq(100, 0.0), 50.0) <= bound

    def test_upper_tail_example(self):
        bound = chernoff_central_bound(2, 2.0)
        assert bound == pytest.approx(2 * math.exp(-1), rel=1e-12)
        assert 1 - ncchsq_cdf(NcChiSq(2, 0.0), 4.0) <= bound

    def test_one_is_rejected(self):
        with pytest.raises(ValueError):
            chernoff_central_bound(5, 1.0)

    @given(st.integers(1, 4000), st.floats(0.01, 0.999))
    def test_dominates_lower_tail(self, dof, z):
        assert ncchsq_cdf(NcChiSq(dof, 0.0), z * dof) <= chernoff_central_bound(dof, z) * (1 + 1e-9)

    @given(st.integers(1, 4000), st.floats(1.001, 20.0))
    def test_dominates_upper_tail(self, dof, z):
        assert ncchsq_sf(NcChiSq(dof, 0.0), z * dof) <= chernoff_central_bound(dof, z) * (1 + 1e-9)


def _brute_lower(k, n, level):
    # largest p with P(X >= k | p) <= 1 - level, by bisection on the exact tail
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if stats.binom.sf(k - 1, n, mid) <= 1 - level:
            lo = mid
        else:
            hi = mid
    return lo


class TestClopperPearson:
    def test_no_successes(self):
        assert clopper_pearson_lower(0, 50, 0.999) == 0.0

    def test_all_successes_closed_form(self):
        assert clopper_pearson_lower(100, 100, 0.999) == pytest.approx(0.001 ** 0.01, rel=1e-14)
        assert clopper_pearson_lower(100, 100, 0.999) == pytest.approx(0.93325, abs=1e-5)

    def test_large_n_example(self):
        lb = clopper_pearson_lower(99990, 100000, 0.999)
        assert 0.998 < lb < 0.9999

    @pytest.mark.parametrize("k, n, level", [(1, 10, 0.95), (7, 10, 0.9), (99990, 100000, 0.999),
                                             (5000, 10000, 0.999), (3, 1000, 0.99)])
    def test_against_brute_force(self, k, n, level):
        assert clopper_pearson_lower(k, n, level) == pytest.approx(_brute_lower(k, n, level), abs=1e-9)

    @pytest.mark.parametrize("k, n, level", [(1, 10, 0.95), (50, 100, 0.999), (99999, 100000, 0.9995)])
    def test_against_beta_quantile(self, k, n, level):
        assert clopper_pearson_lower(k, n, level) == pytest.approx(
            stats.beta.ppf(1 - level, k, n - k + 1), rel=1e-9
        )
        assert clopper_pearson_upper(k, n, level) == pytest.approx(
            stats.beta.ppf(level, k + 1, n - k), rel=1e-9
        )

    @given(st.integers(1, 5000), st.data())
    def test_bounds_bracket_estimate(self, n, data):
        k = data.draw(st.integers(0, n))
        est = BinomialEstimate(k, n, 0.99)
        assert 0.0 <= est.lower <= k / n <= est.upper <= 1.0
        assert est.lower < 1.0

    @pytest.mark.parametrize("p_true", [0.05, 0.5, 0.9, 0.99])
    def test_coverage(self, p_true):
        rng = np.random.default_rng(7)
        n, level = 200, 0.95
        draws = rng.binomial(n, p_true, 10_000)
        lowers = {k: clopper_pearson_lower(int(k), n, level) for k in np.unique(draws)}
        covered = np.mean([lowers[k] <= p_true for k in draws])
        assert covered >= level - 0.01

    @pytest.mark.parametrize("k, n, level", [(-1, 10, 0.9), (11, 10, 0.9), (3, 0, 0.9), (3, 10, 1.0)])
    def test_invalid(self, k, n, level):
        with pytest.raises(ValueError):
            clopper_pearson_lower(k, n, level)

    @pytest.mark.parametrize("a, b, x", [(0.5, 0.5, 0.3), (3.0, 7.0, 0.2), (200.0, 3.0, 0.99), (1e4, 2.0, 0.9999)])
    def test_incomplete_beta(self, a, b, x):
        from scipy.special import betainc as ref

        assert betainc(a, b, x) == pytest.approx(ref(a, b, x), rel=1e-10, abs=1e-300)


class TestBinomialPValue:
    def test_centre(self):
        assert binomial_two_sided_pvalue(5, 10, 0.5) == 1.0

    def test_extreme(self):
        assert binomial_two_sided_pvalue(10, 10, 0.5) == pytest.approx(2 * 0.5**10, rel=1e-12)

    @pytest.mark.parametrize("k, n, p0", [(90, 100, 0.5), (3, 40, 0.2), (60, 100, 0.5), (0, 7, 0.3)])
    def test_exhaustive_summation(self, k, n, p0):
        pmf = np.array([math.comb(n, j) * p0**j * (1 - p0) ** (n - j) for j in range(n + 1)])
        ref = pmf[pmf <= pmf[k] * (1 + 1e-7)].sum()
        assert binomial_two_sided_pvalue(k, n, p0) == pytest.approx(min(1.0, ref), rel=1e-9)

    @pytest.mark.parametrize("k, n, p0", [(12, 40, 0.5), (70, 100, 0.6), (1, 30, 0.1)])
    def test_against_scipy(self, k, n, p0):
        assert binomial_two_sided_pvalue(k, n, p0) == pytest.approx(stats.binomtest(k, n, p0).pvalue, rel=1e-9)
