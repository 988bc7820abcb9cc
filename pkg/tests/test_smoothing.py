import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idrs.models import BallIndicator, ConstantClassifier, KnnVote, LinearHalfSpace
from idrs.smoothing import (
    ABSTAIN,
    SmoothingConfig,
    certify_constant,
    cohen_radius,
    estimate_pa,
    linear_truncation_curve,
    noise_generator,
    predict,
    sample_counts,
    theoretical_ceiling,
    undercertification_ratio,
)
from idrs.special import normal_cdf, normal_quantile
from idrs.worst_case import smoothed_ball_indicator_exact


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [{"n": 0}, {"n0": 0}, {"mc_batch": 0}, {"alpha": 0.0}, {"alpha": 0.5}, {"pB_mode": "other"}],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SmoothingConfig(**kwargs)


class TestSampling:
    def test_streams_are_independent(self):
        a = noise_generator(0, 1, 0, 0).standard_normal(5)
        b = noise_generator(0, 2, 0, 0).standard_normal(5)
        c = noise_generator(0, 1, 1, 0).standard_normal(5)
        assert not np.array_equal(a, b) and not np.array_equal(a, c)
        np.testing.assert_array_equal(a, noise_generator(0, 1, 0, 0).standard_normal(5))

    def test_counts_bit_identical(self):
        f = BallIndicator(np.zeros(3), 1.0)
        cfg = SmoothingConfig(n=5000, mc_batch=700, seed=11)
        a = sample_counts(f, [0.3, 0, 0], 0.8, cfg.n, cfg, sample_index=4)
        b = sample_counts(f, [0.3, 0, 0], 0.8, cfg.n, cfg, sample_index=4)
        np.testing.assert_array_equal(a, b)
        assert a.sum() == 5000

    def test_independent_of_other_inputs(self):
        # the result for input 7 does not depend on what ran before it
        f = BallIndicator(np.zeros(2), 1.0)
        cfg = SmoothingConfig(n=2000, seed=3)
        first = sample_counts(f, [0.5, 0.5], 1.0, cfg.n, cfg, sample_index=7)
        for i in range(5):
            sample_counts(f, [i, 0.0], 1.0, cfg.n, cfg, sample_index=i)
        np.testing.assert_array_equal(first, sample_counts(f, [0.5, 0.5], 1.0, cfg.n, cfg, sample_index=7))

    @pytest.mark.parametrize("seed", range(5))
    def test_frequency_matches_exact(self, seed):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(1, 8))
        center = rng.normal(size=dim)
        x = center + rng.normal(size=dim) * 0.5
        sigma, radius = rng.uniform(0.3, 1.5), rng.uniform(0.5, 2.5)
        cfg = SmoothingConfig(n=20_000, seed=seed)
        counts = sample_counts(BallIndicator(center, radius), x, sigma, cfg.n, cfg)
        p = smoothed_ball_indicator_exact(x, sigma, center, radius)
        se = math.sqrt(max(p * (1 - p), 1e-12) / cfg.n)
        assert abs(counts[1] / cfg.n - p) <= 4 * se + 1e-9


class TestPredict:
    def test_tiny_sigma_inside_ball(self):
        f = BallIndicator(np.zeros(2), 1.0)
        assert predict(f, 1e-3, [0.0, 0.0], SmoothingConfig(n=1000)) == 1

    def test_single_class(self):
        assert predict(ConstantClassifier(1), 1.0, [0.0], SmoothingConfig(n=200)) == 1

    def test_fair_coin_abstains(self):
        # the half-space through x0 gives p = 1/2 exactly
        f = LinearHalfSpace(np.array([1.0]), 0.0)
        alpha = 0.05
        picks = [predict(f, 1.0, [0.0], SmoothingConfig(n=200, alpha=alpha, seed=s)) for s in range(1000)]
        reject = np.mean(np.array(picks) != ABSTAIN)
        # binomial(1000, <=0.05): mean 50, sd about 7
        assert reject <= alpha + 3 * math.sqrt(alpha * (1 - alpha) / 1000)


class TestEstimatePa:
    def test_all_in_class(self):
        cfg = SmoothingConfig(n=1000, alpha=0.01)
        est = estimate_pa(ConstantClassifier(0), 1.0, [0.0], cfg)
        assert est.top == 0
        assert est.pA_lower == pytest.approx(0.01 ** (1 / 1000), rel=1e-12)
        assert est.pB_upper == pytest.approx(1 - est.pA_lower, rel=1e-12)

    def test_coverage(self):
        center, radius, sigma = np.zeros(2), 1.0, 1.0
        x = np.array([0.2, 0.0])
        p = smoothed_ball_indicator_exact(x, sigma, center, radius)
        alpha, reps = 0.05, 1000
        f = BallIndicator(center, radius)
        # the class selected from n0 draws may be 0 here, so compare the mass of class 1
        miss = 0
        for s in range(reps):
            cfg = SmoothingConfig(n0=10, n=200, alpha=alpha, seed=s, mc_batch=200)
            est = estimate_pa(f, sigma, x, cfg)
            truth = p if est.top == 1 else 1 - p
            miss += est.pA_lower > truth
        assert miss / reps <= alpha + 3 * math.sqrt(alpha * (1 - alpha) / reps)

    def test_estimated_mode_three_classes(self):
        pts = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
        f = KnnVote(pts, np.array([0, 1, 2]), k=1, num_classes=3)
        cfg = SmoothingConfig(n=5000, pB_mode="estimated")
        est = estimate_pa(f, 1.5, [0.3, 0.3], cfg)
        assert est.top == 0
        assert est.pA_lower + est.pB_upper < 1.0
        comp = estimate_pa(f, 1.5, [0.3, 0.3], SmoothingConfig(n=5000))
        # half the confidence budget gives a weaker lower bound
        assert est.pA_lower < comp.pA_lower


class TestCohenRadius:
    def test_even(self):
        assert cohen_radius(0.5, 0.5, 1.0) == 0.0

    def test_symmetric(self):
        r = cohen_radius(float(normal_cdf(1.0)), float(normal_cdf(-1.0)), 1.0)
        assert r == pytest.approx(1.0, abs=1e-9)

    def test_wrong_order(self):
        assert cohen_radius(0.3, 0.6, 2.0) == 0.0

    @given(st.floats(0.51, 0.9999), st.floats(0.01, 10.0))
    def test_complement_form(self, pa, sigma):
        assert cohen_radius(pa, 1 - pa, sigma) == pytest.approx(sigma * float(normal_quantile(pa)), rel=1e-9)

    def test_certify_constant_abstains(self):
        f = LinearHalfSpace(np.array([1.0]), 0.0)
        res = certify_constant(f, 1.0, [0.0], SmoothingConfig(n=1000))
        assert res.abstained and res.radius == 0.0

    def test_certify_constant_positive(self):
        f = LinearHalfSpace(np.array([1.0]), 0.0)
        res = certify_constant(f, 1.0, [2.0], SmoothingConfig(n=10_000))
        assert res.predicted == 1
        # exact radius is 2; the lower bound certifies a bit less
        assert 1.8 < res.radius < 2.0
        assert res.method == "cohen-constant"


class TestTruncation:
    def test_ceiling_value(self):
        c = theoretical_ceiling(1.0, 100_000, 0.001)
        assert c == pytest.approx(3.8106, abs=1e-3)

    def test_plateau(self):
        cfg = SmoothingConfig(n=100_000, alpha=0.001)
        curve = dict(linear_truncation_curve(1.0, [0.0, 1.0, 4.5, 6.0, 10.0], cfg))
        assert curve[0.0] == 0.0
        ceiling = theoretical_ceiling(1.0, cfg.n, cfg.alpha)
        for d in (4.5, 6.0, 10.0):
            assert curve[d] == pytest.approx(ceiling, rel=1e-9)
        assert curve[1.0] < 1.0

    @pytest.mark.parametrize("sigma", [0.25, 0.5, 2.0])
    def test_scales_linearly(self, sigma):
        assert theoretical_ceiling(sigma, 1000, 0.01) == pytest.approx(sigma * theoretical_ceiling(1, 1000, 0.01))

    @settings(max_examples=30)
    @given(st.floats(0.55, 0.999))
    def test_ratio_below_one(self, pa):
        assert 0.0 <= undercertification_ratio(pa, 100_000, 0.001) < 1.0

    def test_ratio_rejects(self):
        with pytest.raises(ValueError):
            undercertification_ratio(0.4, 100, 0.01)
