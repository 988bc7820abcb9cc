import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from idrs.bounds import (
    RootNotBracketedError,
    ThresholdQuery,
    _bisect,
    corollary_bound,
    is_hopeless_greater,
    is_hopeless_less,
    max_ratio_variation_scaling,
    practical_threshold,
    practical_threshold_closed_form,
    theoretical_threshold,
    theoretical_threshold_less,
    threshold_rows,
)
from idrs.worst_case import AdversaryPair, xi_greater

# Published three-decimal thresholds for sigma1/sigma0.
TABLE = {
    (784, 0.9): 0.946, (784, 0.99): 0.924, (784, 0.999): 0.908, (784, 0.99993): 0.892,
    (3072, 0.9): 0.973, (3072, 0.99): 0.961, (3072, 0.999): 0.953, (3072, 0.99993): 0.945,
    (196608, 0.9): 0.997, (196608, 0.99): 0.995, (196608, 0.999): 0.994, (196608, 0.99993): 0.993,
}

queries = st.builds(ThresholdQuery, dof=st.integers(1, 5000), pA=st.floats(0.51, 0.99999))


class TestHopeless:
    def test_mnist_example(self):
        assert is_hopeless_greater(0.90, ThresholdQuery(784, 0.9))

    def test_cifar_example(self):
        assert not is_hopeless_greater(0.999, ThresholdQuery(3072, 0.99))

    def test_near_one(self):
        assert not is_hopeless_greater(1 - 1e-9, ThresholdQuery(10, 0.6))

    def test_less_example(self):
        assert is_hopeless_less(1.2, ThresholdQuery(3072, 0.99))

    def test_less_near_one(self):
        assert not is_hopeless_less(1 + 1e-9, ThresholdQuery(100_000, 0.99))

    def test_reciprocal_symmetry(self):
        q = ThresholdQuery(3072, 0.99)
        assert theoretical_threshold_less(q) == pytest.approx(1 / theoretical_threshold(q), abs=2e-3)

    @pytest.mark.parametrize("ratio", [0.0, 1.0, 1.5])
    def test_ratio_domain(self, ratio):
        with pytest.raises(ValueError):
            is_hopeless_greater(ratio, ThresholdQuery(10, 0.9))

    @pytest.mark.parametrize("dof, pa", [(0, 0.9), (10, 0.5), (10, 1.0)])
    def test_query_domain(self, dof, pa):
        with pytest.raises(ValueError):
            ThresholdQuery(dof, pa)

    @given(queries, st.floats(1e-4, 1 - 1e-4))
    def test_consistent_with_threshold(self, q, t):
        thr = theoretical_threshold(q)
        if abs(t - thr) > 1e-6:
            assert is_hopeless_greater(t, q) == (t < thr)

    @given(queries.filter(lambda q: q.dof >= 2), st.floats(1e-4, 3.0))
    def test_less_hopeless_is_sound(self, q, excess):
        # a flagged ratio really has worst-case mass above one half at a = 0
        from idrs.worst_case import xi_less

        ratio = 1.0 + excess
        if is_hopeless_less(ratio, q):
            assert xi_less(AdversaryPair(1.0, ratio, 0.0, q.dof, q.pA)) > 0.5


class TestCorollary:
    def test_weaker_than_theorem(self):
        q = ThresholdQuery(3072, 0.999)
        assert corollary_bound(q) <= theoretical_threshold(q)
        assert theoretical_threshold(q) == pytest.approx(0.953, abs=1e-3)

    def test_limit(self):
        assert corollary_bound(ThresholdQuery(10**12, 0.999)) == pytest.approx(1.0, abs=1e-5)

    def test_undefined_regime(self):
        assert corollary_bound(ThresholdQuery(4, 0.999)) is None

    @given(queries)
    def test_always_weaker(self, q):
        c = corollary_bound(q)
        if c is not None:
            assert c <= theoretical_threshold(q) + 1e-9
            assert is_hopeless_greater(c * (1 - 1e-9), q)


class TestThresholds:
    @pytest.mark.parametrize("key", sorted(TABLE))
    def test_table(self, key):
        assert theoretical_threshold(ThresholdQuery(*key)) == pytest.approx(TABLE[key], abs=1e-3)

    @given(st.integers(1, 10**6), st.floats(0.51, 0.9999))
    def test_increasing_in_dimension(self, n, pa):
        assert theoretical_threshold(ThresholdQuery(n, pa)) <= theoretical_threshold(ThresholdQuery(2 * n, pa)) + 1e-9

    @given(queries)
    def test_sound(self, q):
        t = theoretical_threshold(q) * (1 - 1e-4)
        if t > 1e-4:
            assert xi_greater(AdversaryPair(1.0, t, 0.0, q.dof, q.pA)) > 0.5

    @given(queries)
    def test_practical_root(self, q):
        t = practical_threshold(q)
        assert xi_greater(AdversaryPair(1.0, t, 0.0, q.dof, q.pA)) == pytest.approx(0.5, abs=1e-6)

    @pytest.mark.parametrize("n, pa", [(10, 0.9), (784, 0.999), (3072, 0.9)])
    def test_practical_just_above_root(self, n, pa):
        t = practical_threshold(ThresholdQuery(n, pa)) * (1 + 1e-4)
        assert xi_greater(AdversaryPair(1.0, t, 0.0, n, pa)) < 0.5

    @given(queries)
    def test_practical_not_below_theoretical(self, q):
        assert practical_threshold(q) >= theoretical_threshold(q) - 1e-9

    @given(queries)
    def test_closed_form_agrees(self, q):
        assert practical_threshold(q) == pytest.approx(practical_threshold_closed_form(q), abs=1e-8)

    def test_gap_shrinks(self):
        gaps = []
        for n in (10, 1000):
            q = ThresholdQuery(n, 0.9)
            gaps.append(practical_threshold(q) - theoretical_threshold(q))
        assert gaps[1] < gaps[0]

    def test_not_bracketed(self):
        with pytest.raises(RootNotBracketedError):
            _bisect(lambda t: 1.0, 0.0, 1.0)

    def test_rows(self):
        rows = threshold_rows([3072], [0.99])
        assert len(rows) == 1
        row = rows[0]
        assert set(row) == {"N", "pA", "theoretical", "practical", "corollary"}
        assert row["corollary"] <= row["theoretical"] <= row["practical"]


class TestScaling:
    def test_quarter_dims(self):
        a, b = max_ratio_variation_scaling([100, 400], 0.01, 0.5)
        assert b == pytest.approx(a / 2, abs=1e-9)

    def test_single(self):
        (v,) = max_ratio_variation_scaling([3072], 0.001, 1.0)
        assert v == pytest.approx(math.sqrt(-math.log(0.001)) / math.sqrt(3072), rel=1e-14)

    def test_vanishes(self):
        assert max(max_ratio_variation_scaling([10, 100], 1 - 1e-12, 1.0)) < 1e-5

    @given(st.lists(st.integers(1, 10**6), min_size=2, unique=True))
    def test_decreasing(self, dims):
        dims = sorted(dims)
        vals = max_ratio_variation_scaling(dims, 0.01, 0.3)
        assert all(b < a for a, b in zip(vals, vals[1:]))
        for (n1, v1), (n2, v2) in zip(zip(dims, vals), zip(dims[1:], vals[1:])):
            assert v2 / v1 == pytest.approx(math.sqrt(n1 / n2), rel=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            max_ratio_variation_scaling([], 0.1, 1.0)
