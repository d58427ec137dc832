import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rwlp.errors import ParameterError
from rwlp.threshold_analysis import (DiscreteDistribution, RecursionSpec, ThresholdPoint, contraction,
                                     curve_from_csv, curve_is_monotone, curve_to_csv, eta_distribution,
                                     evolve_recursion, gamma_factor, laplace_bound, minimize_laplace,
                                     robustness_curve, robustness_point)

REFERENCE = Path(__file__).parent / "data" / "robustness_curve_reference.csv"


class TestEta:
    def test_atoms(self):
        d = eta_distribution(0.1, 2.0)
        assert d.prob_of(-2.0) == pytest.approx(0.1)
        assert d.prob_of(1.0) == pytest.approx(0.9)
        assert d.mean() == pytest.approx(0.7)

    def test_invalid(self):
        with pytest.raises(ParameterError):
            eta_distribution(0.0, 1.0)
        with pytest.raises(ParameterError):
            DiscreteDistribution(np.array([0.0, 1.0]), np.array([0.5, 0.6]))


class TestRecursion:
    def test_depth_zero_law(self):
        # X_0 is the min of five eta draws: equals 1 only if none is flipped
        d = evolve_recursion(RecursionSpec(3, 6, 1.0, 0.01, j=0))
        assert d.prob_of(1.0) == pytest.approx(0.99**5, rel=1e-12)
        assert d.prob_of(-1.0) == pytest.approx(1 - 0.99**5, rel=1e-12)

    def test_probabilities_sum_to_one(self):
        for j in (0, 1, 2):
            d = evolve_recursion(RecursionSpec(3, 6, 1.7, 0.03, j=j))
            assert d.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_custom_weights(self):
        d = evolve_recursion(RecursionSpec(3, 4, 1.0, 0.1, j=0, weights=(3.0,)))
        assert set(np.round(d.values, 9)) == {-3.0, 3.0}
        with pytest.raises(ParameterError):
            RecursionSpec(3, 4, 1.0, 0.1, j=1, weights=(1.0,))

    @pytest.mark.parametrize("j", [0, 1])
    def test_montecarlo_matches_exact(self, j):
        spec = RecursionSpec(3, 6, 1.5, 0.05, j=j)
        exact = evolve_recursion(spec)
        mc = evolve_recursion(spec, mode="montecarlo", samples=200_000, seed=11)
        for v, pr in exact.atoms:
            sigma = math.sqrt(pr * (1 - pr) / mc.samples)
            assert abs(mc.prob_of(v) - pr) <= 4 * sigma + 1e-12

    def test_montecarlo_deterministic(self):
        spec = RecursionSpec(3, 6, 1.0, 0.05, j=1)
        a = evolve_recursion(spec, mode="montecarlo", samples=20_000, seed=3)
        b = evolve_recursion(spec, mode="montecarlo", samples=20_000, seed=3)
        assert np.array_equal(a.values, b.values) and np.array_equal(a.probs, b.probs)

    def test_bad_mode(self):
        with pytest.raises(ParameterError):
            evolve_recursion(RecursionSpec(3, 6, 1.0, 0.05), mode="fast")


class TestLaplace:
    def test_zero_t(self):
        d = evolve_recursion(RecursionSpec(3, 6, 1.0, 0.02, j=1))
        assert laplace_bound(d, 0.0) == pytest.approx(1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.001, 5), st.floats(0.001, 5), st.floats(0, 1))
    def test_convex_in_t(self, t1, t2, a):
        d = eta_distribution(0.07, 1.3)
        mid = laplace_bound(d, a * t1 + (1 - a) * t2)
        assert mid <= a * laplace_bound(d, t1) + (1 - a) * laplace_bound(d, t2) + 1e-12

    def test_minimizer_matches_closed_form(self):
        p, C = 0.02, 1.5
        value, t = minimize_laplace(eta_distribution(p, C))
        assert t == pytest.approx(math.log((1 - p) / (C * p)) / (C + 1), rel=1e-4)
        assert 5 * value == pytest.approx(gamma_factor(6, C, p), rel=1e-8)

    def test_gamma_at_one(self):
        assert gamma_factor(6, 1.0, 0.01) == pytest.approx(0.99498743710662, rel=1e-12)
        with pytest.raises(ParameterError):
            gamma_factor(6, 0.5, 0.01)


class TestContraction:
    @pytest.mark.parametrize("j, expected", [(0, 0.42961329189066605), (1, 0.15385210896056137)])
    def test_regression_values(self, j, expected):
        c, _ = contraction(RecursionSpec(3, 6, 1.0, 0.01, j))
        assert c == pytest.approx(expected, rel=1e-6)
        assert c < 1

    def test_fails_at_high_noise(self):
        assert contraction(RecursionSpec(3, 6, 1.0, 0.49, 1))[0] >= 1

    def test_nondecreasing_in_c(self):
        cs = [contraction(RecursionSpec(3, 6, C, 0.02, 1))[0] for C in np.linspace(1, 3, 9)]
        assert all(a <= b + 1e-9 for a, b in zip(cs, cs[1:]))

    def test_deeper_is_tighter(self):
        cs = [contraction(RecursionSpec(3, 6, 1.0, 0.01, j))[0] for j in (0, 1, 2)]
        assert cs[0] > cs[1] > cs[2]


class TestCurve:
    def test_point_boundary(self):
        pt = robustness_point(3, 6, 0.01)
        assert contraction(RecursionSpec(3, 6, pt.C_max, 0.01))[0] < 1
        assert contraction(RecursionSpec(3, 6, pt.C_max + 2e-3, 0.01))[0] >= 1

    def test_point_absent(self):
        assert robustness_point(3, 6, 0.2).C_max is None

    def test_matches_reference(self):
        ref = curve_from_csv(REFERENCE.read_text())
        got = robustness_curve(3, 6, [pt.p for pt in ref], 1)
        for a, b in zip(ref, got):
            assert a.p == b.p
            assert (a.C_max is None) == (b.C_max is None)
            if a.C_max is not None:
                assert b.C_max == pytest.approx(a.C_max, rel=1e-9)
            assert b.c == pytest.approx(a.c, rel=1e-9)
        assert curve_is_monotone(got)

    def test_monotone_detection(self):
        pts = [ThresholdPoint(0.01, 2.0, 1, 1.0, 1.0, 0.9), ThresholdPoint(0.02, 2.5, 1, 1.0, 1.0, 0.9)]
        assert not curve_is_monotone(pts)
        pts[1] = ThresholdPoint(0.02, None, 1, 1.0, 1.0, 1.2)
        assert curve_is_monotone(pts)

    def test_csv_round_trip(self):
        pts = robustness_curve(3, 6, [0.01, 0.04], 0)
        assert curve_to_csv(curve_from_csv(curve_to_csv(pts))) == curve_to_csv(pts)

    def test_bad_grid(self):
        with pytest.raises(ParameterError):
            robustness_curve(3, 6, [0.6])
