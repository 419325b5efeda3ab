import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minsnap import (
    ConstraintSet,
    DomainError,
    Frame,
    GridError,
    ProblemSpec,
    SegmentPolynomial,
    Spline,
    TimeGrid,
    ValidationError,
    continuity_residuals,
    eval_derivative,
    eval_spline,
    snap_cost,
    solve_minimum_snap,
)
from minsnap.model import endpoint_derivatives, evaluate, to_dimensional

from conftest import random_problem

CUBIC = [0.0, 0.0, 3.0, -2.0]


class TestTimeGrid:
    def test_widths_are_half_lengths(self):
        g = TimeGrid([0.0, 1.0, 4.0])
        np.testing.assert_array_equal(g.widths, [0.5, 1.5])
        assert g.segment_count == 2

    @pytest.mark.parametrize("times", [[0.0], [0.0, 0.0], [0.0, 2.0, 1.0], [0.0, np.nan]])
    def test_rejects_bad_knots(self, times):
        with pytest.raises(GridError):
            TimeGrid(times)

    def test_immutable(self):
        g = TimeGrid([0.0, 1.0])
        with pytest.raises(ValueError):
            g.times[0] = 3.0

    def test_locate_half_open_last_closed(self):
        g = TimeGrid([0.0, 1.0, 2.0])
        np.testing.assert_array_equal(g.locate([0.0, 0.5, 1.0, 2.0]), [0, 0, 1, 1])


class TestEvalDerivative:
    def test_examples(self):
        seg = SegmentPolynomial(CUBIC, (0.0, 1.0))
        assert eval_derivative(seg, 1.0, 0) == pytest.approx(1.0)
        assert eval_derivative(seg, 0.5, 1) == pytest.approx(1.5)
        assert eval_derivative(SegmentPolynomial([5.0], (0, 1)), 0.3, 1) == 0.0

    def test_order_beyond_degree_is_zero(self):
        assert eval_derivative(SegmentPolynomial(CUBIC, (0, 1)), 0.7, 4) == 0.0

    @settings(max_examples=60, deadline=None)
    @given(
        coeffs=st.lists(st.floats(-5, 5), min_size=2, max_size=10),
        t=st.floats(-2, 2),
    )
    def test_first_derivative_matches_central_difference(self, coeffs, t):
        seg = SegmentPolynomial(coeffs, (-3.0, 3.0))
        h = 1e-5
        fd = (eval_derivative(seg, t + h) - eval_derivative(seg, t - h)) / (2 * h)
        exact = eval_derivative(seg, t, 1)
        # truncation + rounding bound for |t| <= 2, |p| <= 5, degree <= 9
        assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact)) + 1e-6 * np.abs(coeffs).sum() * 2 ** 9


class TestEvalSpline:
    def test_dimensional_cubic(self):
        sp = Spline([CUBIC], TimeGrid([0.0, 1.0]))
        assert eval_spline(sp, 1.0) == pytest.approx(1.0)

    def test_nondimensional_midpoint_maps_to_zero(self):
        # p(tau) = 7 + tau: value at tau=0 is 7
        sp = Spline([[7.0, 1.0]], TimeGrid([1.0, 3.0]), Frame.NONDIMENSIONAL)
        assert eval_spline(sp, 2.0) == pytest.approx(7.0)

    def test_nondimensional_chain_rule(self):
        # delta = 2; d/dtau (tau^2) at tau = 0.5 is 1, physical derivative is 1/2
        sp = Spline([[0.0, 0.0, 1.0]], TimeGrid([0.0, 4.0]), Frame.NONDIMENSIONAL)
        assert eval_spline(sp, 3.0, 1) == pytest.approx(0.5)
        assert eval_spline(sp, 3.0, 2) == pytest.approx(2.0 / 4.0)

    def test_out_of_domain(self):
        sp = Spline([CUBIC], TimeGrid([0.0, 1.0]))
        for t in (-1e-9, 1.0 + 1e-9):
            with pytest.raises(DomainError):
                eval_spline(sp, t)

    def test_row_count_must_match_grid(self):
        with pytest.raises(ValidationError):
            Spline([CUBIC, CUBIC], TimeGrid([0.0, 1.0]))


class TestSnapCost:
    def test_cubic_acceleration_cost(self):
        # integral_0^1 (6 - 12t)^2 dt = 12
        sp = Spline([CUBIC], TimeGrid([0.0, 1.0]))
        assert snap_cost(sp, 2) == pytest.approx(12.0)

    def test_constant_has_zero_cost(self):
        sp = Spline([[3.0, 0.0, 0.0, 0.0]], TimeGrid([0.0, 2.0]))
        assert snap_cost(sp, 1) == 0.0

    def test_mirrored_segments_contribute_equally(self):
        # p(t) on [0,1] and p(-t) on [-1,0]
        left = Spline([[0.0, 0.0, 3.0, 2.0]], TimeGrid([-1.0, 0.0]))
        right = Spline([CUBIC], TimeGrid([0.0, 1.0]))
        both = Spline([[0.0, 0.0, 3.0, 2.0], CUBIC], TimeGrid([-1.0, 0.0, 1.0]))
        assert snap_cost(left, 2) == pytest.approx(snap_cost(right, 2))
        assert snap_cost(both, 2) == pytest.approx(2 * snap_cost(right, 2))

    def test_frames_agree(self, rng):
        spec = random_problem(rng, 4, 3, widths=(0.3, 1.0), t0=-1.0)
        sp, _ = solve_minimum_snap(spec)
        assert snap_cost(to_dimensional(sp), 2) == pytest.approx(snap_cost(sp, 2), rel=1e-8)

    def test_translation_invariance(self, rng):
        spec = random_problem(rng, 6, 5, widths=(0.2, 3.0), t0=0.0)
        shifted = spec.with_grid(spec.grid.shifted(100.0))
        a, _ = solve_minimum_snap(spec)
        b, _ = solve_minimum_snap(shifted)
        assert snap_cost(b, 4) == pytest.approx(snap_cost(a, 4), rel=1e-9)


class TestContinuity:
    def test_single_segment_is_empty(self):
        assert continuity_residuals(Spline([CUBIC], TimeGrid([0.0, 1.0])), 2).size == 0

    def test_solved_spline_is_continuous(self, rng):
        spec = random_problem(rng, 7, 4)
        sp, _ = solve_minimum_snap(spec)
        assert continuity_residuals(sp, 4).max() <= 1e-6 * (1 + 10.0)

    def test_corruption_is_detected_at_that_knot(self, rng):
        spec = random_problem(rng, 5, 3, widths=(0.5, 1.0))
        sp, _ = solve_minimum_snap(spec)
        P = sp.coefficients.copy()
        P[2, 0] += 1e-3
        res = continuity_residuals(Spline(P, sp.grid, sp.frame), 3).reshape(4, 3)
        # segment 2 touches knots 2 and 3, i.e. junction rows 1 and 2
        assert res[1, 0] == pytest.approx(1e-3, rel=1e-6)
        assert res[2, 0] == pytest.approx(1e-3, rel=1e-6)
        assert res[0].max() < 1e-9 and res[3].max() < 1e-9


class TestFrames:
    def test_reexpansion_matches_nondimensional_evaluation(self, rng):
        # all deltas <= 1 keeps the re-expansion stable
        for s in (2, 3, 5):
            spec = random_problem(rng, 5, s, widths=(0.2, 1.0), t0=-2.0)
            sp, _ = solve_minimum_snap(spec)
            dim = to_dimensional(sp)
            ts = np.linspace(spec.grid.times[0], spec.grid.times[-1], 301)
            for r in range(s):
                a, b = evaluate(sp, ts, r), evaluate(dim, ts, r)
                assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(a))

    def test_endpoint_derivatives_layout(self):
        sp = Spline([CUBIC], TimeGrid([0.0, 1.0]))
        np.testing.assert_allclose(endpoint_derivatives(sp, 2), [[0.0, 0.0, 1.0, 0.0]], atol=1e-15)


class TestConstraintSet:
    def test_duplicate_rejected(self):
        with pytest.raises(ValidationError):
            ConstraintSet.from_records([(0, 0, 1.0), (0, 0, 1.0)])

    def test_conflict_rejected(self):
        with pytest.raises(ValidationError, match="both"):
            ConstraintSet.from_records([(1, 0, 1.0), (1, 0, 2.0)])

    def test_counts(self):
        cs = ConstraintSet.waypoints([0.0, 1.0, 2.0, 3.0], 2)
        np.testing.assert_array_equal(cs.free_counts(3, 2), [[0, 1], [1, 1], [1, 0]])
        # |Xi| = 2sk - m
        assert cs.endpoint_constraint_count(3, 2) == 2 * 2 * 3 - 4

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            ProblemSpec(TimeGrid([0, 1]), ConstraintSet({(2, 0): 0.0}), 2)
        with pytest.raises(ValidationError):
            ProblemSpec(TimeGrid([0, 1]), ConstraintSet({(0, 2): 0.0}), 2)


class TestProblemSpec:
    def test_n_must_be_2s(self):
        with pytest.raises(ValidationError):
            ProblemSpec(TimeGrid([0, 1]), ConstraintSet(), 2, n=5)

    def test_s_positive(self):
        with pytest.raises(ValidationError):
            ProblemSpec(TimeGrid([0, 1]), ConstraintSet(), 0)

    def test_defaults(self):
        spec = ProblemSpec.waypoints([0, 1, 2], [0, 1, 0], 5)
        assert (spec.k, spec.n, spec.r) == (2, 10, 4)
