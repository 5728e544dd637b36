"""Reaction-term representation, root audit, and energy condition."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from terracelab.errors import DegenerateZeroError, RangeError, ResolutionError, ValidationError
from terracelab.nonlinearity import (
    InterpolantField,
    Nonlinearity,
    PolynomialField,
    check_assumptions,
    cubic,
    energy_condition,
    find_zeros,
    quintic,
)


def cubic_F(a, u):
    """Closed-form antiderivative of u(1-u)(u-a) vanishing at 0."""
    return -a * u**2 / 2 + (1 + a) * u**3 / 3 - u**4 / 4


class TestEvaluate:
    def test_cubic_at_zero(self):
        f = cubic(0.25)
        val, der = f.evaluate(0.0)
        assert val == pytest.approx(0.0, abs=1e-15)
        assert der == pytest.approx(-0.25, abs=1e-12)

    def test_cubic_at_one(self):
        f = cubic(0.25)
        val, der = f.evaluate(1.0)
        assert val == pytest.approx(0.0, abs=1e-12)
        assert der == pytest.approx(-0.75, abs=1e-12)

    def test_origin_is_zero(self):
        # f(0) = 0 is forced for any admissible reaction term
        for f in (cubic(0.3), quintic()):
            assert f(0.0) == pytest.approx(0.0, abs=1e-14)

    def test_vectorized(self):
        f = cubic(0.25)
        u = np.linspace(-0.3, 1.3, 7)
        vals, ders = f.evaluate(u)
        assert vals.shape == u.shape
        exact = u * (1 - u) * (u - 0.25)
        np.testing.assert_allclose(vals, exact, atol=1e-14)

    def test_out_of_range(self):
        f = cubic(0.25)  # search interval (-0.5, 1.5), evaluable on (-1.5, 2.5)
        f.evaluate(-1.4)
        f.evaluate(2.4)
        with pytest.raises(RangeError):
            f.evaluate(2.6)
        with pytest.raises(RangeError):
            f.evaluate(-1.6)


class TestFindZeros:
    def test_cubic_roots(self):
        f = cubic(0.25)
        locs = [z.location for z in f.zeros]
        kinds = [z.stability for z in f.zeros]
        np.testing.assert_allclose(locs, [0.0, 0.25, 1.0], atol=1e-10)
        assert kinds == ["stable", "unstable", "stable"]

    def test_quintic_roots(self):
        g = quintic(0.15, 0.5, 0.6)
        locs = [z.location for z in g.zeros]
        kinds = [z.stability for z in g.zeros]
        np.testing.assert_allclose(locs, [0.0, 0.15, 0.5, 0.6, 1.0], atol=1e-9)
        assert kinds == ["stable", "unstable", "stable", "unstable", "stable"]

    def test_pure_decay(self):
        f = Nonlinearity.from_poly([0.0, -1.0], (-1.0, 1.0))
        assert len(f.zeros) == 1
        assert f.zeros[0].location == pytest.approx(0.0, abs=1e-12)
        assert f.zeros[0].stability == "stable"

    def test_roots_match_companion_matrix(self):
        # the scan+bisect route must find exactly the real roots in the interval
        g = quintic(0.15, 0.5, 0.6)
        comp = np.polynomial.polynomial.polyroots(g.field.coeffs)
        comp = np.sort(comp.real[np.abs(comp.imag) < 1e-12])
        comp = comp[(comp > -0.5) & (comp < 1.5)]
        locs = np.array([z.location for z in g.zeros])
        np.testing.assert_allclose(locs, comp, atol=1e-9)

    def test_roots_match_brute_scan(self):
        f = cubic(0.3)
        # offset keeps exact roots strictly inside scan cells
        u = np.linspace(-0.5, 1.5, 1_000_001) + 1.3e-7
        v = f(u)
        brute = u[:-1][np.sign(v[:-1]) * np.sign(v[1:]) < 0]
        locs = np.array([z.location for z in f.zeros])
        assert len(brute) == len(locs)
        np.testing.assert_allclose(locs, brute, atol=3e-6)

    def test_degenerate_zero_rejected(self):
        # double root at 0.5: f = (u - 0.5)^2 (u - 2), transversal elsewhere
        coeffs = np.polynomial.polynomial.polyfromroots([0.5, 0.5, 2.0])
        with pytest.raises(DegenerateZeroError):
            find_zeros(PolynomialField(coeffs), (0.0, 1.0))

    def test_close_roots_resolution_error(self):
        # two roots straddling one scan node, closer than the scan step
        coeffs = np.polynomial.polynomial.polyfromroots([0.0, 0.50005, 0.50012, 1.0])
        with pytest.raises(ResolutionError):
            find_zeros(PolynomialField(coeffs), (-0.5, 1.5), scan_points=10_000)

    @given(st.lists(st.integers(min_value=0, max_value=40), min_size=2, max_size=6,
                    unique=True))
    @settings(max_examples=30, deadline=None)
    def test_classification_alternates(self, idx):
        # transversal polynomials: stability must alternate along the root list
        roots = sorted(0.05 * i for i in idx)
        coeffs = np.polynomial.polynomial.polyfromroots(roots)
        zeros = find_zeros(PolynomialField(coeffs), (min(roots) - 0.3, max(roots) + 0.3))
        kinds = [z.stability for z in zeros]
        assert len(kinds) == len(roots)
        for a, b in zip(kinds, kinds[1:]):
            assert a != b


class TestStructuralConstants:
    def test_cubic_constants(self):
        f = cubic(0.25)
        assert f.p == pytest.approx(1.0, abs=1e-10)
        assert f.b_star == pytest.approx(0.25, abs=1e-10)
        assert f.b_star_upper == pytest.approx(0.25, abs=1e-10)
        assert f.delta1 == pytest.approx(0.5, rel=0.05)
        assert math.isinf(f.delta2)

    def test_quintic_constants(self):
        g = quintic()
        assert g.p == pytest.approx(1.0, abs=1e-9)
        assert g.b_star == pytest.approx(0.15, abs=1e-9)
        assert g.b_star_upper == pytest.approx(0.6, abs=1e-9)
        assert math.isinf(g.delta2)

    def test_delta2_finite_when_f_positive_above_p(self):
        # quartic with roots 0, .25, 1, 1.3: stable zeros 0 and 1, unstable
        # zero at 1.3 above p, so the allowance above p is finite
        coeffs = np.polynomial.polynomial.polyfromroots([0.0, 0.25, 1.0, 1.3])
        f = Nonlinearity.from_poly(coeffs, (-0.5, 1.5))
        assert f.p == pytest.approx(1.0)
        assert f.delta2 == pytest.approx(0.99 * 0.3, rel=1e-6)


class TestCheckAssumptions:
    def test_cubic_passes(self):
        rep = check_assumptions(cubic(0.25))
        assert rep.all_pass
        assert rep.p == pytest.approx(1.0)
        assert rep.b_star == pytest.approx(0.25)
        # the binding competitor is F(0) = 0: interior max F(0.25) is negative
        assert rep.gamma_margin == pytest.approx(1 / 24, abs=1e-12)

    def test_quintic_passes(self):
        rep = check_assumptions(quintic())
        assert rep.all_pass
        assert rep.b_star == pytest.approx(0.15, abs=1e-9)
        assert rep.b_star_upper == pytest.approx(0.6, abs=1e-9)

    def test_cubic_a06_fails_f3(self):
        rep = check_assumptions(cubic(0.6))
        assert rep.f1 and rep.f2
        assert not rep.f3
        assert rep.gamma_margin == pytest.approx((1 - 2 * 0.6) / 12, abs=1e-12)

    def test_report_dict_roundtrip(self):
        d = check_assumptions(cubic(0.25)).as_dict()
        assert d["f3_target_exists_with_energy_bias"] is True
        assert d["delta2_infinite"] is True


class TestEnergyCondition:
    def test_cubic_quarter(self):
        f = cubic(0.25)
        holds, margin = energy_condition(f, 0.0, 1.0)
        assert holds
        # F(u) = -a u^2/2 + (1+a) u^3/3 - u^4/4; F(1) = 1/24 and the interior
        # critical value F(0.25) < 0, so the margin is F(1) - F(0) = 1/24
        assert cubic_F(0.25, 1.0) == pytest.approx(1 / 24, abs=1e-15)
        assert cubic_F(0.25, 0.25) < 0
        assert margin == pytest.approx(1 / 24, abs=1e-12)

    def test_cubic_half_boundary(self):
        holds, margin = energy_condition(cubic(0.5), 0.0, 1.0)
        assert not holds
        assert margin == pytest.approx(0.0, abs=1e-12)

    def test_empty_interval_rejected(self):
        with pytest.raises(ValidationError):
            energy_condition(cubic(0.25), 1.0, 1.0)

    def test_non_stable_endpoint_rejected(self):
        with pytest.raises(ValidationError):
            energy_condition(cubic(0.25), 0.25, 1.0)

    def test_agrees_with_riemann_brute_force(self):
        # independent oracle: cumulative trapezoid F on 1e5 points, with the
        # competitor set = left endpoint + interior local maxima of F (on the
        # piece rising into F(p) the strict inequality holds automatically)
        for f in (cubic(0.25), cubic(0.45), quintic()):
            holds, margin = energy_condition(f, 0.0, 1.0)
            u = np.linspace(0.0, 1.0, 100_001)
            fu = f(u)
            F = np.concatenate([[0.0], np.cumsum((fu[1:] + fu[:-1]) / 2 * np.diff(u))])
            interior_max = (F[1:-1] >= F[:-2]) & (F[1:-1] >= F[2:])
            competitors = np.concatenate([[F[0]], F[1:-1][interior_max]])
            brute_margin = F[-1] - np.max(competitors)
            assert margin == pytest.approx(brute_margin, abs=1e-8)
            assert holds == (brute_margin > 1e-8)

    def test_quintic_pairwise(self):
        g = quintic()
        assert energy_condition(g, 0.0, 0.5)[0]
        assert energy_condition(g, 0.5, 1.0)[0]
        assert energy_condition(g, 0.5, 1.0)[1] == pytest.approx(g.integral(0.5, 1.0), abs=1e-12)


class TestNodesKind:
    def make_nodes(self):
        u = np.linspace(-0.5, 1.5, 81)
        f = cubic(0.25)
        return np.column_stack([u, f(u)])

    def test_zeros_recovered(self):
        nl = Nonlinearity.from_nodes(self.make_nodes())
        locs = [z.location for z in nl.zeros]
        np.testing.assert_allclose(locs, [0.0, 0.25, 1.0], atol=1e-3)
        assert [z.stability for z in nl.zeros] == ["stable", "unstable", "stable"]

    def test_c1_derivative(self):
        nl = Nonlinearity.from_nodes(self.make_nodes())
        u = np.linspace(-0.2, 1.2, 101)
        _, der = nl.evaluate(u)
        exact = -0.25 + 2.5 * u - 3 * u**2
        assert np.max(np.abs(der - exact)) < 0.02

    def test_energy_condition_close_to_poly(self):
        nl = Nonlinearity.from_nodes(self.make_nodes())
        p = nl.p
        zero = nl.zeros[0].location
        holds, margin = energy_condition(nl, zero, p)
        assert holds
        assert margin == pytest.approx(1 / 24, abs=1e-4)

    def test_bad_nodes_rejected(self):
        with pytest.raises(ValidationError):
            InterpolantField([[0.0, 1.0], [0.0, 2.0], [1.0, 3.0]])
