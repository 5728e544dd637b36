"""Phase-plane shooting and front reconstruction.

The bistable cubic u(1-u)(u-a) has the closed-form front
U(z) = 1/(1 + exp(z/sqrt(2))) with speed (1-2a)/sqrt(2), which anchors the
speed and profile assertions. The c = 0 shot has a Hamiltonian first
integral, P(q_bot) = -sqrt(2 * int_0^1 f), giving an independent oracle for
the overshoot landing value.
"""

import math

import numpy as np
import pytest

from terracelab.errors import RangeError, ValidationError
from terracelab.front import WaveProfile, c_max_for, find_front, profile_residual, shoot
from terracelab.nonlinearity import cubic, quintic

SQRT2 = math.sqrt(2.0)


def huxley(z):
    return 1.0 / (1.0 + np.exp(np.asarray(z) / SQRT2))


@pytest.fixture(scope="module")
def cubic_front():
    return find_front(cubic(0.25), 1.0, 0.0)


class TestShoot:
    def test_hamiltonian_overshoot_at_c0(self):
        # first integral at c=0: P(0)^2/2 = int_0^1 f = 1/24
        res = shoot(cubic(0.25), 1.0, 0.0, 0.0)
        assert res.outcome == "reached_bottom"
        assert res.P_end == pytest.approx(-math.sqrt(1.0 / 12.0), abs=1e-6)

    def test_large_c_touches_in_negative_well(self):
        # heavy damping stalls the orbit where f <= 0, i.e. v* in (0, a]
        res = shoot(cubic(0.25), 1.0, 0.0, 2.0)
        assert res.outcome == "touched_zero"
        assert 0.0 < res.v_star <= 0.26  # touch threshold stops just above

    def test_near_critical_landing(self):
        res = shoot(cubic(0.25), 1.0, 0.0, 0.5 / SQRT2)
        # at the exact speed the orbit lands with |P| tiny on either route
        if res.outcome == "reached_bottom":
            assert abs(res.P_end) <= 1e-4
        else:
            assert res.v_star <= 1e-3

    def test_interior_P_strictly_negative(self):
        res = shoot(cubic(0.25), 1.0, 0.0, 0.1)
        assert res.outcome == "reached_bottom"
        assert np.all(res.P_values < 0)

    def test_speed_out_of_range(self):
        f = cubic(0.25)
        with pytest.raises(RangeError):
            shoot(f, 1.0, 0.0, -0.1)
        with pytest.raises(RangeError):
            shoot(f, 1.0, 0.0, c_max_for(f) + 1.0)

    def test_endpoints_must_be_stable(self):
        with pytest.raises(ValidationError):
            shoot(cubic(0.25), 0.25, 0.0, 0.1)


class TestFindFront:
    def test_huxley_speed(self, cubic_front):
        assert cubic_front.c == pytest.approx(0.5 / SQRT2, abs=1e-3)

    def test_huxley_profile_sup_error(self, cubic_front):
        z = np.linspace(-40.0, 40.0, 8001)
        err = np.max(np.abs(cubic_front.evaluate(z) - huxley(z)))
        assert err <= 1e-3

    def test_normalization(self, cubic_front):
        assert 0.0 in cubic_front.z_samples
        assert cubic_front.evaluate(0.0) == pytest.approx(0.5, abs=1e-10)

    def test_profile_invariants(self, cubic_front):
        u = cubic_front.u_samples
        assert np.all(np.diff(u) < 0)
        assert abs(u[0] - 1.0) <= 1e-6 + 1e-12
        assert abs(u[-1] - 0.0) <= 1e-6 + 1e-12
        assert cubic_front.residual <= 1e-2

    def test_speed_positive(self, cubic_front):
        assert cubic_front.c > 0

    def test_no_energy_bias_returns_none(self):
        assert find_front(cubic(0.5), 1.0, 0.0) is None

    def test_launch_offset_invariance(self):
        f = cubic(0.25)
        w1 = find_front(f, 1.0, 0.0, delta_launch_frac=1e-4)
        w2 = find_front(f, 1.0, 0.0, delta_launch_frac=5e-5)
        assert abs(w1.c - w2.c) <= 1e-6

    def test_bisection_trace_monotone(self, cubic_front):
        # every overshoot speed must sit below every touched speed
        reached = [c for c, out, _ in cubic_front.bisection_trace if out == "reached_bottom"]
        touched = [c for c, out, _ in cubic_front.bisection_trace if out == "touched_zero"]
        assert max(reached) < min(touched)

    def test_quintic_direct_front_and_ordering(self):
        # all three connections exist on the shipped quintic; the partial
        # speeds must straddle the direct one
        g = quintic()
        w = find_front(g, 1.0, 0.0)
        w1 = find_front(g, 1.0, 0.5)
        w2 = find_front(g, 0.5, 0.0)
        assert w is not None and w1 is not None and w2 is not None
        assert w2.c < w.c < w1.c

    def test_two_wave_family_has_no_direct_front(self):
        g = quintic(0.05, 0.5, 0.70)
        assert find_front(g, 1.0, 0.0) is None
        w1 = find_front(g, 1.0, 0.5)
        w2 = find_front(g, 0.5, 0.0)
        assert w1.c < w2.c


class TestProfileResidual:
    def make_profile(self, h):
        z = np.arange(-20.0, 20.0 + h / 2, h)
        return WaveProfile(c=0.5 / SQRT2, q_top=1.0, q_bot=0.0,
                           z_samples=z, u_samples=huxley(z))

    def test_exact_front_residual_small(self):
        w = self.make_profile(0.01)
        assert profile_residual(w, cubic(0.25)) <= 1e-4

    def test_second_order_convergence(self):
        f = cubic(0.25)
        r1 = profile_residual(self.make_profile(0.04), f)
        r2 = profile_residual(self.make_profile(0.02), f)
        assert r1 / r2 >= 3.0

    def test_constant_profile_at_zero(self):
        z = np.linspace(-1, 1, 11)
        w = WaveProfile(c=0.3, q_top=1.0, q_bot=0.0,
                        z_samples=z, u_samples=np.full(11, 0.25))
        assert profile_residual(w, cubic(0.25)) == pytest.approx(0.0, abs=1e-12)

    def test_corrupted_sample_detected(self):
        h = 0.01
        w = self.make_profile(h)
        u = w.u_samples.copy()
        u[len(u) // 2] += 0.1
        bad = WaveProfile(c=w.c, q_top=1.0, q_bot=0.0, z_samples=w.z_samples, u_samples=u)
        assert profile_residual(bad, cubic(0.25)) >= 0.1 / h**2

    def test_too_few_samples(self):
        z = np.linspace(-1, 1, 4)
        w = WaveProfile(c=0.3, q_top=1.0, q_bot=0.0, z_samples=z, u_samples=huxley(z))
        with pytest.raises(ValidationError):
            profile_residual(w, cubic(0.25))


class TestWaveProfileHelpers:
    def test_z_of_value_inverts_profile(self, cubic_front):
        for val in (0.2, 0.5, 0.8):
            z = cubic_front.z_of_value(val)
            assert cubic_front.evaluate(z) == pytest.approx(val, abs=1e-9)

    def test_z_of_value_out_of_range(self, cubic_front):
        with pytest.raises(ValidationError):
            cubic_front.z_of_value(1.2)

    def test_slope_matches_exact(self, cubic_front):
        # Huxley slope at the midpoint: U' = -U(1-U)/sqrt(2) = -1/(4 sqrt(2))
        s = cubic_front.slope_at_value(0.5)
        assert s == pytest.approx(-0.25 / SQRT2, rel=2e-3)
