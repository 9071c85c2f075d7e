import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orbitarena.frames import (CartesianState, EquinoctialElements, KeplerianElements, PolarThrust,
                               cartesian_to_equinoctial, cartesian_to_keplerian, convert_anomaly,
                               equinoctial_to_cartesian, equinoctial_to_keplerian, keplerian_to_cartesian,
                               keplerian_to_equinoctial, polar_to_rsw, rsw_basis, solve_kepler, wrap_angle)

MU = 3.986e14
KINDS = ("mean", "eccentric", "true")

angles = st.floats(0.0, 2 * math.pi, exclude_max=True)
ecc = st.floats(1e-6, 0.9)
inc = st.floats(1e-6, math.pi - 1e-3)


def rel_err(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b)


class TestKeplerianToCartesian:
    def test_circular_equatorial(self):
        c = keplerian_to_cartesian(KeplerianElements(7e6, 0.0, 0.0, 0.0, 0.0, 0.0), MU)
        np.testing.assert_allclose(c.position, [7e6, 0, 0], atol=1e-6)
        np.testing.assert_allclose(c.velocity, [0, math.sqrt(MU / 7e6), 0], atol=1e-9)
        assert c.velocity[1] == pytest.approx(7546.05, abs=0.01)

    def test_half_orbit(self):
        c = keplerian_to_cartesian(KeplerianElements(7e6, 0.0, 0.0, 0.0, 0.0, math.pi), MU)
        np.testing.assert_allclose(c.position, [-7e6, 0, 0], atol=1e-6)

    def test_hohmann_start_orbit_roundtrip(self):
        q = EquinoctialElements(8_378_000.0, 0.007, 0.006, 0.0, 0.0, 0.3)
        k = equinoctial_to_keplerian(q)
        assert k.e == pytest.approx(math.hypot(0.007, 0.006), rel=1e-12)
        c = keplerian_to_cartesian(k, MU)
        back = cartesian_to_keplerian(c, MU, "mean")
        assert back.a == pytest.approx(k.a, rel=1e-9)
        assert back.e == pytest.approx(k.e, rel=1e-9)

    def test_rejects_hyperbolic(self):
        with pytest.raises(ValueError):
            KeplerianElements(7e6, 1.2, 0.0, 0.0, 0.0, 0.0)

    @given(a=st.floats(6.6e6, 5e7), e=st.floats(0, 0.95), i=inc, w=angles, O=angles, nu=angles)
    def test_vis_viva(self, a, e, i, w, O, nu):
        c = keplerian_to_cartesian(KeplerianElements(a, e, i, w, O, nu, "true"), MU)
        r, v = np.linalg.norm(c.position), np.linalg.norm(c.velocity)
        assert v * v == pytest.approx(MU * (2 / r - 1 / a), rel=1e-9)


class TestCartesianToKeplerian:
    def test_inverse_of_circular(self):
        k = cartesian_to_keplerian(CartesianState([7e6, 0, 0], [0, math.sqrt(MU / 7e6), 0]), MU)
        assert k.a == pytest.approx(7e6, rel=1e-12)
        assert k.e < 1e-9
        assert k.i == 0.0

    def test_polar(self):
        k = cartesian_to_keplerian(CartesianState([7e6, 0, 0], [0, 0, math.sqrt(MU / 7e6)]), MU)
        assert k.i == pytest.approx(math.pi / 2, abs=1e-12)

    def test_rejects_unbound(self):
        with pytest.raises(ValueError):
            cartesian_to_keplerian(CartesianState([7e6, 0, 0], [0, 12000.0, 0]), MU)

    def test_rejects_radial(self):
        with pytest.raises(ValueError):
            cartesian_to_keplerian(CartesianState([7e6, 0, 0], [100.0, 0, 0]), MU)

    @given(a=st.floats(6.6e6, 5e7), e=ecc, i=inc, w=angles, O=angles, M=angles)
    def test_roundtrip_fixed_point(self, a, e, i, w, O, M):
        c = keplerian_to_cartesian(KeplerianElements(a, e, i, w, O, M, "mean"), MU)
        c2 = keplerian_to_cartesian(cartesian_to_keplerian(c, MU, "mean"), MU)
        assert rel_err(c2.position, c.position) < 1e-9
        assert rel_err(c2.velocity, c.velocity) < 1e-9


class TestEquinoctial:
    def test_circular_zero_eccentricity_vector(self):
        q = keplerian_to_equinoctial(KeplerianElements(7e6, 0.0, 0.5, 1.0, 2.0, 0.3))
        assert q.ex == 0.0 and q.ey == 0.0

    def test_equatorial_zero_inclination_vector(self):
        q = keplerian_to_equinoctial(KeplerianElements(7e6, 0.1, 0.0, 1.0, 2.0, 0.3))
        assert q.hx == 0.0 and q.hy == 0.0

    def test_hand_evaluation(self):
        q = keplerian_to_equinoctial(KeplerianElements(7e6, 0.1, 0.2, math.radians(30), math.radians(60), 0.0))
        assert q.ex == pytest.approx(0.0, abs=1e-15)
        assert q.ey == pytest.approx(0.1, abs=1e-15)
        assert q.hx == pytest.approx(math.tan(0.1) * math.cos(math.radians(60)), rel=1e-14)

    def test_mean_anomaly_converted_when_not_mean(self):
        k = KeplerianElements(7e6, 0.2, 0.1, 0.0, 0.0, 1.0, "true")
        q = keplerian_to_equinoctial(k)
        assert q.M == pytest.approx(convert_anomaly(1.0, "true", "mean", 0.2), abs=1e-14)

    def test_retrograde_singular_rejected(self):
        with pytest.raises(ValueError):
            keplerian_to_equinoctial(KeplerianElements(7e6, 0.1, math.pi, 0.0, 0.0, 0.0))

    def test_singular_inverse_convention(self):
        k = equinoctial_to_keplerian(EquinoctialElements(7e6, 0.0, 0.0, 0.0, 0.0, 1.0))
        assert (k.e, k.i, k.omega, k.Omega) == (0.0, 0.0, 0.0, 0.0)
        assert k.anomaly == pytest.approx(1.0)

    def test_ex_only(self):
        k = equinoctial_to_keplerian(EquinoctialElements(7e6, 0.1, 0.0, 0.0, 0.0, 0.0))
        assert k.e == pytest.approx(0.1, abs=1e-15)
        assert wrap_angle(k.omega + k.Omega) == pytest.approx(0.0, abs=1e-15)

    def test_invalid_eccentricity_vector(self):
        with pytest.raises(ValueError):
            EquinoctialElements(7e6, 0.8, 0.8, 0.0, 0.0, 0.0)

    @given(e=ecc, i=inc, w=angles, O=angles, M=angles)
    def test_keplerian_roundtrip(self, e, i, w, O, M):
        k = KeplerianElements(9e6, e, i, w, O, M)
        q = keplerian_to_equinoctial(k)
        assert q.ex ** 2 + q.ey ** 2 == pytest.approx(e * e, rel=1e-12, abs=1e-24)
        q2 = keplerian_to_equinoctial(equinoctial_to_keplerian(q))
        np.testing.assert_allclose(q2.as_array()[:5], q.as_array()[:5], rtol=1e-10, atol=1e-10)
        d = wrap_angle(q2.M - q.M)
        assert min(d, 2 * math.pi - d) < 1e-10

    @given(a=st.floats(6.6e6, 5e7), e=ecc, i=inc, w=angles, O=angles, M=angles)
    def test_cartesian_roundtrip(self, a, e, i, w, O, M):
        c = keplerian_to_cartesian(KeplerianElements(a, e, i, w, O, M), MU)
        c2 = equinoctial_to_cartesian(cartesian_to_equinoctial(c, MU), MU)
        assert rel_err(c2.position, c.position) < 1e-9
        assert rel_err(c2.velocity, c.velocity) < 1e-9


class TestAnomaly:
    @pytest.mark.parametrize("src", KINDS)
    @pytest.mark.parametrize("dst", KINDS)
    def test_circular_identity(self, src, dst):
        assert convert_anomaly(1.234, src, dst, 0.0) == pytest.approx(1.234, abs=1e-15)

    def test_apoapsis_symmetry(self):
        assert convert_anomaly(math.pi, "mean", "eccentric", 0.3) == pytest.approx(math.pi, abs=1e-14)
        assert convert_anomaly(math.pi, "mean", "true", 0.3) == pytest.approx(math.pi, abs=1e-14)

    def test_kepler_residual(self):
        E = convert_anomaly(1.0, "mean", "eccentric", 0.1)
        assert abs(E - 0.1 * math.sin(E) - 1.0) < 1e-12

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            convert_anomaly(1.0, "mean", "hyperbolic", 0.1)

    def test_vectorized_solver(self, rng):
        M = rng.uniform(0, 2 * math.pi, 1000)
        e = rng.uniform(0, 0.99, 1000)
        E = solve_kepler(M, e)
        assert np.max(np.abs(E - e * np.sin(E) - M)) < 1e-12

    @given(x=angles, e=st.floats(0, 0.95), src=st.sampled_from(KINDS), dst=st.sampled_from(KINDS))
    def test_inverse(self, x, e, src, dst):
        back = convert_anomaly(convert_anomaly(x, src, dst, e), dst, src, e)
        d = abs(back - x)
        assert min(d, 2 * math.pi - d) < 1e-12


class TestRsw:
    def test_axis_aligned(self):
        b = rsw_basis(CartesianState([7e6, 0, 0], [0, 7500.0, 0]))
        np.testing.assert_allclose(b.r_hat, [1, 0, 0])
        np.testing.assert_allclose(b.w_hat, [0, 0, 1])
        np.testing.assert_allclose(b.s_hat, [0, 1, 0])

    def test_polar_velocity(self):
        b = rsw_basis(CartesianState([7e6, 0, 0], [0, 0, 7500.0]))
        np.testing.assert_allclose(b.w_hat, [0, -1, 0])

    def test_degenerate(self):
        with pytest.raises(ValueError):
            rsw_basis(CartesianState([7e6, 0, 0], [10.0, 0, 0]))

    @given(st.lists(st.floats(-1, 1), min_size=6, max_size=6))
    def test_orthonormal(self, x):
        r = np.array(x[:3]) * 1e7 + np.array([7e6, 0, 0])
        v = np.array(x[3:]) * 7e3 + np.array([0, 100.0, 50.0])
        if np.linalg.norm(np.cross(r, v)) < 1e-3 * np.linalg.norm(r) * np.linalg.norm(v):
            return
        b = rsw_basis(CartesianState(r, v))
        m = np.vstack([b.r_hat, b.s_hat, b.w_hat])
        np.testing.assert_allclose(m @ m.T, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(np.cross(b.w_hat, b.r_hat), b.s_hat, atol=1e-12)


class TestPolarThrust:
    basis = rsw_basis(CartesianState([7e6, 1e5, 3e5], [-50.0, 7500.0, 800.0]))

    def test_along_track(self):
        np.testing.assert_allclose(polar_to_rsw(PolarThrust(3.0, 0.0, 1.0), self.basis), 3.0 * self.basis.s_hat,
                                   atol=1e-15)

    def test_radial(self):
        np.testing.assert_allclose(polar_to_rsw(PolarThrust(3.0, math.pi / 2, 0.0), self.basis),
                                   3.0 * self.basis.r_hat, atol=1e-15)

    def test_hand_evaluation(self):
        out = polar_to_rsw(PolarThrust(10.0, math.pi / 4, math.pi / 2), self.basis)
        expect = 10 * (math.cos(math.pi / 4) * self.basis.s_hat + math.sin(math.pi / 4) * self.basis.w_hat)
        np.testing.assert_allclose(out, expect, atol=1e-14)
        assert np.linalg.norm(out) == pytest.approx(10.0, abs=1e-12)

    def test_invalid(self):
        with pytest.raises(ValueError):
            PolarThrust(-1.0)
        with pytest.raises(ValueError):
            PolarThrust(1.0, 7.0)

    @given(T=st.floats(0, 1e3), th=st.floats(0, math.pi), ph=angles)
    def test_norm_preserved(self, T, th, ph):
        assert np.linalg.norm(polar_to_rsw(PolarThrust(T, th, ph), self.basis)) == pytest.approx(T, abs=1e-12 * max(T, 1))


def test_cartesian_state_invariants():
    with pytest.raises(ValueError):
        CartesianState([0, 0, 0], [1, 0, 0])
    with pytest.raises(ValueError):
        CartesianState([np.nan, 1, 0], [1, 0, 0])


def test_angles_normalized():
    k = KeplerianElements(7e6, 0.1, 0.1, -0.5, 7.0, 13.0)
    for x in (k.omega, k.Omega, k.anomaly):
        assert 0.0 <= x < 2 * math.pi
