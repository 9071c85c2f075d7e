import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orbitarena.arena import Arena
from orbitarena.errors import ScenarioError
from orbitarena.frames import EquinoctialElements
from orbitarena.missions import (CollisionAvoidance, build_observation, cam_reward, chase_reward,
                                 geo_anomaly_penalty, geo_reward, herrera_reward, hohmann_progress,
                                 hohmann_reward, kolosa_reward, orbit_deviation, wrapped_anomaly_difference)
from orbitarena.presets import PRESETS, preset_document

TWO_PI = 2 * math.pi
angles = st.floats(0, TWO_PI, exclude_max=True)


def brute_penalty(m):
    n = len(m)
    ideal = TWO_PI / n
    total, pairs = 0.0, 0
    for i in range(n):
        for j in range(i + 1, n):
            d = abs(m[i] - m[j])
            d = min(d, TWO_PI - d)
            total += max(0.0, (ideal - d) / ideal)
            pairs += 1
    return total / pairs


class TestKolosa:
    target = EquinoctialElements(12_678e3, 0.1, 0.2, 0.03, 0.04, 0.0)

    def test_at_target(self):
        assert kolosa_reward(self.target, self.target) == 0.0

    def test_a_offset(self):
        cur = EquinoctialElements(11_878e3, 0.1, 0.2, 0.03, 0.04, 0.0)
        assert kolosa_reward(cur, self.target) == pytest.approx(-800 / 12678, rel=1e-12)
        assert kolosa_reward(cur, self.target, (2, 1, 1, 10, 10)) == pytest.approx(-1600 / 12678, rel=1e-12)

    @given(st.lists(st.floats(-0.1, 0.1), min_size=5, max_size=5))
    def test_non_positive(self, d):
        cur = np.array([12_678e3, 0.1, 0.2, 0.03, 0.04]) + np.array(d) * [1e6, 1, 1, 1, 1]
        assert kolosa_reward(cur, self.target) <= 0.0


class TestHerrera:
    def test_values(self):
        assert herrera_reward(2.0, 10.0, 5) == 0.0
        assert herrera_reward(0.5, 0.0, 5) == 0.0
        assert herrera_reward(0.5, 1.0, 800) == 1.5
        assert herrera_reward(0.5, 1.0, 400) == 1.0

    @given(st.floats(0, 3), st.floats(0, 10), st.integers(0, 800))
    def test_range(self, err, fuel, t):
        r = herrera_reward(err, fuel, t)
        assert r == 0.0 or 0.5 <= r <= 1.5


class TestHohmann:
    el = np.array([8.4e6, 0.007, 0.006, 0.041, 0.015])
    w = [1e3, 1.0, 1.0, 10.0, 10.0, 1e-3]

    def test_no_change(self):
        d = np.array([3e4, 1e-3, 1e-3, 0, 0])
        assert hohmann_progress(d, d, self.el, self.w) == 0.0

    def test_a_halved(self):
        prev = np.array([3e4, 0, 0, 0, 0])
        cur = prev / 2
        assert hohmann_progress(prev, cur, self.el, self.w) == pytest.approx(1e3 * 1.5e4 / 8.4e6, rel=1e-12)
        assert hohmann_progress(cur, prev, self.el, self.w) == pytest.approx(-1e3 * 1.5e4 / 8.4e6, rel=1e-12)

    def test_reward(self):
        limits = (500.0, math.pi)
        assert hohmann_reward(0.1, (500, 0, 0, 0.3), limits) == 0.0
        assert hohmann_reward(0.1, (500, 0, 0, 1.0), limits) == pytest.approx(0.1)
        r = hohmann_reward(0.1, (250, math.pi / 2, 0, 1.0), limits, alpha1=1.0, alpha2=0.5)
        assert r == pytest.approx(-0.2)


class TestChase:
    def test_identical(self):
        e = EquinoctialElements(1.6e7, 0.1, 0.02, 0.03, 0.04, 1.0)
        assert chase_reward(e, e) == 0.0

    def test_wrap(self):
        assert abs(wrapped_anomaly_difference(0.1, 6.2)) == pytest.approx(TWO_PI - 6.1, abs=1e-12)
        assert abs(wrapped_anomaly_difference(0.1, 6.2)) == pytest.approx(0.1832, abs=1e-4)
        lead = np.array([1.6e7, 0, 0, 0, 0, 0.1])
        fol = np.array([1.6e7, 0, 0, 0, 0, 6.2])
        assert chase_reward(fol, lead, (1, 1, 1, 1, 1, 1)) == pytest.approx(-(TWO_PI - 6.1), abs=1e-12)

    @given(angles, angles, st.integers(-3, 3))
    def test_periodic(self, ml, mf, k):
        lead = np.array([1.6e7, 0.1, 0, 0, 0, ml])
        fol = np.array([1.5e7, 0.2, 0, 0, 0, mf])
        shifted = fol.copy()
        shifted[5] += k * TWO_PI
        assert chase_reward(shifted, lead) == pytest.approx(chase_reward(fol, lead), abs=1e-12)
        assert chase_reward(fol, lead) <= 0.0
        assert abs(wrapped_anomaly_difference(ml, mf)) <= math.pi + 1e-12

    def test_symmetric_elements(self):
        a = np.array([1.6e7, 0.1, 0.2, 0.03, 0.04, 0.0])
        b = np.array([1.6e7, 0.2, 0.1, 0.04, 0.03, 0.0])
        assert chase_reward(a, b) == pytest.approx(chase_reward(b, a))


class TestCam:
    def test_values(self):
        assert cam_reward(1e-9, 1e-9, 5.0, 0.2) == 0.0
        assert cam_reward(1e-9, 1e-9, 5.0, 0.9, alpha1=1.0) == -1.0
        assert cam_reward(1e-5, 1e-5, 0.2, 0.0, alpha2=0.1) == pytest.approx(-0.3)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 10), st.floats(0, 1))
    def test_non_positive(self, p0, p1, ds, d):
        assert cam_reward(p0, p1, ds, d) <= 0.0

    def test_orbit_deviation(self):
        nom = np.array([8.4e6, 0.01, 0.0, 0.0, 0.0])
        cur = np.array([8.4e6 + 84, 0.02, 0.0, 0.0, 0.0])
        w = [10.0, 1e-2, 1e-2, 1e-1, 1e-1]
        assert orbit_deviation(cur, nom, w) == pytest.approx(10 * 1e-5 + 1e-2 * 0.01)


class TestGeo:
    def test_even_and_identical(self):
        assert geo_anomaly_penalty([0, math.pi / 2, math.pi, 3 * math.pi / 2]) == pytest.approx(0.0, abs=1e-15)
        assert geo_anomaly_penalty([1.0] * 4) == 1.0

    def test_brute_force(self, rng):
        for _ in range(1000):
            n = int(rng.integers(2, 9))
            m = rng.uniform(0, TWO_PI, n)
            assert geo_anomaly_penalty(m) == pytest.approx(brute_penalty(m), abs=1e-14)

    def test_too_few(self):
        with pytest.raises(ValueError):
            geo_anomaly_penalty([1.0])

    @given(st.lists(angles, min_size=2, max_size=8), st.floats(-10, 10), st.randoms())
    def test_invariances(self, m, shift, rnd):
        p = geo_anomaly_penalty(m)
        assert 0.0 <= p <= 1.0
        perm = list(m)
        rnd.shuffle(perm)
        assert geo_anomaly_penalty(perm) == pytest.approx(p, abs=1e-12)
        assert geo_anomaly_penalty(np.array(m) + shift) == pytest.approx(p, abs=1e-9)

    def test_reward(self):
        assert geo_reward(0.0, 0.0, 0.0) == 0.0
        assert geo_reward(0.0, 5.0, 0.0) == pytest.approx(-50.0)
        assert geo_reward(1e6, 0.0, 0.5) == pytest.approx(-(1e-2 + 5e-3))
        assert geo_reward(-1e6, 0.0, 0.0) == geo_reward(1e6, 0.0, 0.0)


class TestPresets:
    @pytest.mark.parametrize("name, step_s, steps", [
        ("kolosa_transfer", 500.0, 692), ("herrera_sk", 1.0, 800), ("hohmann", 5.0, 1000),
        ("chase", 500.0, 2000), ("cam", 900.0, 202), ("geo_constellation", 360.0, 500)])
    def test_episode_parameters(self, name, step_s, steps):
        doc = preset_document(name)
        assert doc["stepping"]["step_s"] == step_s
        assert doc["stepping"]["episode_steps"] == steps

    def test_cam_burn_window(self):
        assert preset_document("cam")["stepping"]["burn_window_s"] == 10.0

    def test_geo_has_four_agents(self):
        arena = Arena.from_document(preset_document("geo_constellation"))
        assert len(arena.possible_agents) == 4

    @pytest.mark.parametrize("name, key, value", [
        ("kolosa_transfer", "alphas", [1.0, 1.0, 1.0, 10.0, 10.0]),
        ("hohmann", "w", [1e3, 1.0, 1.0, 10.0, 10.0, 1e-3]),
        ("cam", "w", [10.0, 1e-2, 1e-2, 1e-1, 1e-1]),
        ("cam", "alpha1", 1.0), ("cam", "alpha2", 0.1),
        ("geo_constellation", "alphas", [1e-8, 10.0, 1e-2]),
        ("chase", "alphas", [1.0, 1e-3, 1e-3, 1e-2, 1e-2, 1e-6])])
    def test_weights(self, name, key, value):
        arena = Arena.from_document(preset_document(name))
        assert arena.mission.params[key] == value

    def test_hohmann_tolerances(self):
        arena = Arena.from_document(preset_document("hohmann"))
        assert arena.mission.params["tolerances"] == [100.0, 0.005, 0.005, 0.001, 0.001]

    def test_herrera_nominal_speed(self):
        arena = Arena.from_document(preset_document("herrera_sk"))
        assert arena.mission.v_nominal(arena.forces.mu) == pytest.approx(7585, abs=1.0)

    def test_unknown_param(self):
        doc = preset_document("hohmann")
        doc["mission"]["params"]["bogus"] = 1
        with pytest.raises(ScenarioError):
            Arena.from_document(doc)


@pytest.fixture(scope="module")
def reset_arenas():
    out = {}
    for name in PRESETS:
        arena = Arena.from_document(preset_document(name))
        out[name] = (arena, arena.reset(0))
    return out


class TestObservations:
    @pytest.mark.parametrize("name, arity", [("kolosa_transfer", 7), ("herrera_sk", 8), ("hohmann", 7),
                                             ("chase", 8), ("cam", 14), ("geo_constellation", 8)])
    def test_arity(self, reset_arenas, name, arity):
        arena, obs = reset_arenas[name]
        for a in arena.possible_agents:
            assert obs[a].shape == (arity,)
            assert arena.observation_arity(a) == arity
            np.testing.assert_array_equal(build_observation(name, arena, a), obs[a])

    def test_herrera_normalised(self, reset_arenas):
        arena, obs = reset_arenas["herrera_sk"]
        np.testing.assert_allclose(obs["satellite"][:2], [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(obs["satellite"][2:4], [0.0, 1.0], atol=1e-3)

    def test_errors(self, reset_arenas):
        arena, _ = reset_arenas["hohmann"]
        with pytest.raises(ValueError):
            build_observation("nope", arena, "satellite")
        with pytest.raises(ValueError):
            build_observation("cam", arena, "satellite")
        with pytest.raises(KeyError):
            build_observation("hohmann", arena, "ghost")


def test_cam_discrete_table():
    arena = Arena.from_document(preset_document("cam"))
    assert CollisionAvoidance.DISCRETE_ACTIONS.shape == (7, 4)
    noop = arena.mission.discrete_action("satellite", 6)
    assert noop[3] <= 0.5
    for k in range(6):
        a = arena.mission.discrete_action("satellite", k)
        assert a[0] == 5.0 and a[3] > 0.5
    dirs = set()
    for k in range(6):
        _, th, ph, _ = CollisionAvoidance.DISCRETE_ACTIONS[k]
        v = np.round([math.cos(th), math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph)], 12)
        dirs.add(tuple(v + 0.0))
    assert len(dirs) == 6
