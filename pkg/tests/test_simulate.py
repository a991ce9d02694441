"""Tests for endpoint-conditioned track sampling and observation."""

import numpy as np
import pytest

from endpointer.intent import Scenario, UniformArrival
from endpointer.models import Destination, ModelParams
from endpointer.simulate import (
    ObservationSet,
    Track,
    observe,
    psd_draw,
    sample_bridged_track,
    sample_scenario_track,
    simulate_batch,
    track_rng,
)


def bm_line(sigma=1.0, end=4.0, end_cov=0.0):
    """1-D Brownian scenario from an exact start to a (possibly exact) end."""
    p = ModelParams.bm(sigma, dims=1)
    dests = [Destination([end], [[end_cov]], prior=1.0, name="end")]
    return Scenario(p, dests, UniformArrival(3.0, 9.0), [[0.01]], [0.0],
                    [[0.0]], name="bm-line")


def cv_pair():
    p = ModelParams.cv(0.6)
    dests = [
        Destination([8.0, 0.0, 0.0, 0.0],
                    np.diag([0.2, 0.2, 0.05, 0.05]), prior=0.9, name="a"),
        Destination([-8.0, 0.0, 0.0, 0.0],
                    np.diag([0.2, 0.2, 0.05, 0.05]), prior=0.1, name="b"),
    ]
    return Scenario(p, dests, UniformArrival(6.0, 12.0), 0.2 * np.eye(2),
                    np.zeros(4), np.diag([1.0, 1.0, 0.2, 0.2]), name="cv-pair")


class TestPsdDraw:
    def test_zero_covariance_returns_mean(self):
        rng = np.random.default_rng(0)
        out = psd_draw(rng, [1.5, -2.0], np.zeros((2, 2)))
        np.testing.assert_array_equal(out, [1.5, -2.0])

    def test_singular_covariance_stays_on_support(self):
        """Rank-1 covariance: every draw lies on the mean + span(v) line."""
        rng = np.random.default_rng(1)
        v = np.array([1.0, 2.0])
        cov = np.outer(v, v)
        for _ in range(20):
            x = psd_draw(rng, [0.0, 0.0], cov)
            # component orthogonal to v must vanish
            assert abs(x[0] * v[1] - x[1] * v[0]) < 1e-12

    def test_matches_requested_moments(self):
        rng = np.random.default_rng(2)
        cov = np.array([[2.0, 0.6], [0.6, 1.0]])
        draws = np.stack([psd_draw(rng, [3.0, -1.0], cov)
                          for _ in range(8000)])
        np.testing.assert_allclose(draws.mean(axis=0), [3.0, -1.0], atol=0.06)
        np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.12)


class TestBridgedTrack:
    def test_lands_exactly_on_point_destination(self):
        sc = bm_line(end=4.0, end_cov=0.0)
        track = sample_bridged_track(sc, 0, T=5.0, dt=1.0,
                                     rng=np.random.default_rng(3))
        assert track.times[-1] == 5.0
        assert track.states[-1, 0] == 4.0
        assert track.dest_index == 0 and track.T == 5.0

    def test_grid_layout(self):
        """Interior points on the dt grid; a grid point at T is dropped so
        the appended exact endpoint is not duplicated."""
        sc = bm_line()
        track = sample_bridged_track(sc, 0, T=5.0, dt=1.0,
                                     rng=np.random.default_rng(4))
        np.testing.assert_array_equal(track.times, [0, 1, 2, 3, 4, 5])
        track = sample_bridged_track(sc, 0, T=5.3, dt=1.0,
                                     rng=np.random.default_rng(4))
        np.testing.assert_allclose(track.times, [0, 1, 2, 3, 4, 5, 5.3])
        assert track.n_points == 7

    def test_diffuse_endpoint_is_a_destination_draw(self):
        sc = bm_line(end=4.0, end_cov=0.25)
        ends = [sample_bridged_track(sc, 0, T=4.0, dt=0.5,
                                     rng=np.random.default_rng(j)).states[-1, 0]
                for j in range(2000)]
        ends = np.asarray(ends)
        assert abs(ends.mean() - 4.0) < 3.0 * 0.5 / np.sqrt(2000)
        assert abs(ends.var() - 0.25) < 3.0 * 0.25 * np.sqrt(2.0 / 1999)

    def test_monte_carlo_matches_analytic_bridge(self):
        """Pinned Brownian bridge from 0 to b: the sampled paths must
        reproduce mean a + (b-a) t/T and variance sigma^2 t(T-t)/T."""
        b, T, sigma = 4.0, 4.0, 1.0
        sc = bm_line(sigma=sigma, end=b, end_cov=0.0)
        rng = np.random.default_rng(5)
        n = 4000
        mids = np.empty(n)
        quarters = np.empty(n)
        for j in range(n):
            track = sample_bridged_track(sc, 0, T=T, dt=1.0, rng=rng)
            quarters[j] = track.states[1, 0]   # t = 1
            mids[j] = track.states[2, 0]       # t = 2
        var_mid = sigma ** 2 * 2.0 * (T - 2.0) / T
        se_mean = np.sqrt(var_mid / n)
        assert abs(mids.mean() - b * 2.0 / T) < 3.0 * se_mean
        assert abs(mids.var() - var_mid) < 3.0 * var_mid * np.sqrt(2.0 / n)
        # covariance between t=1 and t=3 states: sigma^2 s (T - t) / T
        lates = np.empty(n)
        rng2 = np.random.default_rng(6)
        for j in range(n):
            track = sample_bridged_track(sc, 0, T=T, dt=1.0, rng=rng2)
            quarters[j] = track.states[1, 0]
            lates[j] = track.states[3, 0]
        cov_q = np.cov(quarters, lates)[0, 1]
        assert abs(cov_q - 1.0 * (T - 3.0) / T) < 0.05

    def test_rejects_bad_arguments(self):
        sc = bm_line()
        with pytest.raises(ValueError):
            sample_bridged_track(sc, 0, T=5.0, dt=0.0,
                                 rng=np.random.default_rng(0))
        with pytest.raises(ValueError):
            sample_bridged_track(sc, 0, T=0.0, dt=1.0,
                                 rng=np.random.default_rng(0))


class TestObserve:
    def fake_track(self, n=4000, dims=4):
        times = np.arange(n, dtype=float)
        return Track(times, np.zeros((n, dims)), 0, float(n))

    def test_rate_one_keeps_every_point_zero_noise_is_exact(self):
        sc = cv_pair()
        track = sample_bridged_track(sc, 0, T=8.0, dt=1.0,
                                     rng=np.random.default_rng(7))
        obs = observe(track, np.zeros((2, 2)), np.random.default_rng(8))
        np.testing.assert_array_equal(obs.times, track.times)
        np.testing.assert_array_equal(obs.ys, track.states[:, :2])

    def test_full_state_observation_when_dimensions_match(self):
        track = self.fake_track(n=5, dims=2)
        obs = observe(track, np.zeros((2, 2)), np.random.default_rng(9))
        assert obs.ys.shape == (5, 2)

    def test_noise_matches_requested_covariance(self):
        track = self.fake_track()
        noise = np.diag([0.25, 1.0])
        obs = observe(track, noise, np.random.default_rng(10))
        var = obs.ys.var(axis=0)
        bound = 3.0 * np.sqrt(2.0 / 3999)
        assert abs(var[0] - 0.25) < bound * 0.25
        assert abs(var[1] - 1.0) < bound * 1.0

    def test_thinning_keeps_first_point(self):
        track = self.fake_track(n=500)
        obs = observe(track, np.eye(2), np.random.default_rng(11), rate=0.3)
        assert obs.times[0] == 0.0
        assert 0.2 < len(obs.times) / 500 < 0.4
        assert np.all(np.diff(obs.times) > 0)

    def test_rejects_bad_rate(self):
        track = self.fake_track(n=10)
        for rate in (0.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                observe(track, np.eye(2), np.random.default_rng(0), rate=rate)


class TestScenarioSampling:
    def test_destination_frequencies_follow_priors(self):
        sc = cv_pair()   # priors 0.9 / 0.1
        rng = np.random.default_rng(12)
        picks = [sample_scenario_track(sc, rng, dt=2.0).dest_index
                 for _ in range(400)]
        count_a = picks.count(0)
        assert abs(count_a - 360) < 3.0 * np.sqrt(400 * 0.9 * 0.1) + 1

    def test_arrival_times_stay_in_support(self):
        sc = cv_pair()
        rng = np.random.default_rng(13)
        for _ in range(50):
            track = sample_scenario_track(sc, rng, dt=2.0)
            assert 6.0 <= track.T <= 12.0

    def test_track_rng_streams_are_stable(self):
        a = track_rng(42, 3).standard_normal(4)
        b = track_rng(42, 3).standard_normal(4)
        c = track_rng(42, 4).standard_normal(4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)


class TestSimulateBatch:
    def test_reproducible_and_prefix_stable(self):
        """Same seed gives identical tracks, and track j does not depend on
        how many tracks come after it."""
        sc = cv_pair()
        big = simulate_batch(sc, 6, seed=99, dt=1.0, rate=0.8)
        small = simulate_batch(sc, 3, seed=99, dt=1.0, rate=0.8)
        again = simulate_batch(sc, 6, seed=99, dt=1.0, rate=0.8)
        for j in range(3):
            np.testing.assert_array_equal(big[j][0].states,
                                          small[j][0].states)
            np.testing.assert_array_equal(big[j][1].ys, small[j][1].ys)
        for j in range(6):
            np.testing.assert_array_equal(big[j][0].states,
                                          again[j][0].states)

    def test_batch_contents(self):
        sc = cv_pair()
        batch = simulate_batch(sc, 4, seed=5, dt=1.0)
        assert len(batch) == 4
        for track, obs in batch:
            assert isinstance(track, Track)
            assert isinstance(obs, ObservationSet)
            assert obs.ys.shape == (len(obs.times), 2)
            assert track.states.shape[1] == 4
