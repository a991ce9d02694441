"""Round-trip tests for scenario documents and result tables."""

import numpy as np
import pytest

from endpointer.evaluate import SuccessCurve
from endpointer.fileio import (
    file_sha256,
    load_scenario,
    load_simulate_defaults,
    matrix_from_spec,
    matrix_to_spec,
    read_manifest,
    read_observations_csv,
    read_posterior_csv,
    read_track_csv,
    resolve_scenario,
    save_scenario,
    write_curve_csv,
    write_fit_fragment,
    write_fit_table_csv,
    write_manifest,
    write_mixture_csv,
    write_observations_csv,
    write_posterior_csv,
    write_quadrature_csv,
    write_summary_csv,
    write_track_csv,
)
from endpointer.gaussian import GaussianMixture
from endpointer.intent import Scenario, TabulatedArrival, UniformArrival
from endpointer.models import Destination, ModelKind, ModelParams
from endpointer.simulate import ObservationSet, Track


def two_dest_scenario(arrival=None):
    p = ModelParams.mrd(0.4, 1.2)
    dests = [Destination([5.0, 1.0], np.diag([0.1, 0.2]), prior=0.6,
                         name="east"),
             Destination([-5.0, -1.0], 0.3 * np.eye(2), prior=0.4,
                         name="west")]
    return Scenario(p, dests, arrival or UniformArrival(4.0, 9.0),
                    [[0.5, 0.1], [0.1, 0.4]], [0.0, 0.5],
                    np.diag([1.0, 2.0]), name="two")


class TestMatrixSpecs:
    def test_scalar_diag_and_full(self):
        np.testing.assert_array_equal(matrix_from_spec(2.0, 3),
                                      2.0 * np.eye(3))
        np.testing.assert_array_equal(matrix_from_spec([1.0, 4.0], 2),
                                      np.diag([1.0, 4.0]))
        full = [[1.0, 0.2], [0.2, 2.0]]
        np.testing.assert_array_equal(matrix_from_spec(full, 2),
                                      np.array(full))

    def test_compact_rendering(self):
        assert matrix_to_spec(3.0 * np.eye(4)) == 3.0
        assert matrix_to_spec(np.diag([1.0, 2.0])) == [1.0, 2.0]
        full = np.array([[1.0, 0.5], [0.5, 1.0]])
        assert matrix_to_spec(full) == [[1.0, 0.5], [0.5, 1.0]]

    def test_size_mismatch_rejected(self):
        with pytest.raises(ValueError):
            matrix_from_spec([1.0, 2.0, 3.0], 2)
        with pytest.raises(ValueError):
            matrix_from_spec([[1.0]], 2)


class TestScenarioDocuments:
    def test_round_trip(self, tmp_path):
        sc = two_dest_scenario()
        path = tmp_path / "two.scn"
        save_scenario(sc, path, {"dt": 0.5, "seed": 3})
        back = load_scenario(path)
        assert back.name == "two"
        assert back.model.kind is ModelKind.MRD
        np.testing.assert_allclose(back.model.lam, sc.model.lam)
        np.testing.assert_allclose(back.model.sigma, sc.model.sigma)
        assert [d.name for d in back.destinations] == ["east", "west"]
        np.testing.assert_allclose(back.destinations[0].mean, [5.0, 1.0])
        np.testing.assert_allclose(back.destinations[0].cov,
                                   np.diag([0.1, 0.2]))
        assert back.destinations[0].prior == pytest.approx(0.6)
        assert back.arrival_support == (4.0, 9.0)
        np.testing.assert_allclose(back.obs_noise, sc.obs_noise)
        np.testing.assert_allclose(back.init_cov, sc.init_cov)
        assert load_simulate_defaults(path) == {"dt": 0.5, "seed": 3}

    def test_tabulated_arrival_round_trip(self, tmp_path):
        arr = TabulatedArrival([2.0, 4.0, 8.0], [0.0, 1.0, 0.0])
        sc = two_dest_scenario(arrival=arr)
        path = tmp_path / "tab.scn"
        save_scenario(sc, path)
        back = load_scenario(path)
        assert isinstance(back.arrival, TabulatedArrival)
        np.testing.assert_allclose(back.arrival.t_points, arr.t_points)
        np.testing.assert_allclose(back.arrival.density, arr.density)
        assert load_simulate_defaults(path) == {}

    def test_per_destination_arrival_list(self, tmp_path):
        arrs = [UniformArrival(4.0, 9.0),
                TabulatedArrival([4.0, 6.0, 9.0], [0.2, 1.0, 0.2])]
        sc = two_dest_scenario(arrival=arrs)
        path = tmp_path / "list.scn"
        save_scenario(sc, path)
        back = load_scenario(path)
        got = back.arrival_list()
        assert isinstance(got[0], UniformArrival)
        assert isinstance(got[1], TabulatedArrival)
        assert back.arrival_support == (4.0, 9.0)

    def test_packaged_scenarios_parse(self):
        bay = load_scenario(resolve_scenario("bay"))
        assert bay.n_dest == 6 and bay.model.kind is ModelKind.CV
        pointing = load_scenario(resolve_scenario("pointing"))
        assert pointing.n_dest == 21
        assert pointing.model.kind is ModelKind.ERV
        assert pointing.arrival_support == (2.0, 8.0)

    def test_name_resolution(self, tmp_path):
        real = tmp_path / "own.scn"
        save_scenario(two_dest_scenario(), real)
        assert resolve_scenario(real) == real
        assert resolve_scenario("bay").name == "bay.scn"
        with pytest.raises(FileNotFoundError):
            resolve_scenario("atlantis")


class TestResultTables:
    def test_track_and_observation_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        track = Track(np.array([0.0, 1.0, 2.5]),
                      rng.normal(size=(3, 4)) * 1e4, 2, 2.5)
        tp = tmp_path / "track.csv"
        write_track_csv(tp, track)
        times, states = read_track_csv(tp)
        np.testing.assert_allclose(times, track.times, rtol=1e-8)
        np.testing.assert_allclose(states, track.states, rtol=1e-8)

        obs = ObservationSet(track.times, track.states[:, :2])
        op = tmp_path / "obs.csv"
        write_observations_csv(op, obs)
        back = read_observations_csv(op)
        np.testing.assert_allclose(back.ys, obs.ys, rtol=1e-8)

    def test_posterior_round_trip(self, tmp_path):
        times = np.array([0.0, 1.0])
        maps = np.array([1, 0])
        probs = np.array([[0.25, 0.75], [0.6, 0.4]])
        arr = np.array([[0.1, 0.9], [0.5, 0.5]])
        path = tmp_path / "post.csv"
        write_posterior_csv(path, times, maps, probs, arr)
        out = read_posterior_csv(path)
        np.testing.assert_array_equal(out["map_index"], maps)
        np.testing.assert_allclose(out["dest_probs"], probs, rtol=1e-8)
        np.testing.assert_allclose(out["arrival"], arr, rtol=1e-8)

        write_posterior_csv(path, times, maps, probs)
        out = read_posterior_csv(path)
        assert "arrival" not in out

    def test_curve_and_summary_and_quadrature(self, tmp_path):
        curve = SuccessCurve(np.array([25.0, 75.0]),
                             np.array([0.5, np.nan]),
                             np.array([0.1, np.nan]),
                             np.array([4, 0]))
        cp = tmp_path / "curve.csv"
        write_curve_csv(cp, curve)
        text = cp.read_text()
        assert "nan" in text and "0.5" in text

        write_summary_csv(tmp_path / "sum.csv",
                          [("bridge", 15, 100, 0.71), ("nn", 0, 100, 0.4)])
        assert "bridge" in (tmp_path / "sum.csv").read_text()

        write_quadrature_csv(tmp_path / "quad.csv",
                             [(1, 0.5, 0.3), (9, 0.7, 0.2)])
        lines = (tmp_path / "quad.csv").read_text().strip().splitlines()
        assert lines[0] == "q,mean,std" and len(lines) == 3

    def test_mixture_dump(self, tmp_path):
        mix = GaussianMixture([0.5, 0.5],
                              [[0.0, 1.0], [2.0, 3.0]],
                              [np.eye(2), 2.0 * np.eye(2)])
        path = tmp_path / "mix.csv"
        write_mixture_csv(path, mix)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "weight,m_1,m_2,c_1_1,c_1_2,c_2_1,c_2_2"
        assert len(lines) == 3

    def test_fit_outputs(self, tmp_path):
        params = ModelParams.mrd(0.45, 1.0)
        fp = tmp_path / "fit.yaml"
        write_fit_fragment(fp, params)
        text = fp.read_text()
        assert "mrd" in text and "0.45" in text

        table = [({"lam": 0.4}, -10.5), ({"lam": 0.45}, -np.inf)]
        tp = tmp_path / "table.csv"
        write_fit_table_csv(tp, table)
        lines = tp.read_text().strip().splitlines()
        assert lines[0] == "lam,log_evidence"
        assert lines[2].endswith("-inf")
        with pytest.raises(ValueError):
            write_fit_table_csv(tp, [])


class TestManifest:
    def test_write_and_read(self, tmp_path):
        scn = tmp_path / "s.scn"
        save_scenario(two_dest_scenario(), scn)
        entries = [{"id": "track000", "seed_index": 0, "dest_index": 1,
                    "dest_name": "west", "T": 6.25,
                    "track_csv": "track000.csv", "obs_csv": "obs000.csv"}]
        mp = tmp_path / "manifest.json"
        write_manifest(mp, scn, seed=9, dt=0.5, rate=1.0, entries=entries)
        doc = read_manifest(mp)
        assert doc["seed"] == 9
        assert doc["tracks"][0]["dest_name"] == "west"
        assert doc["scenario_sha256"] == file_sha256(scn)
        scn.write_text(scn.read_text() + "# tampered\n")
        assert doc["scenario_sha256"] != file_sha256(scn)
