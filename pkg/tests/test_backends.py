"""Compiled kernel vs numpy fallback: bit-level agreement and dispatch."""

import os
import subprocess
import sys

import numpy as np
import pytest

from endpointer import _backend, _core_py
from endpointer.intent import Scenario, UniformArrival, init_bank
from endpointer.models import Destination, ModelKind, ModelParams

from test_intent import cv_scenario
from test_models import random_params

HAVE_EXT = _backend.HAVE_EXTENSION


def run_bank(sc, q, times, ys, force_python):
    bank = init_bank(sc, q=q)
    if force_python:
        # route every kernel call through the numpy implementation
        orig = _backend._core
        _backend._core = None
        try:
            for t, y in zip(times, ys):
                post = bank.update(y, t)
        finally:
            _backend._core = orig
    else:
        for t, y in zip(times, ys):
            post = bank.update(y, t)
    return bank, post


@pytest.mark.skipif(not HAVE_EXT, reason="compiled kernel not built")
class TestKernelEquivalence:
    @pytest.mark.parametrize("kind", list(ModelKind))
    def test_full_bank_run_matches(self, kind):
        rng = np.random.default_rng(list(ModelKind).index(kind))
        p = random_params(kind, rng)
        r = p.state_dim
        dests = [
            Destination(rng.normal(0, 5, size=r),
                        (0.3 * (j % 2)) * np.eye(r), prior=1.0 / 3,
                        name=f"d{j}")
            for j in range(3)
        ]
        sc = Scenario(p, dests, UniformArrival(6.0, 14.0),
                      0.4 * np.eye(p.obs_dim), np.zeros(r), np.eye(r))
        times = np.cumsum(rng.uniform(0.2, 1.0, size=9))
        ys = rng.normal(0, 2, size=(9, p.obs_dim))
        b_ext, p_ext = run_bank(sc, 5, times, ys, force_python=False)
        b_py, p_py = run_bank(sc, 5, times, ys, force_python=True)
        np.testing.assert_allclose(b_ext.means, b_py.means, rtol=1e-10,
                                   atol=1e-12)
        np.testing.assert_allclose(b_ext.covs, b_py.covs, rtol=1e-10,
                                   atol=1e-12)
        np.testing.assert_allclose(b_ext.logliks, b_py.logliks, rtol=1e-12,
                                   atol=1e-10)
        np.testing.assert_allclose(p_ext.dest_probs, p_py.dest_probs,
                                   rtol=1e-10, atol=1e-13)

    def test_inactive_columns_untouched_by_both(self):
        rng = np.random.default_rng(1)
        sc = cv_scenario()
        times = [0.0, 9.0]  # second observation lapses early grid columns
        ys = rng.normal(0, 2, size=(2, 2))
        b_ext, _ = run_bank(sc, 5, times, ys, force_python=False)
        b_py, _ = run_bank(sc, 5, times, ys, force_python=True)
        assert not b_ext.active[0]
        np.testing.assert_array_equal(b_ext.means[:, 0], b_py.means[:, 0])

    def test_failure_reported_the_same_way(self):
        """Zero noise against a collapsed prior: both must raise LinAlgError."""
        p = ModelParams.bm(1.0, dims=1)
        dests = [Destination([4.0], [[0.0]], prior=1.0)]
        sc = Scenario(p, dests, UniformArrival(5.0, 9.0), [[0.0]], [0.0],
                      [[0.0]])
        for force in (False, True):
            bank = init_bank(sc, q=3)
            orig = _backend._core
            if force:
                _backend._core = None
            try:
                with pytest.raises(np.linalg.LinAlgError):
                    bank.update([0.5], 0.0)
            finally:
                _backend._core = orig


class TestDispatch:
    def test_oversize_state_goes_to_python(self):
        # 5 spatial dims -> augmented state 20 > compiled limit 16
        assert _backend.backend_name(state_dim=20) == "python"
        if HAVE_EXT:
            assert _backend.backend_name(state_dim=16, obs_dim=8) == "compiled"
            assert _backend.backend_name(state_dim=16, obs_dim=9) == "python"

    def test_oversize_bank_still_runs(self):
        rng = np.random.default_rng(4)
        p = ModelParams.cv(np.ones(5), dims=5)  # state dim 10, augmented 20
        r = p.state_dim
        dests = [Destination(rng.normal(0, 3, size=r), np.zeros((r, r)),
                             prior=0.5) for _ in range(2)]
        sc = Scenario(p, dests, UniformArrival(5.0, 9.0), np.eye(5),
                      np.zeros(r), np.eye(r))
        bank = init_bank(sc, q=3)
        post = bank.update(rng.normal(size=5), 0.0)
        post = bank.update(rng.normal(size=5), 1.0)
        assert post.dest_probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_env_override_forces_python(self):
        code = (
            "import endpointer._backend as b; "
            "print(b.HAVE_EXTENSION, b.backend_name())"
        )
        env = dict(os.environ, ENDPOINTER_NO_EXT="1")
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "False python"
