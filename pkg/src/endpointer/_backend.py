"""Selects the filter-bank kernel: compiled extension or numpy fallback.

The compiled module endpointer._core is optional. It is used when it
imports cleanly and the problem fits its fixed-size scratch space
(augmented state dim <= 16, observation dim <= 8); otherwise the batched
numpy implementation in _core_py runs. Set ENDPOINTER_NO_EXT=1 to force
the fallback regardless.
"""

from __future__ import annotations

import os

import numpy as np

from . import _core_py

_EXT_MAX_STATE = 16
_EXT_MAX_OBS = 8

if os.environ.get("ENDPOINTER_NO_EXT"):
    _core = None
else:
    try:
        from . import _core
    except ImportError:
        _core = None

HAVE_EXTENSION = _core is not None


def backend_name(state_dim: int | None = None, obs_dim: int | None = None) -> str:
    """Which implementation will run for the given problem size."""
    if _core is None:
        return "python"
    if state_dim is not None and state_dim > _EXT_MAX_STATE:
        return "python"
    if obs_dim is not None and obs_dim > _EXT_MAX_OBS:
        return "python"
    return "compiled"


def bank_kf_step(means, covs, logliks, active, Hq, Cq, moff, y, G, V, pedls):
    """One bank observation update, in place. See _core_py for the contract."""
    n = means.shape[2]
    k = y.shape[0]
    if _core is not None and n <= _EXT_MAX_STATE and k <= _EXT_MAX_OBS:
        rc = _core.bank_kf_step(means, covs, logliks, active, Hq, Cq, moff,
                                y, G, V, pedls)
        if rc != 0:
            raise np.linalg.LinAlgError(
                "innovation covariance not positive definite in bank update")
        return
    _core_py.bank_kf_step(means, covs, logliks, active, Hq, Cq, moff, y, G,
                          V, pedls)
