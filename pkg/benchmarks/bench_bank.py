"""Benchmark: compiled filter-bank kernel vs the batched numpy fallback.

Times the per-observation bank update on realistic problem shapes (the
pointing service runs 21 destinations x 9 arrival times on a 4-d state;
the harbour evaluation runs 6 x 15) plus the full engine path.

    python3 benchmarks/bench_bank.py [--steps 300] [--repeats 5]
"""

import argparse
import time

import numpy as np

from endpointer import _backend, _core_py
from endpointer.bridge import bank_step_blocks
from endpointer.intent import Scenario, UniformArrival, init_bank
from endpointer.models import Destination, ModelParams, observation_matrix


def make_scenario(kind, n_dest):
    rng = np.random.default_rng(0)
    if kind == "erv":
        p = ModelParams.erv(0.1, 0.5, 1.0)
    else:
        p = ModelParams.cv(1.0)
    r = p.state_dim
    angles = np.linspace(0.0, 2 * np.pi, n_dest, endpoint=False)
    dests = [
        Destination(np.array([10 * np.cos(a), 10 * np.sin(a), 0.0, 0.0]),
                    np.diag([0.2, 0.2, 0.05, 0.05]), prior=1.0 / n_dest)
        for a in angles
    ]
    return Scenario(p, dests, UniformArrival(8.0, 24.0), 0.05 * np.eye(2),
                    np.zeros(r), np.diag([4.0, 4.0, 1.0, 1.0]))


def kernel_inputs(sc, q):
    """One frozen mid-track update, ready to replay through either kernel."""
    rng = np.random.default_rng(1)
    bank = init_bank(sc, q=q)
    bank.update(rng.normal(0, 2, size=2), 0.0)
    bank.update(rng.normal(0, 2, size=2), 0.5)
    h = 0.5
    taus = bank.T_grid - 1.0
    Hq, Cq, moff = bank_step_blocks(sc.model, h, taus, sc.dest_means())
    y = rng.normal(0, 2, size=2)
    return bank, Hq, Cq, moff, y


def time_kernel(fn, bank, Hq, Cq, moff, y, steps, repeats):
    """Median over repeats of the mean per-call time, in microseconds."""
    active = np.ones(bank.q, dtype=np.uint8)
    pedls = np.empty((bank.n_dest, bank.q))
    best = []
    for _ in range(repeats):
        means = bank.means.copy()
        covs = bank.covs.copy()
        logliks = bank.logliks.copy()
        t0 = time.perf_counter()
        for _ in range(steps):
            fn(means, covs, logliks, active, Hq, Cq, moff, y, bank.G,
               bank.V, pedls)
        best.append((time.perf_counter() - t0) / steps)
    return 1e6 * float(np.median(best))


def time_engine(sc, q, steps, repeats):
    """Full bank.update path (blocks + kernel + posteriors), microseconds."""
    rng = np.random.default_rng(2)
    best = []
    for _ in range(repeats):
        bank = init_bank(sc, q=q)
        dt = 6.0 / steps
        t0 = time.perf_counter()
        t = 0.0
        for _ in range(steps):
            bank.update(rng.normal(0, 2, size=2), t)
            t += dt
        best.append((time.perf_counter() - t0) / steps)
    return 1e6 * float(np.median(best))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=300)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    if not _backend.HAVE_EXTENSION:
        print("compiled extension not available; showing fallback only\n")

    shapes = [("pointing 21x9 erv", "erv", 21, 9),
              ("harbour 6x15 cv", "cv", 6, 15)]
    print(f"{'shape':<22}{'numpy us':>12}{'compiled us':>14}{'speedup':>10}")
    for label, kind, n_dest, q in shapes:
        sc = make_scenario(kind, n_dest)
        bank, Hq, Cq, moff, y = kernel_inputs(sc, q)
        t_py = time_kernel(_core_py.bank_kf_step, bank, Hq, Cq, moff, y,
                           args.steps, args.repeats)
        if _backend.HAVE_EXTENSION:
            from endpointer import _core
            t_ext = time_kernel(_core.bank_kf_step, bank, Hq, Cq, moff, y,
                                args.steps, args.repeats)
            print(f"{label:<22}{t_py:>12.1f}{t_ext:>14.1f}"
                  f"{t_py / t_ext:>9.1f}x")
        else:
            print(f"{label:<22}{t_py:>12.1f}{'-':>14}{'-':>10}")

    print()
    for label, kind, n_dest, q in shapes:
        sc = make_scenario(kind, n_dest)
        t_full = time_engine(sc, q, args.steps, args.repeats)
        print(f"full update path, {label}: {t_full:.1f} us/observation "
              f"({_backend.backend_name()} kernel)")


if __name__ == "__main__":
    main()
