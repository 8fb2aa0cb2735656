"""Time the numba and numpy paths of the three hot kernels side by side.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The first numba call compiles (or loads the on-disk cache) and is reported
separately as warm-up; timings are the best of ``--repeat`` runs.
"""

import argparse
import time

import numpy as np

from rishield.channel import random_channel_set
from rishield.kernels import arrayfactor as AK
from rishield.kernels import shield as SK
from rishield.kernels import trace as TK
from rishield.optimizer import random_precoder_init
from rishield.raytracer import GridSpec, RisMode, build_surfaces, _kernel_inputs
from rishield.ris import make_pattern
from rishield.scenario import build_default_apartment


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def shield_case():
    ch = random_channel_set(12, 4, 4, seed=0)
    sel = np.array([True, True, False, False])
    v0 = np.append(np.exp(1j * np.linspace(0, 5, 12)), 1.0)
    W0 = random_precoder_init(4, 4, 1.0, 0)

    def make(fn):
        return lambda: fn(ch.H_bar, sel, v0, W0, 1.0, True, True, 0.1, 1e-8, 500, np.zeros(501))

    return "shield ascent (N=12, S=4, U=4)", make(SK.ascend_np), make(SK.ascend_nb)


def trace_case():
    apt = build_default_apartment()
    surfaces = build_surfaces(apt, RisMode.absorb_all())
    src = np.array([apt.tx.x, apt.tx.y])
    args = _kernel_inputs(apt, src, surfaces, 2)
    xs, ys = GridSpec.covering(apt, 0.1).centers()
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    lam = apt.wavelength_m

    def make(fn):
        return lambda: fn(src, pts, *args, lam, 100.0)

    return f"coverage trace (order 2, {pts.shape[0]} cells)", make(TK.accumulate_np), make(TK.accumulate_nb)


def af_case():
    coef = make_pattern("center-square-absorb", 10, 10).bits.astype(complex)
    u = np.linspace(-1, 1, 401)

    def make(fn):
        return lambda: fn(coef, u, u)

    return "array factor (10x10, 401x401 grid)", make(AK.af_grid_np), make(AK.af_grid_nb)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':<40} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'warm-up ms':>11}")
    for name, f_np, f_nb in (shield_case(), trace_case(), af_case()):
        t0 = time.perf_counter()
        f_nb()
        warm = time.perf_counter() - t0
        t_np = best_of(f_np, args.repeat)
        t_nb = best_of(f_nb, args.repeat)
        print(f"{name:<40} {t_np * 1e3:>10.2f} {t_nb * 1e3:>10.2f} {t_np / t_nb:>7.1f}x {warm * 1e3:>11.1f}")


if __name__ == "__main__":
    main()
