"""Array-factor evaluation for a rows x cols half-wavelength grid.

AF(u, v) = sum_{r, c} coef[r, c] * exp(j pi (c u + r v)), returned as complex
values of shape (len(vs), len(us)).

The sum is separable, so the numpy path is two BLAS matrix products and beats
the compiled loop by a wide margin (see benchmarks/bench_kernels.py).  Both
backends therefore dispatch to it; the loop version stays as an independent
cross-check in the tests and the benchmark.
"""

import numpy as np

from .._accel import njit, prange


def af_grid_np(coef, us, vs):
    rows, cols = coef.shape
    Eu = np.exp(1j * np.pi * np.outer(np.arange(cols), us))  # cols x Nu
    Ev = np.exp(1j * np.pi * np.outer(vs, np.arange(rows)))  # Nv x rows
    return Ev @ coef @ Eu


@njit(parallel=True, cache=True)
def af_grid_nb(coef, us, vs):
    rows, cols = coef.shape
    nu, nv = us.shape[0], vs.shape[0]
    out = np.zeros((nv, nu), dtype=np.complex128)
    for iv in prange(nv):
        pr = np.empty(rows, dtype=np.complex128)
        for r in range(rows):
            pr[r] = np.exp(1j * np.pi * r * vs[iv])
        for iu in range(nu):
            step = np.exp(1j * np.pi * us[iu])
            acc = 0j
            for r in range(rows):
                row = 0j
                ph = 1.0 + 0j
                for c in range(cols):
                    row += coef[r, c] * ph
                    ph *= step
                acc += pr[r] * row
            out[iv, iu] = acc
    return out


af_grid = af_grid_np
