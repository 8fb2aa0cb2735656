"""Reflectarray radiation diagrams under 1-bit (or continuous) configurations.

Patterns are computed in direction-cosine space (u along the columns, v along
the rows) for a normally illuminated panel with isotropic elements and
half-wavelength spacing.  In u-space grating lobes of a periodic taper land
at fixed, affine positions, which is what the lobe finder reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import arrayfactor as AK
from .ris import BitMask, RisConfig


@dataclass
class RadiationCut:
    u: np.ndarray
    magnitude: np.ndarray
    axis: str = "col"

    @property
    def resolution(self):
        return self.u.size

    def db_rel(self):
        peak = self.magnitude.max()
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(self.magnitude / peak) if peak > 0 else np.full_like(self.magnitude, -np.inf)

    def to_csv(self):
        lines = ["u,mag_linear,mag_db_rel"]
        for u, m, d in zip(self.u, self.magnitude, self.db_rel()):
            lines.append(f"{u:.6f},{m:.9e},{d:.6f}" if np.isfinite(d) else f"{u:.6f},{m:.9e},-inf")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Lobe:
    u_peak: float
    magnitude: float
    level_db_rel_max: float


def coefficients(source, rows=None, cols=None):
    """Element coefficients as a rows x cols complex grid.

    ``source`` may be a BitMask, a RisConfig (its conj(v) reflection
    coefficients) or an array of either shape (rows, cols) or (rows * cols,).
    """
    if isinstance(source, BitMask):
        coef = source.bits.astype(complex)
    elif isinstance(source, RisConfig):
        coef = source.elements.conj().reshape(source.rows, source.cols)
    else:
        coef = np.asarray(source, dtype=complex)
        if coef.ndim == 1:
            if rows is None or cols is None:
                raise ValueError("flat coefficients need rows and cols")
            coef = coef.reshape(rows, cols)
    if rows is not None and cols is not None and coef.shape != (rows, cols):
        raise ValueError(f"coefficient grid is {coef.shape}, expected {(rows, cols)}")
    return np.ascontiguousarray(coef)


def array_factor(source, u, v=0.0, rows=None, cols=None):
    """Complex array factor at arbitrary direction cosines (broadcast over u)."""
    coef = coefficients(source, rows, cols)
    us = np.atleast_1d(np.asarray(u, dtype=float))
    vs = np.atleast_1d(np.asarray(v, dtype=float))
    return AK.af_grid(coef, us, vs)


def array_factor_cut(source, rows, cols, axis="col", resolution=1024, af=None):
    """|AF| sampled at ``resolution`` evenly spaced points of u in [-1, 1].

    ``axis="col"`` scans along the column index (v = 0), ``"row"`` along the
    row index (u = 0).
    """
    if axis not in ("row", "col"):
        raise ValueError("axis must be 'row' or 'col'")
    if resolution < 2 * max(rows, cols):
        raise ValueError("resolution must be at least 2 * max(rows, cols)")
    coef = coefficients(source, rows, cols)
    u = np.linspace(-1.0, 1.0, resolution)
    fn = af or AK.af_grid
    zero = np.zeros(1)
    if axis == "col":
        vals = fn(coef, u, zero)[0]
    else:
        vals = fn(coef, zero, u)[:, 0]
    return RadiationCut(u, np.abs(vals), axis)


def find_lobes(cut: RadiationCut, threshold_db=-10.0):
    """Local maxima at or above ``threshold_db`` relative to the peak.

    A plateau of equal samples counts once, at its leftmost sample; the end
    samples qualify as one-sided maxima.  Sorted by magnitude, largest first.
    """
    if not threshold_db < 0:
        raise ValueError("threshold_db must be negative")
    m = cut.magnitude
    peak = m.max()
    if peak <= 0:
        return []
    lobes = []
    i, n = 0, m.size
    while i < n:
        j = i
        while j + 1 < n and m[j + 1] == m[i]:
            j += 1
        left_ok = i == 0 or m[i - 1] < m[i]
        right_ok = j == n - 1 or m[j + 1] < m[i]
        if left_ok and right_ok and n > 1:
            level = 20.0 * np.log10(m[i] / peak) if m[i] > 0 else -np.inf
            if level >= threshold_db:
                lobes.append(Lobe(float(cut.u[i]), float(m[i]), float(level)))
        i = j + 1
    lobes.sort(key=lambda lb: (-lb.magnitude, lb.u_peak))
    return lobes


def full_pattern(source, rows, cols, resolution=201, visible_only=True):
    """|AF| over a resolution x resolution grid of (u, v) in [-1, 1]^2.

    Returns (u, v, mag) with mag[iv, iu]; directions with u^2 + v^2 > 1 are
    NaN unless ``visible_only`` is False.
    """
    if resolution < 2 * max(rows, cols):
        raise ValueError("resolution must be at least 2 * max(rows, cols)")
    coef = coefficients(source, rows, cols)
    u = np.linspace(-1.0, 1.0, resolution)
    mag = np.abs(AK.af_grid(coef, u, u))
    if visible_only:
        U, V = np.meshgrid(u, u)
        mag = np.where(U ** 2 + V ** 2 <= 1.0 + 1e-12, mag, np.nan)
    return u, u.copy(), mag


def pattern_csv(u, v, mag):
    lines = ["u,v,mag_linear"]
    for iv, vv in enumerate(v):
        for iu, uu in enumerate(u):
            m = mag[iv, iu]
            lines.append(f"{uu:.6f},{vv:.6f},{m:.9e}" if np.isfinite(m) else f"{uu:.6f},{vv:.6f},nan")
    return "\n".join(lines) + "\n"


def pattern_pgm(mag, floor_db=-40.0):
    """8-bit PGM in dB relative to the peak; top row = largest v."""
    peak = np.nanmax(mag)
    with np.errstate(divide="ignore", invalid="ignore"):
        db = 20.0 * np.log10(mag[::-1] / peak) if peak > 0 else np.full_like(mag, -np.inf)
    scaled = np.clip((db - floor_db) / -floor_db, 0.0, 1.0) * 255.0
    pix = np.where(np.isfinite(db), np.round(scaled), 0).astype(np.uint8)
    ny, nx = mag.shape
    return f"P5\n{nx} {ny}\n255\n".encode() + pix.tobytes()


def lobe_table(lobes):
    lines = ["u_peak,magnitude,level_db_rel_max"]
    for lb in lobes:
        lines.append(f"{lb.u_peak:.6f},{lb.magnitude:.9e},{lb.level_db_rel_max:.6f}")
    return "\n".join(lines) + "\n"


def write_cut(path, cut):
    Path(path).write_text(cut.to_csv())
