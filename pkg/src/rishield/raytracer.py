"""2D image-method propagation over a floor plan, with an optional RIS panel.

Paths are summed non-coherently (power sum), which keeps coverage maps free
of fast-fading speckle and makes extra absorption strictly monotone.  The
RIS occupies a sub-segment of its host wall; what happens there depends on
the RIS mode:

* ``off``        - the sub-segment behaves exactly like the host wall
* ``absorb-all`` - crossings and bounces both lose an extra ``absorption_db``
* mask           - bounces keep the reflecting fraction rho of the power
                   (absorbing elements leak like absorb-all), crossings lose
                   ``absorption_db * (1 - rho)``
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import mirror_point, on_segment, segment_intersection
from .kernels import trace as TK
from .ris import BitMask

DEFAULT_ABSORPTION_DB = 30.0
MAX_ORDER = 3
T_EPS = TK.T_EPS


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class RisMode:
    kind: str = "off"  # off | absorb-all | mask
    mask: BitMask | None = None
    absorption_db: float = DEFAULT_ABSORPTION_DB

    def __post_init__(self):
        if self.kind not in ("off", "absorb-all", "mask"):
            raise ValueError(f"unknown RIS mode {self.kind!r}")
        if self.kind == "mask" and self.mask is None:
            raise ValueError("mask mode needs a BitMask")
        if self.absorption_db < 0:
            raise ValueError("absorption_db must be non-negative")

    @classmethod
    def off(cls):
        return cls("off")

    @classmethod
    def absorb_all(cls, absorption_db=DEFAULT_ABSORPTION_DB):
        return cls("absorb-all", absorption_db=absorption_db)

    @classmethod
    def from_mask(cls, mask, absorption_db=DEFAULT_ABSORPTION_DB):
        return cls("mask", mask=mask, absorption_db=absorption_db)

    def extra_losses_db(self):
        """(transmission, reflection) dB added on the RIS sub-segment."""
        if self.kind == "off":
            return 0.0, 0.0
        a = self.absorption_db
        if self.kind == "absorb-all":
            return a, a
        rho = self.mask.reflect_fraction
        residual = 10.0 ** (-a / 10.0)
        refl = -10.0 * math.log10(rho + (1.0 - rho) * residual)
        return a * (1.0 - rho), refl


@dataclass(frozen=True)
class Surface:
    x1: float
    y1: float
    x2: float
    y2: float
    transmission_db: float
    reflection_db: float
    is_ris: bool = False
    wall_index: int = -1


@dataclass(frozen=True)
class Interaction:
    kind: str  # transmit | reflect
    surface: int
    x: float
    y: float
    is_ris: bool = False


@dataclass
class RayPath:
    interactions: list
    length_m: float
    loss_db: float
    free_space_loss_db: float

    @property
    def order(self):
        return sum(1 for it in self.interactions if it.kind == "reflect")


def free_space_loss_db(d_m, wavelength_m):
    """20 log10(4 pi d / lambda) with d clamped at 1 m."""
    return 20.0 * math.log10(4.0 * math.pi * max(d_m, 1.0) / wavelength_m)


def build_surfaces(scenario, ris_mode=RisMode()):
    """Walls as tracer surfaces, the host wall split around the RIS footprint."""
    ris = scenario.ris
    host = -1
    if ris is not None:
        for i, w in enumerate(scenario.walls):
            if on_segment(ris.x1, ris.y1, w.x1, w.y1, w.x2, w.y2) and on_segment(
                    ris.x2, ris.y2, w.x1, w.y1, w.x2, w.y2):
                host = i
                break
        if host < 0 and ris_mode.kind != "off":
            raise TraceError("the RIS panel must lie on a wall to be traced")
    extra_t, extra_r = ris_mode.extra_losses_db()
    out = []
    for i, w in enumerate(scenario.walls):
        m = w.material
        if i != host:
            out.append(Surface(w.x1, w.y1, w.x2, w.y2, m.transmission_loss_db, m.reflection_loss_db, False, i))
            continue
        L2 = (w.x2 - w.x1) ** 2 + (w.y2 - w.y1) ** 2

        def param(x, y):
            return ((x - w.x1) * (w.x2 - w.x1) + (y - w.y1) * (w.y2 - w.y1)) / L2

        t_a, t_b = sorted((param(ris.x1, ris.y1), param(ris.x2, ris.y2)))
        t_a, t_b = max(t_a, 0.0), min(t_b, 1.0)

        def at(t):
            return w.x1 + t * (w.x2 - w.x1), w.y1 + t * (w.y2 - w.y1)

        pieces = [(0.0, t_a, False), (t_a, t_b, True), (t_b, 1.0, False)]
        for lo, hi, is_ris in pieces:
            if hi - lo <= 1e-12:
                continue
            (ax, ay), (bx, by) = at(lo), at(hi)
            t_db = m.transmission_loss_db + (extra_t if is_ris else 0.0)
            r_db = m.reflection_loss_db + (extra_r if is_ris else 0.0)
            out.append(Surface(ax, ay, bx, by, t_db, r_db, is_ris, i))
    return out


def _collinear(a: Surface, b: Surface):
    for (px, py) in ((b.x1, b.y1), (b.x2, b.y2)):
        dx, dy = a.x2 - a.x1, a.y2 - a.y1
        if abs((px - a.x1) * dy - (py - a.y1) * dx) > 1e-12 * max(1.0, dx * dx + dy * dy):
            return False
    return True


def reflection_sequences(surfaces, max_order):
    """Surface index sequences of length 1..max_order: no immediate repeat,
    no consecutive collinear pair, at most one RIS bounce."""
    if not 0 <= max_order <= MAX_ORDER:
        raise TraceError(f"max_order must lie in [0, {MAX_ORDER}]")
    M = len(surfaces)
    out = []
    for k in range(1, max_order + 1):
        for seq in itertools.product(range(M), repeat=k):
            if any(seq[i] == seq[i + 1] or _collinear(surfaces[seq[i]], surfaces[seq[i + 1]])
                   for i in range(k - 1)):
                continue
            if sum(surfaces[i].is_ris for i in seq) > 1:
                continue
            out.append(seq)
    return out


def _images(src, surfaces, seq):
    imgs = []
    x, y = src
    for i in seq:
        s = surfaces[i]
        x, y = mirror_point(x, y, s.x1, s.y1, s.x2, s.y2)
        imgs.append((x, y))
    return imgs


def _crossings(ax, ay, bx, by, surfaces, skip):
    out = []
    for w, s in enumerate(surfaces):
        if w in skip:
            continue
        hit = segment_intersection(ax, ay, bx, by, s.x1, s.y1, s.x2, s.y2)
        if hit is None:
            continue
        t, u = hit
        if T_EPS < t < 1.0 - T_EPS and 0.0 <= u < 1.0:
            out.append((t, w, ax + t * (bx - ax), ay + t * (by - ay)))
    return sorted(out)


def enumerate_paths(scenario, src, dst, max_order=1, ris_mode=RisMode()):
    """All image-method paths from ``src`` to ``dst`` (scalar reference code).

    Each path carries the free-space loss of its unfolded length plus every
    crossing and bounce loss.  The RIS takes part in at most one bounce.
    """
    surfaces = build_surfaces(scenario, ris_mode)
    lam = scenario.wavelength_m
    paths = []
    for seq in [()] + reflection_sequences(surfaces, max_order):
        imgs = _images(src, surfaces, seq)
        pts = [None] * (len(seq) + 2)
        pts[0], pts[-1] = tuple(src), tuple(dst)
        cur = tuple(dst)
        ok = True
        for i in range(len(seq) - 1, -1, -1):
            s = surfaces[seq[i]]
            hit = segment_intersection(imgs[i][0], imgs[i][1], cur[0], cur[1], s.x1, s.y1, s.x2, s.y2)
            if hit is None or not (T_EPS < hit[0] < 1.0 - T_EPS and 0.0 <= hit[1] < 1.0):
                ok = False
                break
            t = hit[0]
            cur = (imgs[i][0] + t * (cur[0] - imgs[i][0]), imgs[i][1] + t * (cur[1] - imgs[i][1]))
            pts[i + 1] = cur
        if not ok:
            continue
        if seq:
            length = math.hypot(dst[0] - imgs[-1][0], dst[1] - imgs[-1][1])
        else:
            length = math.hypot(dst[0] - src[0], dst[1] - src[1])
        fsl = free_space_loss_db(length, lam)
        loss = fsl
        inter = []
        k = len(seq)
        for m in range(k + 1):
            skip = set()
            if m > 0:
                skip.add(seq[m - 1])
            if m < k:
                skip.add(seq[m])
            for _, w, x, y in _crossings(*pts[m], *pts[m + 1], surfaces, skip):
                loss += surfaces[w].transmission_db
                inter.append(Interaction("transmit", w, x, y, surfaces[w].is_ris))
            if m < k:
                w = seq[m]
                loss += surfaces[w].reflection_db
                inter.append(Interaction("reflect", w, pts[m + 1][0], pts[m + 1][1], surfaces[w].is_ris))
        paths.append(RayPath(inter, length, loss, fsl))
    return paths


def path_power_dbm(paths, ptx_dbm):
    p = sum(10.0 ** ((ptx_dbm - path.loss_db) / 10.0) for path in paths)
    return 10.0 * math.log10(p) if p > 0 else float("-inf")


# -- coverage -------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Cell-centred lattice: centre (i, j) = (x0 + (i + 0.5) dx, y0 + (j + 0.5) dx)."""

    x0: float
    y0: float
    cell: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.cell > 0 or self.nx < 1 or self.ny < 1:
            raise TraceError("grid needs a positive cell size and at least one cell")

    @classmethod
    def covering(cls, scenario, cell=0.1):
        bbox = scenario.bounding_box()
        if bbox is None:
            raise TraceError("free-space scenario: give the grid explicitly")
        xmin, ymin, xmax, ymax = bbox
        nx = max(1, int(round((xmax - xmin) / cell)))
        ny = max(1, int(round((ymax - ymin) / cell)))
        return cls(xmin, ymin, cell, nx, ny)

    def centers(self):
        xs = self.x0 + (np.arange(self.nx) + 0.5) * self.cell
        ys = self.y0 + (np.arange(self.ny) + 0.5) * self.cell
        return xs, ys


@dataclass
class CoverageGrid:
    spec: GridSpec
    power_dbm: np.ndarray  # (ny, nx), row j = y index; -inf marks no signal

    def to_csv(self):
        xs, ys = self.spec.centers()
        lines = ["x,y,power_dbm"]
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                p = self.power_dbm[j, i]
                lines.append(f"{x:.4f},{y:.4f},{p:.6f}" if np.isfinite(p) else f"{x:.4f},{y:.4f},-inf")
        return "\n".join(lines) + "\n"

    def to_pgm(self, floor_dbm=-100.0, ceil_dbm=0.0):
        """8-bit binary PGM, top row = largest y; no-signal cells are 0."""
        if not ceil_dbm > floor_dbm:
            raise ValueError("ceil_dbm must exceed floor_dbm")
        p = self.power_dbm[::-1]
        scaled = np.clip((p - floor_dbm) / (ceil_dbm - floor_dbm), 0.0, 1.0) * 255.0
        pix = np.where(np.isfinite(p), np.round(scaled), 0).astype(np.uint8)
        header = f"P5\n{self.spec.nx} {self.spec.ny}\n255\n".encode()
        return header + pix.tobytes()

    def write(self, csv_path=None, pgm_path=None, floor_dbm=-100.0, ceil_dbm=0.0):
        if csv_path is not None:
            Path(csv_path).write_text(self.to_csv())
        if pgm_path is not None:
            Path(pgm_path).write_bytes(self.to_pgm(floor_dbm, ceil_dbm))


def _kernel_inputs(scenario, src, surfaces, max_order):
    seqs = reflection_sequences(surfaces, max_order)
    K = max(1, max_order)
    S = len(seqs)
    seq = np.full((S, K), -1, dtype=np.int64)
    seqlen = np.zeros(S, dtype=np.int64)
    imgs = np.zeros((S, K, 2))
    for s, sq in enumerate(seqs):
        seq[s, :len(sq)] = sq
        seqlen[s] = len(sq)
        imgs[s, :len(sq)] = _images(src, surfaces, sq)
    segs = np.array([[s.x1, s.y1, s.x2, s.y2] for s in surfaces], dtype=float).reshape(-1, 4)
    trans = np.array([s.transmission_db for s in surfaces], dtype=float)
    refl = np.array([s.reflection_db for s in surfaces], dtype=float)
    return seq, seqlen, imgs, segs, trans, refl


def trace_points(scenario, points, ris_mode=RisMode(), max_order=2, coherent=False, accumulate=None):
    """Received power (dBm) at arbitrary points."""
    pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 2))
    surfaces = build_surfaces(scenario, ris_mode)
    tx = scenario.tx
    src = np.array([tx.x, tx.y])
    seq, seqlen, imgs, segs, trans, refl = _kernel_inputs(scenario, src, surfaces, max_order)
    fn = accumulate or TK.accumulate
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        power, phasor = fn(src, pts, seq, seqlen, imgs, segs, trans, refl,
                           scenario.wavelength_m, 10.0 ** (tx.tx_power_dbm / 10.0))
        total = np.abs(phasor) ** 2 if coherent else power
        out = np.where(total > 0, 10.0 * np.log10(np.where(total > 0, total, 1.0)), -np.inf)
    return out


def trace_coverage(scenario, ris_mode=RisMode(), grid=None, max_order=2, coherent=False, accumulate=None):
    """Coverage map in dBm over ``grid`` (default: 0.1 m cells over the walls' box)."""
    if grid is None:
        grid = GridSpec.covering(scenario)
    bbox = scenario.bounding_box()
    if bbox is not None:
        gx1 = grid.x0 + grid.nx * grid.cell
        gy1 = grid.y0 + grid.ny * grid.cell
        xmin, ymin, xmax, ymax = bbox
        if gx1 <= xmin or grid.x0 >= xmax or gy1 <= ymin or grid.y0 >= ymax:
            raise TraceError("grid does not overlap the scenario")
    xs, ys = grid.centers()
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    p = trace_points(scenario, pts, ris_mode, max_order, coherent, accumulate)
    return CoverageGrid(grid, p.reshape(grid.ny, grid.nx))


def grid_stats(grid: CoverageGrid, region):
    """Median / max / min over cells whose centres fall in ``region``
    (xmin, ymin, xmax, ymax); no-signal cells are excluded and counted."""
    xmin, ymin, xmax, ymax = region
    xs, ys = grid.spec.centers()
    mx = (xs >= xmin) & (xs <= xmax)
    my = (ys >= ymin) & (ys <= ymax)
    if not mx.any() or not my.any():
        raise TraceError("region does not intersect the grid")
    vals = grid.power_dbm[np.ix_(my, mx)].ravel()
    finite = vals[np.isfinite(vals)]
    stats = {
        "n_cells": int(vals.size),
        "n_no_signal": int(vals.size - finite.size),
    }
    if finite.size:
        stats.update(median_dbm=float(np.median(finite)), max_dbm=float(finite.max()),
                     min_dbm=float(finite.min()))
    else:
        stats.update(median_dbm=float("-inf"), max_dbm=float("-inf"), min_dbm=float("-inf"))
    return stats
