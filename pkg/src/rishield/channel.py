"""Channel synthesis for the tx / RIS / multi-receiver downlink.

Conventions
-----------
* ``G`` is N x Sigma (tx -> RIS), ``h_direct[u]`` has length Sigma and
  ``h_ris[u]`` length N (RIS -> receiver u).
* The effective channel of receiver u stacks ``diag(h_ris[u]^H) G`` over
  ``h_direct[u]^H`` so that ``v^H H_bar[u] w`` is the end-to-end gain for the
  RIS vector ``v`` (last entry pinned to 1).
* Channels carry linear amplitude gains (path loss included) and precoders
  carry amplitudes in sqrt(mW), so ``|v^H H_bar w|^2`` is a power in mW.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import crosses, on_segment

# stream identifiers for seed splitting; never reorder
LINK_DIRECT = 0
LINK_TX_RIS = 1
LINK_RIS_RX = 2


def steering_vector(n_elems, sin_angle):
    """Half-wavelength ULA response, entry k = exp(j*pi*k*sin_angle)."""
    if n_elems < 1:
        raise ValueError("n_elems must be >= 1")
    if not -1.0 <= sin_angle <= 1.0:
        raise ValueError(f"|sin_angle| must be <= 1, got {sin_angle}")
    k = np.arange(n_elems)
    return np.exp(1j * np.pi * k * sin_angle)


def upa_steering(rows, cols, sin_row, sin_col):
    """Row-major UPA response as the Kronecker product of row/column ULAs."""
    return np.kron(steering_vector(rows, sin_row), steering_vector(cols, sin_col))


def path_loss_gain(d_m, lambda_m, exponent, d_ref=1.0):
    """Linear power gain (lambda / 4 pi)^2 * d^-exponent, d clamped at d_ref."""
    if d_m <= 0 or lambda_m <= 0 or exponent <= 0:
        raise ValueError("distance, wavelength and exponent must be positive")
    d = max(d_m, d_ref)
    return (lambda_m / (4.0 * np.pi)) ** 2 * d ** (-exponent)


@dataclass(frozen=True)
class PathGeometry:
    d_u: float
    theta_u: float
    d1: float
    psi_D: float
    psi_A: float
    d2_u: float
    psi_u: float
    los_direct: bool = True
    los_ris_rx: bool = True

    def __post_init__(self):
        for name in ("d_u", "d1", "d2_u"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("theta_u", "psi_D", "psi_A", "psi_u"):
            a = getattr(self, name)
            if not -np.pi <= a < np.pi:
                raise ValueError(f"{name} must lie in [-pi, pi)")


@dataclass(frozen=True)
class ChannelModel:
    """Rician mixing and path-loss exponents.  ``k_factor_db`` may be +/-inf."""

    wavelength_m: float = 299_792_458.0 / 2.4e9
    k_factor_db: float = 10.0
    k_tx_ris_db: float | None = None
    exp_los: float = 2.0
    exp_direct_nlos: float = 3.0
    exp_ris_legs: float = 2.0

    def los_weights(self, k_db):
        """(sqrt(K/(K+1)), sqrt(1/(K+1))) with the infinite limits handled."""
        if k_db == np.inf:
            return 1.0, 0.0
        if k_db == -np.inf:
            return 0.0, 1.0
        k = 10.0 ** (k_db / 10.0)
        return math.sqrt(k / (k + 1.0)), math.sqrt(1.0 / (k + 1.0))


def _rng(seed, link, index):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(link, index))
    return np.random.Generator(np.random.Philox(ss))


def complex_gaussian(shape, seed, link=0, index=0):
    """CN(0, 1) samples via Box-Muller on a Philox stream keyed by (link, index)."""
    rng = _rng(seed, link, index)
    n = int(np.prod(shape))
    u1 = rng.random(n)
    u2 = rng.random(n)
    r = np.sqrt(-np.log1p(-u1))  # sqrt(-2 ln U) / sqrt(2)
    z = r * np.cos(2.0 * np.pi * u2) + 1j * r * np.sin(2.0 * np.pi * u2)
    return z.reshape(shape)


def synth_direct(geom: PathGeometry, n_tx, seed, model=ChannelModel(), index=0):
    nlos = complex_gaussian((n_tx,), seed, LINK_DIRECT, index)
    g_nlos = path_loss_gain(geom.d_u, model.wavelength_m, model.exp_direct_nlos)
    if not geom.los_direct:
        return math.sqrt(g_nlos) * nlos
    a_los, a_nlos = model.los_weights(model.k_factor_db)
    g_los = path_loss_gain(geom.d_u, model.wavelength_m, model.exp_los)
    los = steering_vector(n_tx, math.sin(geom.theta_u))
    return a_los * math.sqrt(g_los) * los + a_nlos * math.sqrt(g_nlos) * nlos


def _ris_response(n_ris, sin_angle, cols):
    cols = n_ris if cols is None else cols
    if n_ris % cols:
        raise ValueError("n_ris must be a multiple of cols")
    # azimuth cut: column steering repeated over the rows (row-major)
    return np.kron(np.ones(n_ris // cols), steering_vector(cols, sin_angle))


def synth_tx_ris(geom: PathGeometry, n_ris, n_tx, seed, model=ChannelModel(), cols=None):
    if n_ris < 1 or n_tx < 1:
        raise ValueError("dimensions must be >= 1")
    g = path_loss_gain(geom.d1, model.wavelength_m, model.exp_ris_legs)
    k_db = model.k_factor_db if model.k_tx_ris_db is None else model.k_tx_ris_db
    a_los, a_nlos = model.los_weights(k_db)
    los = np.outer(_ris_response(n_ris, math.sin(geom.psi_A), cols),
                   steering_vector(n_tx, math.sin(geom.psi_D)).conj())
    nlos = complex_gaussian((n_ris, n_tx), seed, LINK_TX_RIS, 0)
    return math.sqrt(g) * (a_los * los + a_nlos * nlos)


def synth_ris_rx(geom: PathGeometry, n_ris, seed, model=ChannelModel(), index=0, cols=None):
    g = path_loss_gain(geom.d2_u, model.wavelength_m, model.exp_ris_legs)
    nlos = complex_gaussian((n_ris,), seed, LINK_RIS_RX, index)
    if not geom.los_ris_rx:
        return math.sqrt(g) * nlos
    a_los, a_nlos = model.los_weights(model.k_factor_db)
    los = _ris_response(n_ris, math.sin(geom.psi_u), cols)
    return math.sqrt(g) * (a_los * los + a_nlos * nlos)


def compose_effective(h_ris_u, G, h_direct_u):
    """Stack diag(h_ris^H) G over h_direct^H -> (N+1) x Sigma."""
    h_ris_u = np.asarray(h_ris_u)
    h_direct_u = np.asarray(h_direct_u)
    G = np.atleast_2d(G)
    n, sigma = G.shape
    if h_ris_u.shape != (n,) or h_direct_u.shape != (sigma,):
        raise ValueError(
            f"dimension mismatch: h_ris {h_ris_u.shape}, G {G.shape}, h_direct {h_direct_u.shape}")
    top = h_ris_u.conj()[:, None] * G
    return np.vstack([top, h_direct_u.conj()[None, :]])


def cascade_gain(v, H_bar_u, w):
    """End-to-end gain v^H H_bar_u w; ``v`` must end with an exact 1."""
    v = np.asarray(v)
    if v[-1] != 1:
        raise ValueError("last entry of v must be pinned to 1")
    if H_bar_u.shape[0] != v.shape[0] or H_bar_u.shape[1] != np.shape(w)[0]:
        raise ValueError("dimension mismatch")
    return complex(np.vdot(v, H_bar_u @ w))


@dataclass
class ChannelSet:
    G: np.ndarray  # N x Sigma
    h_direct: np.ndarray  # U x Sigma
    h_ris: np.ndarray  # U x N
    sigma2: float
    H_bar: np.ndarray = field(init=False)  # U x (N+1) x Sigma

    def __post_init__(self):
        self.G = np.atleast_2d(np.asarray(self.G, dtype=complex))
        self.h_direct = np.atleast_2d(np.asarray(self.h_direct, dtype=complex))
        self.h_ris = np.atleast_2d(np.asarray(self.h_ris, dtype=complex))
        if not self.sigma2 >= 0:
            raise ValueError("sigma2 must be non-negative")
        if self.h_direct.shape[0] != self.h_ris.shape[0]:
            raise ValueError("h_direct and h_ris must list the same receivers")
        self.H_bar = np.stack([
            compose_effective(self.h_ris[u], self.G, self.h_direct[u]) for u in range(self.n_users)
        ])

    @property
    def n_ris(self):
        return self.G.shape[0]

    @property
    def n_tx(self):
        return self.G.shape[1]

    @property
    def n_users(self):
        return self.h_direct.shape[0]


def random_channel_set(n_ris, n_tx, n_users, seed, sigma2=0.1, ris_scale=1.0):
    """Unit-scale i.i.d. CN(0, 1) instance for tests and sweeps."""
    G = ris_scale * complex_gaussian((n_ris, n_tx), seed, LINK_TX_RIS, 0)
    hd = np.stack([complex_gaussian((n_tx,), seed, LINK_DIRECT, u) for u in range(n_users)])
    hr = np.stack([complex_gaussian((n_ris,), seed, LINK_RIS_RX, u) for u in range(n_users)])
    return ChannelSet(G, hd, hr, sigma2)


# -- scenario plumbing -----------------------------------------------------

def _angle_from_broadside(dx, dy, axis):
    """Signed angle of direction (dx, dy) from the broadside of an array lying
    along ``axis``; its sine is the direction's component along the axis."""
    ax, ay = axis
    along = dx * ax + dy * ay
    normal = -dx * ay + dy * ax
    ang = math.atan2(along, abs(normal))
    return min(max(ang, -math.pi), math.nextafter(math.pi, 0))


def geometry_from_scenario(scenario, u):
    """PathGeometry for receiver ``u``.  The tx ULA lies along +x; the RIS
    columns run along its mounting segment."""
    tx = scenario.tx
    rx = scenario.receivers[u]
    ris = scenario.ris
    dx, dy = rx.x - tx.x, rx.y - tx.y
    d_u = math.hypot(dx, dy)
    los_direct = not any(crosses(tx.x, tx.y, rx.x, rx.y, w) for w in scenario.walls)
    cx, cy = ris.center
    axis = ris.axis
    d1 = math.hypot(cx - tx.x, cy - tx.y)
    d2 = math.hypot(rx.x - cx, rx.y - cy)
    host = [w for w in scenario.walls if _is_host(w, ris)]
    los_ris = not any(crosses(cx, cy, rx.x, rx.y, w) for w in scenario.walls if w not in host)
    return PathGeometry(
        d_u=d_u,
        theta_u=_angle_from_broadside(dx, dy, (1.0, 0.0)),
        d1=d1,
        psi_D=_angle_from_broadside(cx - tx.x, cy - tx.y, (1.0, 0.0)),
        psi_A=_angle_from_broadside(tx.x - cx, tx.y - cy, axis),
        d2_u=d2,
        psi_u=_angle_from_broadside(rx.x - cx, rx.y - cy, axis),
        los_direct=los_direct,
        los_ris_rx=los_ris,
    )


def _is_host(wall, ris):
    return on_segment(ris.x1, ris.y1, wall.x1, wall.y1, wall.x2, wall.y2) and on_segment(
        ris.x2, ris.y2, wall.x1, wall.y1, wall.x2, wall.y2)


def channels_from_scenario(scenario, seed, model=None):
    """Synthesize a ChannelSet for every receiver of a scenario with a RIS."""
    if scenario.ris is None:
        raise ValueError("scenario has no RIS panel")
    if model is None:
        model = ChannelModel(wavelength_m=scenario.wavelength_m)
    ris = scenario.ris
    n, sigma = ris.n_elements, scenario.tx.antennas
    geoms = [geometry_from_scenario(scenario, u) for u in range(len(scenario.receivers))]
    G = synth_tx_ris(geoms[0], n, sigma, seed, model, cols=ris.cols)
    hd = np.stack([synth_direct(g, sigma, seed, model, index=u) for u, g in enumerate(geoms)])
    hr = np.stack([synth_ris_rx(g, n, seed, model, index=u, cols=ris.cols) for u, g in enumerate(geoms)])
    return ChannelSet(G, hd, hr, scenario.noise_power)


def write_complex_csv(path, arr):
    """Row-major dump: a ``rows,cols`` header line, then interleaved re,im."""
    arr = np.atleast_2d(np.asarray(arr, dtype=complex))
    rows, cols = arr.shape
    lines = [f"{rows},{cols}"]
    for r in range(rows):
        parts = []
        for c in range(cols):
            z = arr[r, c]
            parts.append(f"{float(z.real)!r},{float(z.imag)!r}")
        lines.append(",".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")


def read_complex_csv(path):
    lines = Path(path).read_text().splitlines()
    rows, cols = (int(x) for x in lines[0].split(","))
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:rows + 1]])
    if data.shape != (rows, 2 * cols):
        raise ValueError("channel dump does not match its header")
    return data[:, 0::2] + 1j * data[:, 1::2]
