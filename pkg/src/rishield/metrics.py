"""Per-user SINR, sum rate and received power.

Power convention: channels are linear amplitude gains and W is in sqrt(mW),
so ``|v^H H_bar_u w_j|^2`` is already in mW and dBm is ``10 log10`` of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .optimizer import mse_u

NO_SIGNAL_DBM = float("-inf")


def _gains(cfg, precoder, channels, u):
    return cfg.v.conj() @ channels.H_bar[u] @ precoder.W


def sinr_u(cfg, precoder, channels, u) -> float:
    a = np.abs(_gains(cfg, precoder, channels, u)) ** 2
    signal = a[u]
    interference = a.sum() - signal
    den = interference + channels.sigma2
    if den == 0:
        return math.inf if signal > 0 else 0.0
    return float(signal / den)


def rate_u(cfg, precoder, channels, u) -> float:
    return math.log2(1.0 + sinr_u(cfg, precoder, channels, u))


def sum_rate(cfg, precoder, channels) -> float:
    return sum(rate_u(cfg, precoder, channels, u) for u in range(channels.n_users))


def rx_power_dbm(cfg, precoder, channels, u) -> float:
    """Total received power of user u in dBm; ``NO_SIGNAL_DBM`` when zero."""
    p = float(np.sum(np.abs(_gains(cfg, precoder, channels, u)) ** 2))
    if p <= 0.0:
        return NO_SIGNAL_DBM
    return 10.0 * math.log10(p)


@dataclass
class LinkReport:
    names: list
    zones: list
    sinr_linear: list
    rate_bps_hz: list
    mse: list
    rx_power_dbm: list

    @property
    def sum_rate(self):
        return float(sum(self.rate_bps_hz))

    def to_csv(self):
        lines = ["user,zone,sinr_linear,rate_bps_hz,mse,rx_power_dbm"]
        for row in zip(self.names, self.zones, self.sinr_linear, self.rate_bps_hz, self.mse, self.rx_power_dbm):
            name, zone, *vals = row
            lines.append(",".join([name, zone] + [f"{x:.10e}" for x in vals]))
        return "\n".join(lines) + "\n"


def link_report(cfg, precoder, channels, names=None, zones=None) -> LinkReport:
    U = channels.n_users
    names = names or [f"rx{u}" for u in range(U)]
    zones = zones or [""] * U
    sinr = [sinr_u(cfg, precoder, channels, u) for u in range(U)]
    return LinkReport(
        names=list(names),
        zones=list(zones),
        sinr_linear=sinr,
        rate_bps_hz=[math.log2(1.0 + s) for s in sinr],
        mse=[mse_u(cfg, precoder, channels, u) for u in range(U)],
        rx_power_dbm=[rx_power_dbm(cfg, precoder, channels, u) for u in range(U)],
    )
