import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rishield.channel import ChannelSet, cascade_gain, random_channel_set
from rishield.metrics import NO_SIGNAL_DBM, link_report, rate_u, rx_power_dbm, sinr_u, sum_rate
from rishield.optimizer import Precoder, mrt_precoder, mse_u
from rishield.ris import RisConfig


def rand_point(ch, seed):
    rng = np.random.default_rng(seed)
    n = ch.n_ris
    cfg = RisConfig.from_elements(rng.uniform(0, 1, n) * np.exp(1j * rng.uniform(0, 6.3, n)), 1, n)
    W = rng.standard_normal((ch.n_tx, ch.n_users)) + 1j * rng.standard_normal((ch.n_tx, ch.n_users))
    return cfg, Precoder(W / np.linalg.norm(W), 1.0)


def test_sinr_no_interference():
    ch = random_channel_set(4, 2, 3, seed=0, sigma2=0.2)
    cfg, prec = rand_point(ch, 0)
    W = np.zeros_like(prec.W)
    W[:, 1] = prec.W[:, 1]
    p = Precoder(W, 1.0)
    g = cascade_gain(cfg.v, ch.H_bar[1], W[:, 1])
    assert sinr_u(cfg, p, ch, 1) == pytest.approx(abs(g) ** 2 / 0.2)
    assert sinr_u(cfg, p, ch, 0) == 0.0


def test_sinr_term_by_term():
    ch = random_channel_set(5, 3, 3, seed=2, sigma2=0.1)
    cfg, prec = rand_point(ch, 2)
    for u in range(3):
        g = [abs(cascade_gain(cfg.v, ch.H_bar[u], prec.W[:, j])) ** 2 for j in range(3)]
        ref = g[u] / (sum(g) - g[u] + 0.1)
        assert sinr_u(cfg, prec, ch, u) == pytest.approx(ref, rel=1e-12)


def test_rate_examples():
    ch = random_channel_set(3, 2, 2, seed=1)
    cfg = RisConfig(np.ones(4), 1, 3)
    assert sum_rate(cfg, Precoder(np.zeros((2, 2)), 1.0), ch) == 0.0
    # scalar single user with |g|^2 = sigma^2 -> SINR 1 -> 1 bit/s/Hz
    sc = ChannelSet(np.zeros((1, 1)), [[1.0]], [[0.0]], 0.25)
    assert rate_u(RisConfig([0, 1], 1, 1), Precoder([[0.5]], 1.0), sc, 0) == pytest.approx(1.0)


def test_absorbing_loses_rate_when_ris_dominates():
    ch = random_channel_set(16, 2, 1, seed=4, sigma2=0.1, ris_scale=10.0)
    hd = 0.01 * ch.h_direct
    ch = ChannelSet(ch.G, hd, ch.h_ris, ch.sigma2)
    reflect = RisConfig(np.ones(17), 1, 16)
    absorb = RisConfig(np.r_[np.zeros(16), 1.0], 1, 16)
    prec = Precoder(mrt_precoder(ch, reflect, [0], 1.0), 1.0)
    assert sum_rate(absorb, prec, ch) < sum_rate(reflect, prec, ch)


def test_rx_power_examples():
    sc = ChannelSet(np.zeros((1, 1)), [[1.0]], [[0.0]], 0.0)
    cfg = RisConfig([0, 1], 1, 1)
    assert rx_power_dbm(cfg, Precoder([[1.0]], 1.0), sc, 0) == pytest.approx(0.0, abs=1e-12)
    assert rx_power_dbm(cfg, Precoder([[0.0]], 1.0), sc, 0) == NO_SIGNAL_DBM
    ch = random_channel_set(4, 2, 2, seed=3)
    c, p = rand_point(ch, 3)
    p2 = Precoder(np.sqrt(2) * p.W, 2.0)
    assert rx_power_dbm(c, p2, ch, 0) - rx_power_dbm(c, p, ch, 0) == pytest.approx(10 * math.log10(2), abs=1e-9)


@given(st.integers(0, 5000), st.floats(0, 2 * np.pi))
def test_common_phase_on_w_leaves_sinr(seed, beta):
    ch = random_channel_set(4, 2, 3, seed=seed)
    cfg, prec = rand_point(ch, seed)
    rot = Precoder(prec.W * np.exp(1j * beta), 1.0)
    for u in range(3):
        assert sinr_u(cfg, rot, ch, u) == pytest.approx(sinr_u(cfg, prec, ch, u), rel=1e-9)


@given(st.integers(0, 5000))
def test_rate_is_log_of_sinr_and_additive(seed):
    ch = random_channel_set(3, 2, 3, seed=seed)
    cfg, prec = rand_point(ch, seed)
    rates = [rate_u(cfg, prec, ch, u) for u in range(3)]
    assert all(s >= 0 for s in (sinr_u(cfg, prec, ch, u) for u in range(3)))
    assert rates == [math.log2(1 + sinr_u(cfg, prec, ch, u)) for u in range(3)]
    assert sum_rate(cfg, prec, ch) == pytest.approx(sum(rates), rel=1e-15)


def test_single_user_mse_sinr_consistency():
    ch = ChannelSet(np.array([[0.3 + 0.1j]]), [[0.7 - 0.2j]], [[1.1j]], 0.05)
    cfg = RisConfig([0.8j, 1], 1, 1)
    prec = Precoder([[0.9]], 1.0)
    g = cascade_gain(cfg.v, ch.H_bar[0], prec.W[:, 0])
    assert mse_u(cfg, prec, ch, 0) == pytest.approx(abs(g - 1) ** 2 + 0.05)
    assert sinr_u(cfg, prec, ch, 0) == pytest.approx(abs(g) ** 2 / 0.05)


def test_link_report_csv():
    ch = random_channel_set(4, 2, 2, seed=5)
    cfg, prec = rand_point(ch, 5)
    rep = link_report(cfg, prec, ch, ["a", "b"], ["protected", "served"])
    lines = rep.to_csv().splitlines()
    assert lines[0] == "user,zone,sinr_linear,rate_bps_hz,mse,rx_power_dbm"
    assert lines[1].startswith("a,protected,")
    assert rep.sum_rate == pytest.approx(sum_rate(cfg, prec, ch))
