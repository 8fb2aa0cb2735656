"""Per-cell image-method accumulation.

Inputs shared by both paths:

* ``tx`` (2,) source point, ``pts`` (C, 2) receiver points
* ``seq`` (S, K) surface indices per reflection sequence, padded with -1,
  ``seqlen`` (S,), ``imgs`` (S, K, 2) successive source images
* ``segs`` (M, 4) surfaces as x1, y1, x2, y2; ``trans_db`` / ``refl_db`` (M,)

Returns the non-coherent power sum (mW) and the coherent phasor sum
(sqrt(mW)) per point.
"""

import numpy as np

from .._accel import USE_NUMBA, njit, prange

T_EPS = 1e-9
PAR_EPS = 1e-12


@njit(cache=True)
def _leg_loss_nb(ax, ay, bx, by, segs, trans_db, skip_a, skip_b):
    loss = 0.0
    rx_, ry_ = bx - ax, by - ay
    for w in range(segs.shape[0]):
        if w == skip_a or w == skip_b:
            continue
        cx, cy, dx, dy = segs[w, 0], segs[w, 1], segs[w, 2], segs[w, 3]
        qx, qy = dx - cx, dy - cy
        den = rx_ * qy - ry_ * qx
        if abs(den) < PAR_EPS:
            continue
        wx, wy = cx - ax, cy - ay
        t = (wx * qy - wy * qx) / den
        s = (wx * ry_ - wy * rx_) / den
        if T_EPS < t < 1.0 - T_EPS and 0.0 <= s < 1.0:
            loss += trans_db[w]
    return loss


@njit(parallel=True, cache=True)
def accumulate_nb(tx, pts, seq, seqlen, imgs, segs, trans_db, refl_db, wavelength, ptx_mw):
    C = pts.shape[0]
    S = seq.shape[0]
    K = seq.shape[1]
    power = np.zeros(C)
    phasor = np.zeros(C, dtype=np.complex128)
    kwave = 2.0 * np.pi / wavelength
    for c in prange(C):
        px, py = pts[c, 0], pts[c, 1]
        p_acc = 0.0
        a_acc = 0j
        # direct path
        L = np.hypot(px - tx[0], py - tx[1])
        loss = _leg_loss_nb(tx[0], tx[1], px, py, segs, trans_db, -1, -1)
        loss += 20.0 * np.log10(4.0 * np.pi * max(L, 1.0) / wavelength)
        g = ptx_mw * 10.0 ** (-loss / 10.0)
        p_acc += g
        a_acc += np.sqrt(g) * np.exp(-1j * kwave * L)
        ptsx = np.empty(K + 2)
        ptsy = np.empty(K + 2)
        for s in range(S):
            k = seqlen[s]
            ok = True
            curx, cury = px, py
            ptsx[k + 1] = px
            ptsy[k + 1] = py
            for i in range(k - 1, -1, -1):
                w = seq[s, i]
                ix, iy = imgs[s, i, 0], imgs[s, i, 1]
                cx, cy, dx, dy = segs[w, 0], segs[w, 1], segs[w, 2], segs[w, 3]
                rx_, ry_ = curx - ix, cury - iy
                qx, qy = dx - cx, dy - cy
                den = rx_ * qy - ry_ * qx
                if abs(den) < PAR_EPS:
                    ok = False
                    break
                wx, wy = cx - ix, cy - iy
                t = (wx * qy - wy * qx) / den
                sp = (wx * ry_ - wy * rx_) / den
                if not (T_EPS < t < 1.0 - T_EPS and 0.0 <= sp < 1.0):
                    ok = False
                    break
                curx = ix + t * rx_
                cury = iy + t * ry_
                ptsx[i + 1] = curx
                ptsy[i + 1] = cury
            if not ok:
                continue
            ptsx[0] = tx[0]
            ptsy[0] = tx[1]
            L = np.hypot(px - imgs[s, k - 1, 0], py - imgs[s, k - 1, 1])
            loss = 20.0 * np.log10(4.0 * np.pi * max(L, 1.0) / wavelength)
            for i in range(k):
                loss += refl_db[seq[s, i]]
            for m in range(k + 1):
                skip_a = seq[s, m - 1] if m > 0 else -1
                skip_b = seq[s, m] if m < k else -1
                loss += _leg_loss_nb(ptsx[m], ptsy[m], ptsx[m + 1], ptsy[m + 1], segs, trans_db, skip_a, skip_b)
            g = ptx_mw * 10.0 ** (-loss / 10.0)
            p_acc += g
            a_acc += np.sqrt(g) * np.exp(-1j * kwave * L)
        power[c] = p_acc
        phasor[c] = a_acc
    return power, phasor


def _leg_loss_np(ax, ay, bx, by, segs, trans_db, skip_a, skip_b):
    """Vectorized over legs: ax..by are (C,) arrays."""
    loss = np.zeros(np.shape(ax))
    rx_, ry_ = bx - ax, by - ay
    for w in range(segs.shape[0]):
        if w == skip_a or w == skip_b:
            continue
        cx, cy, dx, dy = segs[w]
        qx, qy = dx - cx, dy - cy
        den = rx_ * qy - ry_ * qx
        par = np.abs(den) < PAR_EPS
        den = np.where(par, 1.0, den)
        wx, wy = cx - ax, cy - ay
        t = (wx * qy - wy * qx) / den
        s = (wx * ry_ - wy * rx_) / den
        hit = ~par & (t > T_EPS) & (t < 1.0 - T_EPS) & (s >= 0.0) & (s < 1.0)
        loss += np.where(hit, trans_db[w], 0.0)
    return loss


def accumulate_np(tx, pts, seq, seqlen, imgs, segs, trans_db, refl_db, wavelength, ptx_mw):
    px, py = pts[:, 0], pts[:, 1]
    kwave = 2.0 * np.pi / wavelength

    def fspl(L):
        return 20.0 * np.log10(4.0 * np.pi * np.maximum(L, 1.0) / wavelength)

    L = np.hypot(px - tx[0], py - tx[1])
    loss = _leg_loss_np(np.full_like(px, tx[0]), np.full_like(py, tx[1]), px, py, segs, trans_db, -1, -1)
    g = ptx_mw * 10.0 ** (-(loss + fspl(L)) / 10.0)
    power = g.copy()
    phasor = np.sqrt(g) * np.exp(-1j * kwave * L)
    for s in range(seq.shape[0]):
        k = int(seqlen[s])
        ok = np.ones(px.shape, dtype=bool)
        xs = [None] * (k + 2)
        ys = [None] * (k + 2)
        xs[k + 1], ys[k + 1] = px, py
        curx, cury = px, py
        for i in range(k - 1, -1, -1):
            w = seq[s, i]
            ix, iy = imgs[s, i]
            cx, cy, dx, dy = segs[w]
            rx_, ry_ = curx - ix, cury - iy
            qx, qy = dx - cx, dy - cy
            den = rx_ * qy - ry_ * qx
            par = np.abs(den) < PAR_EPS
            den = np.where(par, 1.0, den)
            wx, wy = cx - ix, cy - iy
            t = (wx * qy - wy * qx) / den
            sp = (wx * ry_ - wy * rx_) / den
            ok &= ~par & (t > T_EPS) & (t < 1.0 - T_EPS) & (sp >= 0.0) & (sp < 1.0)
            curx = ix + t * rx_
            cury = iy + t * ry_
            xs[i + 1], ys[i + 1] = curx, cury
        if not ok.any():
            continue
        xs[0] = np.full_like(px, tx[0])
        ys[0] = np.full_like(py, tx[1])
        L = np.hypot(px - imgs[s, k - 1, 0], py - imgs[s, k - 1, 1])
        loss = fspl(L) + sum(refl_db[seq[s, i]] for i in range(k))
        for m in range(k + 1):
            skip_a = seq[s, m - 1] if m > 0 else -1
            skip_b = seq[s, m] if m < k else -1
            loss = loss + _leg_loss_np(xs[m], ys[m], xs[m + 1], ys[m + 1], segs, trans_db, skip_a, skip_b)
        g = np.where(ok, ptx_mw * 10.0 ** (-loss / 10.0), 0.0)
        power += g
        phasor += np.sqrt(g) * np.exp(-1j * kwave * L)
    return power, phasor


accumulate = accumulate_nb if USE_NUMBA else accumulate_np
