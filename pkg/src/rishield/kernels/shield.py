"""Objective, gradients and projected ascent for the SMSE-maximization problem.

Layout: ``Hb`` is (U, N+1, S) complex, ``sel`` a (U,) bool mask of protected
receivers, ``v`` (N+1,) with v[N] = 1, ``W`` (S, U).  Gradients are returned as
``d f / d Re + 1j * d f / d Im``; the v-gradient's pinned entry is zeroed.
"""

import numpy as np

from .._accel import USE_NUMBA, njit

# result codes of the ascent driver
CONVERGED = 0
MAX_ITERS = 1


# -- numpy reference path -----------------------------------------------------

def objective_np(Hb, sel, v, W):
    A = np.einsum("n,unk,kj->uj", v.conj(), Hb, W)[sel]
    diag = np.einsum("n,unk,ku->u", v.conj(), Hb, W)[sel]
    return float(np.sum(np.abs(A) ** 2) - 2.0 * np.sum(diag.real))


def grad_v_np(Hb, sel, v, W):
    C = np.einsum("unk,kj->unj", Hb[sel], W)  # (|S|, N+1, U)
    A = np.einsum("n,unj->uj", v.conj(), C)
    idx = np.flatnonzero(sel)
    g = 2.0 * (np.einsum("unj,uj->n", C, A.conj()) - C[np.arange(idx.size), :, idx].sum(axis=0))
    g[-1] = 0.0
    return g


def grad_w_np(Hb, sel, v, W):
    B = np.einsum("unk,n->ku", Hb.conj(), v)  # columns b_u = Hb[u]^H v
    A = B.conj().T @ W  # a_uj = b_u^H w_j
    g = 2.0 * (B[:, sel] @ A[sel])
    g[:, sel] -= 2.0 * B[:, sel]
    return g


# -- numba path -----------------------------------------------------------------

@njit(cache=True)
def _cascade_nb(Hb, v, W):
    U, N1, S = Hb.shape
    A = np.zeros((U, W.shape[1]), dtype=np.complex128)
    for u in range(U):
        for j in range(W.shape[1]):
            acc = 0j
            for n in range(N1):
                vn = v[n].conjugate()
                if vn == 0:
                    continue
                row = 0j
                for k in range(S):
                    row += Hb[u, n, k] * W[k, j]
                acc += vn * row
            A[u, j] = acc
    return A


@njit(cache=True)
def objective_nb(Hb, sel, v, W):
    A = _cascade_nb(Hb, v, W)
    f = 0.0
    for u in range(A.shape[0]):
        if not sel[u]:
            continue
        for j in range(A.shape[1]):
            f += A[u, j].real ** 2 + A[u, j].imag ** 2
        f -= 2.0 * A[u, u].real
    return f


@njit(cache=True)
def grad_v_nb(Hb, sel, v, W):
    U, N1, S = Hb.shape
    g = np.zeros(N1, dtype=np.complex128)
    C = np.zeros((N1, W.shape[1]), dtype=np.complex128)
    for u in range(U):
        if not sel[u]:
            continue
        for n in range(N1):
            for j in range(W.shape[1]):
                acc = 0j
                for k in range(S):
                    acc += Hb[u, n, k] * W[k, j]
                C[n, j] = acc
        for j in range(W.shape[1]):
            a = 0j
            for n in range(N1):
                a += v[n].conjugate() * C[n, j]
            ac = a.conjugate()
            for n in range(N1):
                g[n] += 2.0 * ac * C[n, j]
        for n in range(N1):
            g[n] -= 2.0 * C[n, u]
    g[N1 - 1] = 0.0
    return g


@njit(cache=True)
def grad_w_nb(Hb, sel, v, W):
    U, N1, S = Hb.shape
    B = np.zeros((S, U), dtype=np.complex128)
    for u in range(U):
        for k in range(S):
            acc = 0j
            for n in range(N1):
                acc += Hb[u, n, k].conjugate() * v[n]
            B[k, u] = acc
    g = np.zeros(W.shape, dtype=np.complex128)
    for u in range(U):
        if not sel[u]:
            continue
        for j in range(W.shape[1]):
            a = 0j
            for k in range(S):
                a += B[k, u].conjugate() * W[k, j]
            for k in range(S):
                g[k, j] += 2.0 * a * B[k, u]
        for k in range(S):
            g[k, u] -= 2.0 * B[k, u]
    return g


# -- shared ascent driver ----------------------------------------------------

def project_v_np(v):
    """Clip the element amplitudes to the unit disk and pin the last entry."""
    out = v.copy()
    out[:-1] = out[:-1] / np.maximum(1.0, np.abs(out[:-1]))
    out[-1] = 1.0
    return out


def project_w_np(W, P):
    nrm = np.linalg.norm(W)
    if nrm > np.sqrt(P):
        return W * (np.sqrt(P) / nrm)
    return W.copy()


@njit(cache=True)
def project_v_nb(v):
    out = v.copy()
    for i in range(out.shape[0] - 1):
        m = abs(out[i])
        if m > 1.0:
            out[i] = out[i] / m
    out[out.shape[0] - 1] = 1.0
    return out


@njit(cache=True)
def project_w_nb(W, P):
    nrm = np.sqrt(np.sum(W.real ** 2 + W.imag ** 2))
    if nrm > np.sqrt(P):
        return W * (np.sqrt(P) / nrm)
    return W.copy()


def _make_ascend(objective, grad_v, grad_w, project_v, project_w):
    def ascend(Hb, sel, v0, W0, P, opt_v, opt_w, step_init, tol, max_iters, trace):
        """Alternating projected ascent with backtracking.

        Steps are normalized: the v-step moves each element by at most ``t``
        and the W-step moves W by ``t * sqrt(P)`` in Frobenius norm, so the
        iteration does not depend on the channel scale.  Writes the objective
        after every round into ``trace`` (length max_iters + 1) and returns
        (v, W, f, rounds, code).
        """
        v = project_v(v0)
        W = project_w(W0, P)
        f = objective(Hb, sel, v, W)
        trace[0] = f
        tv = step_init
        tw = step_init
        t_max = step_init * 1e6
        rounds = 0
        code = MAX_ITERS
        for it in range(max_iters):
            f_old = f
            if opt_v:
                g = grad_v(Hb, sel, v, W)
                gmax = np.max(np.abs(g))
                if gmax > 0.0:
                    d = g / gmax
                    t = tv
                    for _ in range(60):
                        cand = project_v(v + t * d)
                        fc = objective(Hb, sel, cand, W)
                        if fc >= f:
                            v = cand
                            f = fc
                            tv = min(2.0 * t, t_max)
                            break
                        t *= 0.5
            if opt_w:
                g = grad_w(Hb, sel, v, W)
                gn = np.sqrt(np.sum(g.real ** 2 + g.imag ** 2))
                if gn > 0.0:
                    d = g * (np.sqrt(P) / gn)
                    t = tw
                    for _ in range(60):
                        cand = project_w(W + t * d, P)
                        fc = objective(Hb, sel, v, cand)
                        if fc >= f:
                            W = cand
                            f = fc
                            tw = min(2.0 * t, t_max)
                            break
                        t *= 0.5
            rounds = it + 1
            trace[rounds] = f
            if f - f_old < tol:
                code = CONVERGED
                break
        return v, W, f, rounds, code

    return ascend


ascend_np = _make_ascend(objective_np, grad_v_np, grad_w_np, project_v_np, project_w_np)
ascend_nb = njit(cache=False)(
    _make_ascend(objective_nb, grad_v_nb, grad_w_nb, project_v_nb, project_w_nb))

if USE_NUMBA:
    objective, grad_v, grad_w, ascend = objective_nb, grad_v_nb, grad_w_nb, ascend_nb
else:
    objective, grad_v, grad_w, ascend = objective_np, grad_v_np, grad_w_np, ascend_np
