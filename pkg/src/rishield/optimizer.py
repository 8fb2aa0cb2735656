"""SMSE machinery and the shielding solver.

The solver maximizes the sum-MSE of the protected receivers

    f(v, W) = sum_{u in S} sum_j |v^H Hb_u w_j|^2 - 2 sum_{u in S} Re{v^H Hb_u w_u}

over |v_i| <= 1, v_{N+1} = 1 and ||W||_F^2 <= P.  f is a convex quadratic in
each block, so projected ascent is monotone for any step and the optimum sits
on the boundary; restarts cover the non-concavity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, LINK_DIRECT, complex_gaussian
from .kernels import shield as K
from .ris import BitMask, RisConfig, v_from_bits

log = logging.getLogger(__name__)

# seed of the W-only rule shared by the brute-force oracle and the binary restarts
W_RULE_SEED = 0
BINARY_SEED_MAX_N = 12
BRUTE_FORCE_MAX_N = 20
FEAS_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class Precoder:
    W: np.ndarray
    P: float

    def __post_init__(self):
        if not self.P > 0:
            raise ValueError("power budget P must be positive")
        W = np.array(self.W, dtype=complex)
        if W.ndim != 2:
            raise ValueError("W must be a Sigma x U matrix")
        if np.sum(np.abs(W) ** 2) > self.P + FEAS_SLACK * max(1.0, self.P):
            raise ValueError("precoder exceeds the power budget")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def power(self):
        return float(np.sum(np.abs(self.W) ** 2))


@dataclass(frozen=True)
class SolverOptions:
    restarts: int = 32
    max_iters: int = 500
    step_init: float = 0.1
    tol: float = 1e-8
    seed: int = 0
    include_binary_seeds: bool = True
    fixed_precoder: bool = False  # extension: MRT toward served users, optimize v only

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.step_init > 0:
            raise ValueError("step_init must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class ShieldSolution:
    cfg: RisConfig
    precoder: Precoder
    objective: float
    trace: list
    restarts_used: int
    restart_index: int = 0
    iterations: int = 0
    converged: bool = True
    restart_objectives: list = field(default_factory=list)


# -- SMSE ------------------------------------------------------------------

def _gains(cfg, precoder, channels, u):
    """Row vector of cascade gains v^H Hb_u w_j over all streams j."""
    return cfg.v.conj() @ channels.H_bar[u] @ precoder.W


def _selection(channels, protected_set):
    idx = sorted(set(int(u) for u in protected_set))
    if not idx:
        raise ValueError("protected set must not be empty")
    if idx[0] < 0 or idx[-1] >= channels.n_users:
        raise ValueError("protected index out of range")
    sel = np.zeros(channels.n_users, dtype=bool)
    sel[idx] = True
    return sel


def mse_u(cfg: RisConfig, precoder: Precoder, channels: ChannelSet, u: int) -> float:
    a = _gains(cfg, precoder, channels, u)
    return float(np.sum(np.abs(a) ** 2) - 2.0 * a[u].real + 1.0 + channels.sigma2)


def smse(cfg, precoder, channels, protected_set) -> float:
    sel = _selection(channels, protected_set)
    return float(sum(mse_u(cfg, precoder, channels, u) for u in np.flatnonzero(sel)))


def shield_objective(cfg, precoder, channels, protected_set) -> float:
    sel = _selection(channels, protected_set)
    return K.objective(channels.H_bar, sel, cfg.v, np.ascontiguousarray(precoder.W))


def shield_gradients(cfg, precoder, channels, protected_set):
    """(grad_v, grad_W) as d/dRe + 1j d/dIm; grad_v's pinned entry is 0."""
    sel = _selection(channels, protected_set)
    W = np.ascontiguousarray(precoder.W)
    return (K.grad_v(channels.H_bar, sel, cfg.v, W),
            K.grad_w(channels.H_bar, sel, cfg.v, W))


def project_feasible(cfg: RisConfig | np.ndarray, precoder, P):
    """Project (v, W) onto the feasible set; idempotent.

    Accepts either validated objects or raw arrays (``cfg`` may be an array
    of length N+1, ``precoder`` a raw W), returning the same kinds.
    """
    if isinstance(cfg, RisConfig):
        v = K.project_v_np(cfg.v.copy())
        cfg_out = RisConfig(v, cfg.rows, cfg.cols)
    else:
        cfg_out = K.project_v_np(np.asarray(cfg, dtype=complex))
    W_in = precoder.W if isinstance(precoder, Precoder) else np.asarray(precoder, dtype=complex)
    W = K.project_w_np(W_in, P)
    return cfg_out, (Precoder(W, P) if isinstance(precoder, Precoder) else W)


def feasibility_residuals(cfg, precoder):
    """(max(|v_i|) - 1, |v_{N+1} - 1|, ||W||_F^2 - P), each clipped at 0."""
    amp = float(np.max(np.abs(cfg.elements), initial=0.0)) - 1.0
    pin = abs(cfg.v[-1] - 1.0)
    pw = precoder.power - precoder.P
    return max(amp, 0.0), float(pin), max(pw, 0.0)


# -- precoder rules ------------------------------------------------------------

def random_precoder_init(n_tx, n_users, P, seed):
    W = complex_gaussian((n_tx, n_users), seed, link=LINK_DIRECT + 100, index=0)
    return W * (np.sqrt(P) / np.linalg.norm(W))


def mrt_precoder(channels, cfg, served, P):
    """Matched filter toward each served user; protected columns stay zero."""
    W = np.zeros((channels.n_tx, channels.n_users), dtype=complex)
    for u in served:
        W[:, u] = (cfg.v.conj() @ channels.H_bar[u]).conj()
    nrm = np.linalg.norm(W)
    if nrm > 0:
        W *= np.sqrt(P) / nrm
    return W


def _trace_buffer(max_iters):
    return np.zeros(max_iters + 1)


def ascend_w_only(channels, sel, v, P, max_iters=500, step_init=0.1, tol=1e-8, W0=None):
    """The default W rule: projected ascent in W alone from a fixed-seed start."""
    if W0 is None:
        W0 = random_precoder_init(channels.n_tx, channels.n_users, P, W_RULE_SEED)
    trace = _trace_buffer(max_iters)
    _, W, f, rounds, code = K.ascend(channels.H_bar, sel, np.asarray(v, dtype=complex), W0, float(P),
                                     False, True, step_init, tol, max_iters, trace)
    return W, f, trace[:rounds + 1], rounds, code


def brute_force_1bit(channels, protected_set, P, W_rule=None, rows=None, cols=None,
                     max_iters=500, step_init=0.1, tol=1e-8):
    """Exhaustive search over all 2^N reflect/absorb masks.

    ``W_rule(v) -> W`` chooses the precoder for a mask; the default runs the
    W-only projected ascent.  Ties go to the lowest mask code (element 1 is
    the most significant bit).  Returns (mask, Precoder, objective).
    """
    n = channels.n_ris
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to N <= {BRUTE_FORCE_MAX_N}, got {n}")
    rows, cols = (1, n) if rows is None else (rows, cols)
    sel = _selection(channels, protected_set)
    best = (-np.inf, None, None)
    for code in range(2 ** n):
        mask = BitMask.from_int(code, rows, cols)
        v = v_from_bits(mask).v
        if W_rule is None:
            W, f, *_ = ascend_w_only(channels, sel, v, P, max_iters, step_init, tol)
        else:
            W = K.project_w_np(np.asarray(W_rule(v), dtype=complex), P)
            f = K.objective(channels.H_bar, sel, v, W)
        if f > best[0]:
            best = (f, mask, W)
    f, mask, W = best
    return mask, Precoder(W, P), float(f)


def solve_shield(channels: ChannelSet, protected_set, P, opts=SolverOptions(), rows=None, cols=None):
    """Multi-start alternating projected ascent for the shielding problem.

    Restart pool: ``opts.restarts`` random unit-modulus starts, then (when
    ``include_binary_seeds`` and N <= 12) every 1-bit mask paired with the
    precoder the brute-force W rule picks for it.  Ascent is monotone from
    those seeds, so the result is never worse than the best 1-bit mask.
    """
    if not P > 0:
        raise ValueError("P must be positive")
    sel = _selection(channels, protected_set)
    n, n_tx, U = channels.n_ris, channels.n_tx, channels.n_users
    rows, cols = (1, n) if rows is None else (rows, cols)
    if rows * cols != n:
        raise ValueError("rows * cols must equal the number of RIS elements")
    Hb = channels.H_bar
    rng = np.random.default_rng(opts.seed)

    starts = []
    for _ in range(opts.restarts):
        phases = rng.uniform(0.0, 2.0 * np.pi, n)
        v0 = np.append(np.exp(1j * phases), 1.0)
        if opts.fixed_precoder:
            W0 = None
        else:
            W0 = rng.standard_normal((n_tx, U)) + 1j * rng.standard_normal((n_tx, U))
            W0 *= np.sqrt(P) / np.linalg.norm(W0)
        starts.append((v0, W0, False))
    if opts.include_binary_seeds and n <= BINARY_SEED_MAX_N and not opts.fixed_precoder:
        for code in range(2 ** n):
            starts.append((v_from_bits(BitMask.from_int(code, rows, cols)).v.copy(), None, True))

    served = [u for u in range(U) if not sel[u]]
    best = None
    objectives = []
    for idx, (v0, W0, binary) in enumerate(starts):
        trace = _trace_buffer(opts.max_iters)
        prefix = []
        if opts.fixed_precoder:
            cfg0 = RisConfig(v0, rows, cols)
            W0 = mrt_precoder(channels, cfg0, served, P)
        elif binary:
            W0, _, wtrace, _, _ = ascend_w_only(channels, sel, v0, P, opts.max_iters, opts.step_init, opts.tol)
            prefix = list(wtrace)
        v, W, f, rounds, code = K.ascend(Hb, sel, v0, W0, float(P), True, not opts.fixed_precoder,
                                         opts.step_init, opts.tol, opts.max_iters, trace)
        objectives.append(f)
        if best is None or f > best[0]:
            best = (f, idx, v, W, prefix + list(trace[:rounds + 1]), rounds, code)
    f, idx, v, W, trace, rounds, code = best
    if code != K.CONVERGED:
        log.warning("best restart %d hit max_iters=%d before converging", idx, opts.max_iters)
    cfg = RisConfig(v, rows, cols)
    precoder = Precoder(W, P)
    return ShieldSolution(
        cfg=cfg,
        precoder=precoder,
        objective=float(f),
        trace=[float(x) for x in trace],
        restarts_used=len(starts),
        restart_index=idx,
        iterations=rounds,
        converged=code == K.CONVERGED,
        restart_objectives=[float(x) for x in objectives],
    )


def format_report(sol: ShieldSolution, extra=None):
    """key = value report; masks are embedded in the BitMask text format."""
    from .ris import quantize_1bit

    amp, pin, pw = feasibility_residuals(sol.cfg, sol.precoder)
    lines = [
        f"objective = {sol.objective:.12e}",
        f"iterations = {sol.iterations}",
        f"converged = {str(sol.converged).lower()}",
        f"restart_index = {sol.restart_index}",
        f"restarts_used = {sol.restarts_used}",
        f"residual_amplitude = {amp:.3e}",
        f"residual_pin = {pin:.3e}",
        f"residual_power = {pw:.3e}",
        f"power_used = {sol.precoder.power:.12e}",
        f"power_budget = {sol.precoder.P:.12e}",
    ]
    for key, val in (extra or {}).items():
        lines.append(f"{key} = {val}")
    lines.append("[mask]")
    lines.append(quantize_1bit(sol.cfg).to_text().rstrip("\n"))
    return "\n".join(lines) + "\n"
