"""Compiled inner loop for the closed-loop integrator.

Numerically mirrors ``ClosedLoop.rate`` plus the guarded (bisecting) stepper
in :mod:`edgeform.engine`, which remains the reference implementation. The
funnel gain makes the loop stiff near the envelope boundary and as the
envelope shrinks, so macro steps subdivide heavily; a compiled kernel keeps
the per-substep cost low enough for long horizons. Configurations outside the
kernel's coverage (plant order != 2) fall back to the pure-numpy path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f
        return wrap if not (args and callable(args[0])) else args[0]

# function-family tags (match funnel.FunctionFamily ordering)
_RATIONAL = 0
_TANGENT = 1

# step outcome codes
_OK = 0
_SUBDIVIDE = 1
_VIOLATION = 2


@dataclass(frozen=True)
class KernelParams:
    """Immutable per-scenario arrays consumed by the compiled stepper."""

    Et: np.ndarray          # (m, N) transposed incidence
    B: np.ndarray           # (N, m) feedback incidence (in-incidence if directed)
    offs: np.ndarray        # (m, d) desired edge offsets
    dlo: np.ndarray         # (m, d) lower funnel margins
    dhi: np.ndarray         # (m, d) upper funnel margins
    bdiff: np.ndarray       # (m, d) beta0 - betaf
    bf: np.ndarray          # (m, d) betaf
    lam: np.ndarray         # (m, d) envelope decay rates
    family: int
    c1: float
    c2: float
    gamma: np.ndarray       # (N,)
    theta: np.ndarray       # (N, d) true friction parameters (zeros if none)
    k_slow: float
    k_fast: float
    has_estimator: bool
    lam_struct: float       # lam_max of E^T E, for the stiffness estimate
    num_agents: int
    num_axes: int


@njit(cache=True)
def _eval_rate(t, y, ydot, Et, B, offs, dlo, dhi, bdiff, bf, lam,
               family, c1, c2, gamma, theta, k_slow, k_fast):
    """Closed-loop rate into ydot; returns (code, edge, axis, zeta, w_max).

    y is [x1.ravel, x2.ravel, theta_hat.ravel] with blocks shaped (N, d).
    """
    N = B.shape[0]
    d = offs.shape[1]
    nd = N * d
    x1 = y[:nd].reshape(N, d)
    x2 = y[nd:2 * nd].reshape(N, d)
    th = y[2 * nd:].reshape(N, d)

    e = Et @ x1 - offs
    decay = bdiff * np.exp(-lam * t)
    beta = decay + bf
    beta_dot = -lam * decay
    if family == _RATIONAL:
        eta = e / np.sqrt(1.0 + e * e)
        xi = (1.0 + e * e) ** -1.5
    else:
        eta = np.arctan(e)
        xi = 1.0 / (1.0 + e * e)
    zeta = eta / beta

    # funnel check; also track the channel closest to its boundary so the
    # caller can attribute depth-exhaustion (boundary lockup) to a channel
    m = e.shape[0]
    worst = -1.0
    wk, wa = 0, 0
    for k in range(m):
        for a in range(d):
            # written so NaN (overflowed state) also counts as a violation
            if not (-dlo[k, a] < zeta[k, a] < dhi[k, a]):
                return _VIOLATION, k, a, zeta[k, a], 0.0
            ratio = max(zeta[k, a] / dhi[k, a], -zeta[k, a] / dlo[k, a])
            if ratio > worst:
                worst = ratio
                wk, wa = k, a

    av = dlo + zeta
    bv = dhi - zeta
    ab = av * bv
    s = zeta / ab
    den = ab * ab
    mu = (dlo * dhi + zeta * zeta) / den
    J = mu / beta
    W = J * xi
    w_max = W.max()

    phi = np.tanh(k_slow * x2) - np.tanh(k_fast * x2)
    a1 = -c1 * (B @ (W * s))
    z2 = x2 - a1
    e_dot = Et @ x2
    inner = xi * e_dot - beta_dot * zeta
    zeta_dot = inner / beta
    num = mu * den
    dden = 2.0 * ab * (bv - av)
    mu_dot = (2.0 * zeta * den - num * dden) / (den * den) * zeta_dot
    J_dot = (mu_dot - J * beta_dot) / beta
    if family == _RATIONAL:
        xi_dot = -3.0 * e * e_dot * (1.0 + e * e) ** -2.5
    else:
        xi_dot = -2.0 * e * e_dot / (1.0 + e * e) ** 2
    W_dot = J_dot * xi + J * xi_dot
    s_dot = J * inner
    a1_dot = -c1 * (B @ (W_dot * s + W * s_dot))
    u = -c2 * z2 + a1_dot - phi * th

    ydot[:nd] = x2.ravel()
    ydot[nd:2 * nd] = (u + phi * theta).ravel()
    thdot = ydot[2 * nd:].reshape(N, d)
    for i in range(N):
        for a in range(d):
            thdot[i, a] = gamma[i] * phi[i, a] * z2[i, a]
    return _OK, wk, wa, zeta[wk, wa], w_max


@njit(cache=True)
def _try_step(t, y, dt, gate, Et, B, offs, dlo, dhi, bdiff, bf, lam,
              family, c1, c2, gamma, theta, k_slow, k_fast,
              lam_struct, cfl):
    """One RK4 attempt; returns (code, edge, axis, zeta, t_bad) and may
    leave y unchanged on non-OK codes."""
    n = y.size
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)

    code, ek, ea, ez, w_max = _eval_rate(t, y, k1, Et, B, offs, dlo, dhi,
                                         bdiff, bf, lam, family, c1, c2,
                                         gamma, theta, k_slow, k_fast)
    if code != _OK:
        return _VIOLATION, ek, ea, ez, t
    if gate and (c1 * lam_struct * w_max * w_max + c2) * dt > cfl:
        return _SUBDIVIDE, ek, ea, ez, t

    half = 0.5 * dt
    code, ek, ea, ez, w_max = _eval_rate(t + half, y + half * k1, k2, Et, B,
                                         offs, dlo, dhi, bdiff, bf, lam,
                                         family, c1, c2, gamma, theta,
                                         k_slow, k_fast)
    if code != _OK:
        return _VIOLATION, ek, ea, ez, t + half
    code, ek, ea, ez, w_max = _eval_rate(t + half, y + half * k2, k3, Et, B,
                                         offs, dlo, dhi, bdiff, bf, lam,
                                         family, c1, c2, gamma, theta,
                                         k_slow, k_fast)
    if code != _OK:
        return _VIOLATION, ek, ea, ez, t + half
    code, ek, ea, ez, w_max = _eval_rate(t + dt, y + dt * k3, k4, Et, B,
                                         offs, dlo, dhi, bdiff, bf, lam,
                                         family, c1, c2, gamma, theta,
                                         k_slow, k_fast)
    if code != _OK:
        return _VIOLATION, ek, ea, ez, t + dt
    y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return _OK, -1, -1, 0.0, t


@njit(cache=True)
def _advance(y, t0, num_steps, dt, max_depth, cfl, Et, B, offs, dlo, dhi,
             bdiff, bf, lam, family, c1, c2, gamma, theta, k_slow, k_fast,
             lam_struct):
    """Advance num_steps macro steps with bisection through stiff windows.

    Mirrors engine.guarded_step: a step subdivides while the stiffness
    estimate times the step exceeds the CFL-style limit or a stage trips the
    funnel check; a trip persisting at max_depth is a genuine violation,
    and so is a segment still too stiff at max_depth (boundary lockup).
    Returns (code, edge, axis, zeta, t) with code 0 on success.
    """
    cap = max_depth + 2
    seg_t = np.empty(cap)
    seg_dt = np.empty(cap)
    seg_depth = np.empty(cap, np.int64)
    for step in range(num_steps):
        t = t0 + step * dt
        sp = 0
        seg_t[sp] = t
        seg_dt[sp] = dt
        seg_depth[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            tt = seg_t[sp]
            hh = seg_dt[sp]
            dd = seg_depth[sp]
            code, ek, ea, ez, tb = _try_step(tt, y, hh, True, Et, B, offs,
                                             dlo, dhi, bdiff, bf, lam,
                                             family, c1, c2, gamma, theta,
                                             k_slow, k_fast, lam_struct, cfl)
            if code == _OK:
                continue
            if dd >= max_depth:
                # either a persisting funnel trip or a step so stiff that
                # the state is pinned against its boundary; report the
                # nearest channel either way
                return _VIOLATION, ek, ea, ez, tb
            # push right half then left half so the left runs first
            half = 0.5 * hh
            seg_t[sp] = tt + half
            seg_dt[sp] = half
            seg_depth[sp] = dd + 1
            sp += 1
            seg_t[sp] = tt
            seg_dt[sp] = half
            seg_depth[sp] = dd + 1
            sp += 1
    return _OK, -1, -1, 0.0, t0 + num_steps * dt


def kernel_params(loop) -> KernelParams | None:
    """Build kernel arrays from a ClosedLoop, or None when not covered."""
    if not HAVE_NUMBA or loop.n != 2 or loop.nu > 1:
        return None
    cfg = loop.cfg
    f = loop.funnel
    family = _RATIONAL if f.family.value == "rational" else _TANGENT
    if cfg.friction.kind == "tanh_pair":
        k_slow, k_fast = cfg.friction.coeffs
        theta = np.ascontiguousarray(cfg.theta[:, 0, :], dtype=float)
    else:
        k_slow = k_fast = 0.0
        theta = np.zeros((loop.N, loop.d))
    return KernelParams(
        Et=np.ascontiguousarray(loop.inc.E.T),
        B=np.ascontiguousarray(loop._B),
        offs=np.ascontiguousarray(cfg.target.offsets),
        dlo=f.dlo, dhi=f.dhi,
        bdiff=f.beta0 - f.betaf, bf=f.betaf, lam=f.lam,
        family=family,
        c1=float(cfg.gains.c[0]), c2=float(cfg.gains.c[1]),
        gamma=np.asarray(cfg.gains.gamma, dtype=float),
        theta=theta, k_slow=float(k_slow), k_fast=float(k_fast),
        has_estimator=loop.nu == 1,
        lam_struct=loop._lam_struct,
        num_agents=loop.N, num_axes=loop.d,
    )


def advance(p: KernelParams, loop, y: np.ndarray, t0: float, num_steps: int,
            dt: float, max_depth: int, cfl: float) -> np.ndarray:
    """Advance the engine-layout state y by num_steps macro steps.

    Raises the same FunnelViolation as the numpy path on a genuine violation.
    """
    from .funnel import FunnelViolation

    x, theta_hat = loop.unpack(y)
    N, d = p.num_agents, p.num_axes
    yk = np.empty(3 * N * d)
    yk[:N * d] = x[:, 0].ravel()
    yk[N * d:2 * N * d] = x[:, 1].ravel()
    if p.has_estimator:
        yk[2 * N * d:] = theta_hat[:, 0, :].ravel()
    else:
        yk[2 * N * d:] = 0.0

    code, ek, ea, ez, tb = _advance(yk, t0, num_steps, dt, max_depth, cfl,
                                    p.Et, p.B, p.offs, p.dlo, p.dhi, p.bdiff,
                                    p.bf, p.lam, p.family, p.c1, p.c2,
                                    p.gamma, p.theta, p.k_slow, p.k_fast,
                                    p.lam_struct)
    if code != _OK:
        raise FunnelViolation(float(ez), float(p.dlo[ek, ea]),
                              float(p.dhi[ek, ea]), edge=int(ek), axis=int(ea),
                              t=float(tb))
    x_new = np.empty_like(x)
    x_new[:, 0] = yk[:N * d].reshape(N, d)
    x_new[:, 1] = yk[N * d:2 * N * d].reshape(N, d)
    th_new = theta_hat.copy()
    if p.has_estimator:
        th_new[:, 0, :] = yk[2 * N * d:].reshape(N, d)
    return loop.pack(x_new, th_new)
