"""Brute-force reference solver for the epsilon-SVR dual.

Spectral projected gradient on the 2n-variable box dual (alpha, alpha* in
[0, C]^2n with the coupling sum(alpha - alpha*) = 0), run to a fixed-point
residual of 1e-10. Used only to cross-check the SMO solver; it shares no
code path with it. Deliberately dense and unoptimized: O(n^2) projections
via explicit breakpoint scans, suitable for n up to a few dozen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def project_dual(z: np.ndarray, C: float, n: int) -> np.ndarray:
    """Euclidean projection onto the box intersected with the hyperplane.

    The projection is clip(z - tau * a, 0, C) with a = [1..1, -1..-1]; the
    balance f(tau) = sum(alpha) - sum(alpha*) is piecewise linear and
    nonincreasing in tau, so the root comes from an exact breakpoint scan.
    """
    za, zs = z[:n], z[n:]
    bps = np.concatenate([za, za - C, -zs, C - zs])
    bps.sort()
    vals = (np.clip(za[None, :] - bps[:, None], 0, C).sum(axis=1)
            - np.clip(zs[None, :] + bps[:, None], 0, C).sum(axis=1))
    k = int(np.searchsorted(-vals, 0.0))  # first breakpoint with f <= 0
    if k == 0:
        tau = bps[0]
    elif k >= bps.size:
        tau = bps[-1]
    else:
        t0, t1, v0, v1 = bps[k - 1], bps[k], vals[k - 1], vals[k]
        tau = t0 if v0 == v1 else t0 + (t1 - t0) * v0 / (v0 - v1)
    out = np.empty_like(z)
    out[:n] = np.clip(za - tau, 0, C)
    out[n:] = np.clip(zs + tau, 0, C)
    return out


@dataclass(frozen=True)
class QpReferenceSolution:
    beta: np.ndarray
    bias: float
    iterations: int
    residual: float  # fixed-point residual at exit


def solve_svr_dual_reference(K: np.ndarray, y: np.ndarray, C: float,
                             epsilon: float, tol: float = 1e-10,
                             max_iters: int = 200_000) -> QpReferenceSolution:
    """Projected-gradient solve of the 2n-variable dual.

    Steps use a Barzilai-Borwein spectral length with an exact quadratic
    line search along the projected direction; iteration stops at the
    residual target, on a float-level stall, or at the iteration cap.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    z = np.zeros(2 * n)
    evmax = max(float(np.linalg.eigvalsh(K).max()), 1e-12)
    s_ref = 1.0 / (2.0 * evmax)

    def grad(zv):
        beta = zv[:n] - zv[n:]
        kb = K @ beta
        return np.concatenate([kb + epsilon - y, -kb + epsilon + y])

    lam = s_ref
    g = grad(z)
    best_resid = np.inf
    since_improved = 0
    resid = np.inf
    it = 0
    for it in range(max_iters):
        fp = project_dual(z - s_ref * g, C, n) - z
        resid = float(np.abs(fp).max())
        if resid <= tol:
            break
        if resid < best_resid * (1 - 1e-6):
            best_resid = resid
            since_improved = 0
        else:
            since_improved += 1
            if since_improved > 500:  # float-level stall above target
                break
        d = project_dual(z - lam * g, C, n) - z
        beta_d = d[:n] - d[n:]
        dHd = float(beta_d @ K @ beta_d)
        gd = float(g @ d)
        theta = 1.0 if dHd <= 0 else min(1.0, max(0.0, -gd / dHd))
        z_new = z + theta * d
        g_new = grad(z_new)
        s = z_new - z
        yv = g_new - g
        sy = float(s @ yv)
        lam = float(s @ s) / sy if sy > 1e-300 else s_ref
        lam = min(max(lam, 1e-10), 1e10)
        z, g = z_new, g_new

    beta = z[:n] - z[n:]
    # snap float residue to exact zero: the epsilon-subgradient branch at 0
    # must match across solvers or midpoint biases disagree by up to 2 epsilon
    beta[np.abs(beta) < 1e-12 * max(1.0, C)] = 0.0
    kb = K @ beta
    s_up = np.where(beta >= 0, 1.0, -1.0)
    s_dn = np.where(beta > 0, 1.0, -1.0)
    up = np.where(beta < C - 1e-9 * C, kb - y + epsilon * s_up, np.inf)
    dn = np.where(beta > -C + 1e-9 * C, kb - y + epsilon * s_dn, -np.inf)
    hi = float(np.min(up[np.isfinite(up)])) if np.isfinite(up).any() else None
    lo = float(np.max(dn[np.isfinite(dn)])) if np.isfinite(dn).any() else None
    if lo is None and hi is None:
        bias = 0.0
    elif lo is None:
        bias = -hi
    elif hi is None:
        bias = -lo
    else:
        bias = -(lo + hi) / 2.0
    return QpReferenceSolution(beta=beta, bias=bias, iterations=it, residual=resid)
