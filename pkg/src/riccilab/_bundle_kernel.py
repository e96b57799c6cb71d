"""Compiled RK4 step loop for the bundle flow.

Everything here is an explicit-loop twin of the numpy reference in
`bundle.py` (`_flow_python`); the two are cross-checked in the tests.  All
scratch arrays are allocated once per call, the Cholesky factorization is
open-coded so no temporaries are created inside the hot loop, and time is
accumulated with a compensated sum.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def _rhs(g, G, rho, rho_inv, h, fixed_base, dg, dG, gp, Gp, G1b, G2b, L, Ab, yb):
    """Flow right side; returns 1 if a fiber point stopped being SPD."""
    M = g.shape[0]
    N = G.shape[1]
    for k in range(M):
        gp[k + 2] = g[k]
        for i in range(N):
            for j in range(N):
                Gp[k + 2, i, j] = G[k, i, j]
    gp[0] = g[M - 2]
    gp[1] = g[M - 1]
    gp[M + 2] = g[0]
    gp[M + 3] = g[1]
    for s in range(2):
        for i in range(N):
            for j in range(N):
                accl = 0.0
                accr = 0.0
                for a in range(N):
                    for b in range(N):
                        accl += rho_inv[i, a] * G[M - 2 + s, a, b] * rho_inv[j, b]
                        accr += rho[i, a] * G[s, a, b] * rho[j, b]
                Gp[s, i, j] = accl
                Gp[M + 2 + s, i, j] = accr
    c1 = 1.0 / (12.0 * h)
    c2 = 1.0 / (12.0 * h * h)
    for k in range(M):
        gk = g[k]
        g1 = (-gp[k + 4] + 8.0 * gp[k + 3] - 8.0 * gp[k + 1] + gp[k]) * c1
        for i in range(N):
            for j in range(N):
                G1b[i, j] = (
                    -Gp[k + 4, i, j]
                    + 8.0 * Gp[k + 3, i, j]
                    - 8.0 * Gp[k + 1, i, j]
                    + Gp[k, i, j]
                ) * c1
                G2b[i, j] = (
                    -Gp[k + 4, i, j]
                    + 16.0 * Gp[k + 3, i, j]
                    - 30.0 * Gp[k + 2, i, j]
                    + 16.0 * Gp[k + 1, i, j]
                    - Gp[k, i, j]
                ) * c2
                L[i, j] = G[k, i, j]
        for a in range(N):
            for b in range(a):
                acc = L[a, b]
                for c in range(b):
                    acc -= L[a, c] * L[b, c]
                L[a, b] = acc / L[b, b]
            acc = L[a, a]
            for c in range(a):
                acc -= L[a, c] * L[a, c]
            if not (acc > 0.0) or not math.isfinite(acc):
                return 1
            L[a, a] = math.sqrt(acc)
        for col in range(N):
            for a in range(N):
                acc = G1b[a, col]
                for c in range(a):
                    acc -= L[a, c] * yb[c]
                yb[a] = acc / L[a, a]
            for a in range(N - 1, -1, -1):
                acc = yb[a]
                for c in range(a + 1, N):
                    acc -= L[c, a] * Ab[c, col]
                Ab[a, col] = acc / L[a, a]
        cg = g1 / (2.0 * gk)
        for i in range(N):
            for j in range(N):
                acc = 0.0
                for a in range(N):
                    acc += G1b[i, a] * Ab[a, j]
                dG[k, i, j] = (G2b[i, j] - cg * G1b[i, j] - acc) / gk
        if fixed_base:
            dg[k] = 0.0
        else:
            acc = 0.0
            for i in range(N):
                for j in range(N):
                    acc += Ab[i, j] * Ab[j, i]
            dg[k] = 0.5 * acc
    return 0


@njit(cache=True, fastmath=True)
def _rhs2(g, G, rho, rho_inv, h, fixed_base, dg, dG, gp, Gp):
    """Unrolled twin of _rhs for symmetric 2x2 fibers (the hot path)."""
    M = g.shape[0]
    for k in range(M):
        gp[k + 2] = g[k]
        Gp[k + 2, 0, 0] = G[k, 0, 0]
        Gp[k + 2, 0, 1] = G[k, 0, 1]
        Gp[k + 2, 1, 0] = G[k, 1, 0]
        Gp[k + 2, 1, 1] = G[k, 1, 1]
    gp[0] = g[M - 2]
    gp[1] = g[M - 1]
    gp[M + 2] = g[0]
    gp[M + 3] = g[1]
    for s in range(2):
        for i in range(2):
            for j in range(2):
                accl = 0.0
                accr = 0.0
                for a in range(2):
                    for b in range(2):
                        accl += rho_inv[i, a] * G[M - 2 + s, a, b] * rho_inv[j, b]
                        accr += rho[i, a] * G[s, a, b] * rho[j, b]
                Gp[s, i, j] = accl
                Gp[M + 2 + s, i, j] = accr
    c1 = 1.0 / (12.0 * h)
    c2 = 1.0 / (12.0 * h * h)
    for k in range(M):
        gk = g[k]
        g1 = (-gp[k + 4] + 8.0 * gp[k + 3] - 8.0 * gp[k + 1] + gp[k]) * c1
        p1 = (-Gp[k + 4, 0, 0] + 8.0 * Gp[k + 3, 0, 0] - 8.0 * Gp[k + 1, 0, 0] + Gp[k, 0, 0]) * c1
        q1 = (-Gp[k + 4, 0, 1] + 8.0 * Gp[k + 3, 0, 1] - 8.0 * Gp[k + 1, 0, 1] + Gp[k, 0, 1]) * c1
        r1 = (-Gp[k + 4, 1, 1] + 8.0 * Gp[k + 3, 1, 1] - 8.0 * Gp[k + 1, 1, 1] + Gp[k, 1, 1]) * c1
        p2 = (-Gp[k + 4, 0, 0] + 16.0 * Gp[k + 3, 0, 0] - 30.0 * Gp[k + 2, 0, 0]
              + 16.0 * Gp[k + 1, 0, 0] - Gp[k, 0, 0]) * c2
        q2 = (-Gp[k + 4, 0, 1] + 16.0 * Gp[k + 3, 0, 1] - 30.0 * Gp[k + 2, 0, 1]
              + 16.0 * Gp[k + 1, 0, 1] - Gp[k, 0, 1]) * c2
        r2 = (-Gp[k + 4, 1, 1] + 16.0 * Gp[k + 3, 1, 1] - 30.0 * Gp[k + 2, 1, 1]
              + 16.0 * Gp[k + 1, 1, 1] - Gp[k, 1, 1]) * c2
        ga = G[k, 0, 0]
        gb = G[k, 0, 1]
        gc = G[k, 1, 1]
        det = ga * gc - gb * gb
        if not (det > 0.0) or not (ga > 0.0) or not math.isfinite(det):
            return 1
        idet = 1.0 / det
        # B = G^-1 G'
        b11 = idet * (gc * p1 - gb * q1)
        b12 = idet * (gc * q1 - gb * r1)
        b21 = idet * (ga * q1 - gb * p1)
        b22 = idet * (ga * r1 - gb * q1)
        # S = G' B (symmetric)
        s11 = p1 * b11 + q1 * b21
        s12 = p1 * b12 + q1 * b22
        s22 = q1 * b12 + r1 * b22
        cg = g1 / (2.0 * gk)
        ig = 1.0 / gk
        d11 = (p2 - cg * p1 - s11) * ig
        d12 = (q2 - cg * q1 - s12) * ig
        d22 = (r2 - cg * r1 - s22) * ig
        dG[k, 0, 0] = d11
        dG[k, 0, 1] = d12
        dG[k, 1, 0] = d12
        dG[k, 1, 1] = d22
        if fixed_base:
            dg[k] = 0.0
        else:
            dg[k] = 0.5 * (b11 * b11 + 2.0 * b12 * b21 + b22 * b22)
    return 0


@njit(cache=True, fastmath=True)
def _energy(g, G, rho, rho_inv, h, gp, Gp, G1b, L, Ab, yb):
    """Dirichlet energy of the fiber map; returns -1.0 on a non-SPD point."""
    M = g.shape[0]
    N = G.shape[1]
    for k in range(M):
        gp[k + 2] = g[k]
        for i in range(N):
            for j in range(N):
                Gp[k + 2, i, j] = G[k, i, j]
    gp[0] = g[M - 2]
    gp[1] = g[M - 1]
    gp[M + 2] = g[0]
    gp[M + 3] = g[1]
    for s in range(2):
        for i in range(N):
            for j in range(N):
                accl = 0.0
                accr = 0.0
                for a in range(N):
                    for b in range(N):
                        accl += rho_inv[i, a] * G[M - 2 + s, a, b] * rho_inv[j, b]
                        accr += rho[i, a] * G[s, a, b] * rho[j, b]
                Gp[s, i, j] = accl
                Gp[M + 2 + s, i, j] = accr
    c1 = 1.0 / (12.0 * h)
    total = 0.0
    for k in range(M):
        for i in range(N):
            for j in range(N):
                G1b[i, j] = (
                    -Gp[k + 4, i, j]
                    + 8.0 * Gp[k + 3, i, j]
                    - 8.0 * Gp[k + 1, i, j]
                    + Gp[k, i, j]
                ) * c1
                L[i, j] = G[k, i, j]
        for a in range(N):
            for b in range(a):
                acc = L[a, b]
                for c in range(b):
                    acc -= L[a, c] * L[b, c]
                L[a, b] = acc / L[b, b]
            acc = L[a, a]
            for c in range(a):
                acc -= L[a, c] * L[a, c]
            if not (acc > 0.0) or not math.isfinite(acc):
                return -1.0
            L[a, a] = math.sqrt(acc)
        for col in range(N):
            for a in range(N):
                acc = G1b[a, col]
                for c in range(a):
                    acc -= L[a, c] * yb[c]
                yb[a] = acc / L[a, a]
            for a in range(N - 1, -1, -1):
                acc = yb[a]
                for c in range(a + 1, N):
                    acc -= L[c, a] * Ab[c, col]
                Ab[a, col] = acc / L[a, a]
        tr = 0.0
        for i in range(N):
            for j in range(N):
                tr += Ab[i, j] * Ab[j, i]
        total += tr / math.sqrt(g[k])
    return 0.5 * h * total


@njit(cache=True)
def flow_kernel(
    g,
    G,
    rho,
    rho_inv,
    h,
    t0,
    t_end,
    targets,
    cfl,
    fixed_base,
    max_steps,
    out_t,
    out_g,
    out_G,
    out_drift,
):
    """RK4 loop; returns (status, nsamples, steps, rejected, worst_increase).

    status: 0 done, 1 base collapse / persistent instability, 2 step budget.
    The per-step monitor is the normalized volume (or the energy when the
    base is frozen); worst_increase is its largest one-step gain.
    """
    M = g.shape[0]
    N = G.shape[1]
    gp = np.empty(M + 4)
    Gp = np.empty((M + 4, N, N))
    G1b = np.empty((N, N))
    G2b = np.empty((N, N))
    L = np.empty((N, N))
    Ab = np.empty((N, N))
    yb = np.empty(N)
    dg1 = np.empty(M)
    dG1 = np.empty((M, N, N))
    dg2 = np.empty(M)
    dG2 = np.empty((M, N, N))
    dg3 = np.empty(M)
    dG3 = np.empty((M, N, N))
    dg4 = np.empty(M)
    dG4 = np.empty((M, N, N))
    gt = np.empty(M)
    Gt = np.empty((M, N, N))
    gn = np.empty(M)
    Gn = np.empty((M, N, N))
    t_hi = t0
    t_lo = 0.0
    steps = 0
    rejected = 0
    nsamp = 0
    drift_seg = 0.0
    worst_inc = -1.0e300
    cfl_eff = cfl
    n_t = targets.shape[0]
    if fixed_base:
        mon_old = _energy(g, G, rho, rho_inv, h, gp, Gp, G1b, L, Ab, yb)
        if mon_old < 0.0:
            return (1, nsamp, steps, rejected, 0.0)
    else:
        acc = 0.0
        for k in range(M):
            acc += math.sqrt(g[k])
        mon_old = h * acc / math.sqrt(t0)
    status = 0
    while t_hi + t_lo < t_end:
        if steps >= max_steps:
            status = 2
            break
        ming = g[0]
        bad = False
        for k in range(M):
            if not math.isfinite(g[k]):
                bad = True
            if g[k] < ming:
                ming = g[k]
        if bad or ming <= 0.0:
            status = 1
            break
        dt = cfl_eff * h * h * ming
        t_now = t_hi + t_lo
        if t_now + dt > t_end:
            dt = t_end - t_now
        if N == 2:
            fail = _rhs2(g, G, rho, rho_inv, h, fixed_base, dg1, dG1, gp, Gp)
        else:
            fail = _rhs(g, G, rho, rho_inv, h, fixed_base, dg1, dG1, gp, Gp, G1b, G2b, L, Ab, yb)
        if fail == 0:
            half = 0.5 * dt
            for k in range(M):
                gt[k] = g[k] + half * dg1[k]
                for i in range(N):
                    for j in range(N):
                        Gt[k, i, j] = G[k, i, j] + half * dG1[k, i, j]
            if N == 2:
                fail = _rhs2(gt, Gt, rho, rho_inv, h, fixed_base, dg2, dG2, gp, Gp)
            else:
                fail = _rhs(gt, Gt, rho, rho_inv, h, fixed_base, dg2, dG2, gp, Gp, G1b, G2b, L, Ab, yb)
        if fail == 0:
            half = 0.5 * dt
            for k in range(M):
                gt[k] = g[k] + half * dg2[k]
                for i in range(N):
                    for j in range(N):
                        Gt[k, i, j] = G[k, i, j] + half * dG2[k, i, j]
            if N == 2:
                fail = _rhs2(gt, Gt, rho, rho_inv, h, fixed_base, dg3, dG3, gp, Gp)
            else:
                fail = _rhs(gt, Gt, rho, rho_inv, h, fixed_base, dg3, dG3, gp, Gp, G1b, G2b, L, Ab, yb)
        if fail == 0:
            for k in range(M):
                gt[k] = g[k] + dt * dg3[k]
                for i in range(N):
                    for j in range(N):
                        Gt[k, i, j] = G[k, i, j] + dt * dG3[k, i, j]
            if N == 2:
                fail = _rhs2(gt, Gt, rho, rho_inv, h, fixed_base, dg4, dG4, gp, Gp)
            else:
                fail = _rhs(gt, Gt, rho, rho_inv, h, fixed_base, dg4, dG4, gp, Gp, G1b, G2b, L, Ab, yb)
        if fail == 0:
            w = dt / 6.0
            for k in range(M):
                gn[k] = g[k] + w * (dg1[k] + 2.0 * dg2[k] + 2.0 * dg3[k] + dg4[k])
                if not math.isfinite(gn[k]) or gn[k] <= 0.0:
                    fail = 1
                for i in range(N):
                    for j in range(N):
                        v = G[k, i, j] + w * (
                            dG1[k, i, j]
                            + 2.0 * dG2[k, i, j]
                            + 2.0 * dG3[k, i, j]
                            + dG4[k, i, j]
                        )
                        if not math.isfinite(v):
                            fail = 1
                        Gn[k, i, j] = v
        if fail == 0 and N == 2:
            # symmetrize, then renormalize det to 1 (drift logged)
            for k in range(M):
                v = 0.5 * (Gn[k, 0, 1] + Gn[k, 1, 0])
                Gn[k, 0, 1] = v
                Gn[k, 1, 0] = v
                d = Gn[k, 0, 0] * Gn[k, 1, 1] - v * v
                if not (d > 0.0) or not (Gn[k, 0, 0] > 0.0) or not math.isfinite(d):
                    fail = 1
                    break
                drift = abs(d - 1.0)
                if drift > drift_seg:
                    drift_seg = drift
                f = 1.0 / math.sqrt(d)
                Gn[k, 0, 0] *= f
                Gn[k, 0, 1] *= f
                Gn[k, 1, 0] *= f
                Gn[k, 1, 1] *= f
        elif fail == 0:
            # symmetrize, then renormalize det to 1 (drift logged)
            for k in range(M):
                for i in range(N):
                    for j in range(i + 1, N):
                        v = 0.5 * (Gn[k, i, j] + Gn[k, j, i])
                        Gn[k, i, j] = v
                        Gn[k, j, i] = v
                for i in range(N):
                    for j in range(N):
                        L[i, j] = Gn[k, i, j]
                det_ok = True
                d = 1.0
                for a in range(N):
                    for b in range(a):
                        acc = L[a, b]
                        for c in range(b):
                            acc -= L[a, c] * L[b, c]
                        L[a, b] = acc / L[b, b]
                    acc = L[a, a]
                    for c in range(a):
                        acc -= L[a, c] * L[a, c]
                    if not (acc > 0.0) or not math.isfinite(acc):
                        det_ok = False
                        break
                    L[a, a] = math.sqrt(acc)
                    d *= acc
                if not det_ok:
                    fail = 1
                    break
                drift = abs(d - 1.0)
                if drift > drift_seg:
                    drift_seg = drift
                f = d ** (-1.0 / N)
                for i in range(N):
                    for j in range(N):
                        Gn[k, i, j] *= f
        if fail != 0:
            rejected += 1
            cfl_eff *= 0.5
            if cfl_eff < 1e-3 * cfl:
                status = 1
                break
            continue
        for k in range(M):
            g[k] = gn[k]
            for i in range(N):
                for j in range(N):
                    G[k, i, j] = Gn[k, i, j]
        y = dt + t_lo
        t_new = t_hi + y
        t_lo = y - (t_new - t_hi)
        t_hi = t_new
        steps += 1
        if fixed_base:
            mon_new = _energy(g, G, rho, rho_inv, h, gp, Gp, G1b, L, Ab, yb)
            if mon_new < 0.0:
                status = 1
                break
        else:
            acc = 0.0
            for k in range(M):
                acc += math.sqrt(g[k])
            mon_new = h * acc / math.sqrt(t_hi + t_lo)
        inc = mon_new - mon_old
        if inc > worst_inc:
            worst_inc = inc
        mon_old = mon_new
        tc = t_hi + t_lo
        while nsamp < n_t and tc >= targets[nsamp] * (1.0 - 1e-12):
            out_t[nsamp] = tc
            for k in range(M):
                out_g[nsamp, k] = g[k]
                for i in range(N):
                    for j in range(N):
                        out_G[nsamp, k, i, j] = G[k, i, j]
            out_drift[nsamp] = drift_seg
            drift_seg = 0.0
            nsamp += 1
    return (status, nsamp, steps, rejected, worst_inc)
