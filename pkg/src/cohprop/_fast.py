"""Compiled Dormand-Prince 5(4) integrator for polynomial smoothed Hamiltonians.

State layout (complex): ``u (N) | v (N) | M (2N x 2N, row major) | S | G``.
The smoothed potential is passed as a 2D coefficient array in the physical
coordinates ``X_k = b_k (u_k + v_k)/sqrt 2`` (second axis of length 1 for
one degree of freedom).
"""
from __future__ import annotations

import numpy as np
from numba import njit

SQRT2 = np.sqrt(2.0)

# Dormand-Prince tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40

OK, DIVERGED, UNDERFLOW, MAXSTEPS = 0, 1, 2, 3


@njit(cache=True)
def derivs(u, v, N, Vs, b, kin):
    """Return H, Hu, Hv, Huu, Huv, Hvv at one point."""
    X0 = b[0] * (u[0] + v[0]) / SQRT2
    X1 = b[1] * (u[1] + v[1]) / SQRT2 if N == 2 else 0.0 + 0.0j
    d0, d1 = Vs.shape
    p0 = np.empty(d0 + 1, np.complex128)
    p1 = np.empty(d1 + 1, np.complex128)
    p0[0] = 1.0
    p1[0] = 1.0
    for i in range(1, d0 + 1):
        p0[i] = p0[i - 1] * X0
    for j in range(1, d1 + 1):
        p1[j] = p1[j - 1] * X1
    V = 0j
    V0 = 0j
    V1 = 0j
    V00 = 0j
    V01 = 0j
    V11 = 0j
    for i in range(d0):
        for j in range(d1):
            c = Vs[i, j]
            if c == 0.0:
                continue
            V += c * p0[i] * p1[j]
            if i >= 1:
                V0 += c * i * p0[i - 1] * p1[j]
                if i >= 2:
                    V00 += c * i * (i - 1) * p0[i - 2] * p1[j]
                if j >= 1:
                    V01 += c * i * j * p0[i - 1] * p1[j - 1]
            if j >= 1:
                V1 += c * j * p0[i] * p1[j - 1]
                if j >= 2:
                    V11 += c * j * (j - 1) * p0[i] * p1[j - 2]
    Hu = np.empty(N, np.complex128)
    Hv = np.empty(N, np.complex128)
    Huu = np.empty((N, N), np.complex128)
    Huv = np.empty((N, N), np.complex128)
    Hvv = np.empty((N, N), np.complex128)
    dV = (V0, V1)
    H = V
    for k in range(N):
        d = u[k] - v[k]
        H += -0.5 * kin[k] * (d * d - 1.0)
        g = dV[k] * b[k] / SQRT2
        Hu[k] = g - kin[k] * d
        Hv[k] = g + kin[k] * d
    d2 = ((V00, V01), (V01, V11))
    for j in range(N):
        for k in range(N):
            h = d2[j][k] * b[j] * b[k] / 2
            Huu[j, k] = h
            Huv[j, k] = h
            Hvv[j, k] = h
        Huu[j, j] -= kin[j]
        Huv[j, j] += kin[j]
        Hvv[j, j] -= kin[j]
    return H, Hu, Hv, Huu, Huv, Hvv


@njit(cache=True)
def rhs(y, N, Vs, b, kin, hbar, out):
    u = y[:N]
    v = y[N:2 * N]
    n2 = 2 * N
    H, Hu, Hv, Huu, Huv, Hvv = derivs(u, v, N, Vs, b, kin)
    ih = 1j * hbar
    L = np.empty((n2, n2), np.complex128)
    for j in range(N):
        for k in range(N):
            L[j, k] = Huv[k, j] / ih
            L[j, N + k] = Hvv[j, k] / ih
            L[N + j, k] = -Huu[j, k] / ih
            L[N + j, N + k] = -Huv[j, k] / ih
    ds = -H
    dg = 0j
    for k in range(N):
        out[k] = Hv[k] / ih
        out[N + k] = -Hu[k] / ih
        ds += 0.5 * (u[k] * Hu[k] + v[k] * Hv[k])
        dg += 0.5 * Huv[k, k]
    off = n2
    for i in range(n2):
        for j in range(n2):
            acc = 0j
            for k in range(n2):
                acc += L[i, k] * y[off + k * n2 + j]
            out[off + i * n2 + j] = acc
    m = off + n2 * n2
    out[m] = ds
    out[m + 1] = dg


@njit(cache=True)
def mvv_of(y, N):
    n2 = 2 * N
    off = n2
    if N == 1:
        return y[off + 3]
    a = y[off + 2 * n2 + 2]
    bb = y[off + 2 * n2 + 3]
    c = y[off + 3 * n2 + 2]
    d = y[off + 3 * n2 + 3]
    return a * d - bb * c


@njit(cache=True)
def _err_norm(y, ynew, err, rtol, atol):
    acc = 0.0
    for i in range(y.size):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        r = abs(err[i]) / sc
        acc += r * r
    return np.sqrt(acc / y.size)


@njit(cache=True)
def integrate_dopri(y0, T, N, Vs, b, kin, hbar, rtol, atol, bound, max_steps, max_jump, store):
    """Returns (status, t_stop, times, states, phases, count)."""
    n = y0.size
    cap = 256 if store else 2
    ts = np.empty(cap)
    ys = np.empty((cap, n), np.complex128)
    ph = np.empty(cap)
    ts[0] = 0.0
    ys[0] = y0
    ph[0] = 0.0
    count = 1
    if T == 0.0:
        return OK, 0.0, ts[:1], ys[:1], ph[:1], 1
    y = y0.copy()
    k1 = np.empty(n, np.complex128)
    k2 = np.empty(n, np.complex128)
    k3 = np.empty(n, np.complex128)
    k4 = np.empty(n, np.complex128)
    k5 = np.empty(n, np.complex128)
    k6 = np.empty(n, np.complex128)
    k7 = np.empty(n, np.complex128)
    yt = np.empty(n, np.complex128)
    ynew = np.empty(n, np.complex128)
    err = np.empty(n, np.complex128)
    rhs(y, N, Vs, b, kin, hbar, k1)
    t = 0.0
    phase = 0.0
    mvv_old = mvv_of(y, N)
    # initial step from the derivative scale
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d0 += (abs(y[i]) / sc) ** 2
        d1 += (abs(k1[i]) / sc) ** 2
    d0 = np.sqrt(d0 / n)
    d1 = np.sqrt(d1 / n)
    h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(h, T, 0.1)
    steps = 0
    while t < T:
        if steps >= max_steps:
            return MAXSTEPS, t, ts[:count], ys[:count], ph[:count], count
        if t + h > T:
            h = T - t
        if h < 1e-14 * max(1.0, T):
            return UNDERFLOW, t, ts[:count], ys[:count], ph[:count], count
        for i in range(n):
            yt[i] = y[i] + h * A21 * k1[i]
        rhs(yt, N, Vs, b, kin, hbar, k2)
        for i in range(n):
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        rhs(yt, N, Vs, b, kin, hbar, k3)
        for i in range(n):
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        rhs(yt, N, Vs, b, kin, hbar, k4)
        for i in range(n):
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        rhs(yt, N, Vs, b, kin, hbar, k5)
        for i in range(n):
            yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
        rhs(yt, N, Vs, b, kin, hbar, k6)
        for i in range(n):
            ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        rhs(ynew, N, Vs, b, kin, hbar, k7)
        for i in range(n):
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        en = _err_norm(y, ynew, err, rtol, atol)
        finite = True
        for i in range(n):
            if not (np.isfinite(ynew[i].real) and np.isfinite(ynew[i].imag)):
                finite = False
                break
        if not finite:
            h *= 0.25
            continue
        if en > 1.0:
            h *= max(0.2, 0.9 * en ** -0.2)
            continue
        mvv_new = mvv_of(ynew, N)
        dphi = 0.0
        if mvv_old != 0 and mvv_new != 0:
            dphi = np.angle(mvv_new / mvv_old)
        if abs(dphi) > max_jump:
            h *= 0.5
            continue
        steps += 1
        t = t + h
        phase += dphi
        mvv_old = mvv_new
        for i in range(n):
            y[i] = ynew[i]
            k1[i] = k7[i]
        big = 0.0
        for i in range(2 * N):
            big = max(big, abs(y[i]))
        if store:
            if count == cap:
                cap *= 2
                ts2 = np.empty(cap)
                ys2 = np.empty((cap, n), np.complex128)
                ph2 = np.empty(cap)
                ts2[:count] = ts[:count]
                ys2[:count] = ys[:count]
                ph2[:count] = ph[:count]
                ts, ys, ph = ts2, ys2, ph2
            ts[count] = t
            ys[count] = y
            ph[count] = phase
            count += 1
        else:
            ts[1] = t
            ys[1] = y
            ph[1] = phase
            count = 2
        if big > bound:
            return DIVERGED, t, ts[:count], ys[:count], ph[:count], count
        fac = 0.9 * en ** -0.2 if en > 0 else 10.0
        h *= min(10.0, max(0.2, fac))
    return OK, t, ts[:count], ys[:count], ph[:count], count


@njit(cache=True)
def batch_endpoints(v0s, u0, T, N, Vs, b, kin, hbar, rtol, atol, bound, max_steps):
    """Integrate many initial ``v0`` (rows) with common ``u0``; return ``v(T)`` and status."""
    m = v0s.shape[0]
    n = 2 * N + 4 * N * N + 2
    vT = np.empty((m, N), np.complex128)
    status = np.empty(m, np.int64)
    y0 = np.zeros(n, np.complex128)
    for r in range(m):
        for k in range(N):
            y0[k] = u0[k]
            y0[N + k] = v0s[r, k]
        for i in range(2 * N, n):
            y0[i] = 0.0
        for i in range(2 * N):
            y0[2 * N + i * 2 * N + i] = 1.0
        st, _, _, ys, _, cnt = integrate_dopri(y0, T, N, Vs, b, kin, hbar, rtol, atol, bound,
                                               max_steps, 10.0, False)
        status[r] = st
        for k in range(N):
            vT[r, k] = ys[cnt - 1, N + k]
    return vT, status
