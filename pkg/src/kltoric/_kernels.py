"""Compiled inner loops for the flow module.

Everything here mirrors the numpy implementations in flow.py exactly (no
fastmath, IEEE semantics), so results are bit-compatible with the
fallback path; the test suite asserts agreement.  The chart data arrives
as padded arrays: per coordinate a breakpoint row, a coefficient block of
shape (6, m, 3) (value/d1/d2 stacked), an interval count, and the period.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap if not (args and callable(args[0])) else args[0]


@njit(cache=True)
def _chart_eval(bp, cf, cnt, period, x):
    """Value, first and second derivative of one folded chart at scalar x."""
    half = 0.5 * period
    quarter = 0.25 * period
    y = x % half
    if y < 0.0:
        y += half
    sgn = 1.0
    if y > quarter:
        y = half - y
        sgn = -1.0
    lo = 0
    hi = cnt - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if bp[mid] <= y:
            lo = mid
        else:
            hi = mid - 1
    dx = y - bp[lo]
    v = cf[0, lo, 0]
    d1 = cf[0, lo, 1]
    d2 = cf[0, lo, 2]
    for k in range(1, 6):
        v = v * dx + cf[k, lo, 0]
        d1 = d1 * dx + cf[k, lo, 1]
        d2 = d2 * dx + cf[k, lo, 2]
    return v, sgn * d1, d2


@njit(cache=True)
def rhs_kernel(y, J, bp, cf, cnt, periods, complex_mode, out):
    B = y.shape[0]
    n = bp.shape[0]
    H = np.empty(n)
    H1 = np.empty(n)
    H2 = np.empty(n)
    a = np.empty(n)
    Q = np.empty(n)
    dQ = np.empty(n)
    G = np.empty(n)
    for b in range(B):
        for nu in range(n):
            v, d1, d2 = _chart_eval(bp[nu], cf[nu], cnt[nu], periods[nu], y[b, nu])
            H[nu] = v
            H1[nu] = d1
            H2[nu] = d2
        for nu in range(n):
            prod = 1.0
            for mu in range(n):
                if mu != nu:
                    prod *= H[mu] - H[nu]
            if (n - 1 - nu) % 2 == 1:
                prod = -prod
            a[nu] = 1.0 / prod
        for nu in range(n):
            pv = y[b, n + nu]
            if complex_mode:
                u = -H[nu]
                pi = 0.0
                dpi_du = 0.0
                for j in range(n, 0, -1):
                    pi = pi * u + J[b, j - 1]
                for j in range(n, 1, -1):
                    dpi_du = dpi_du * u + (j - 1) * J[b, j - 1]
                s = 1.0 if (n - 1 - nu) % 2 == 0 else -1.0
                Q[nu] = s * pi / H1[nu]
                dQ[nu] = s * (-dpi_du) - Q[nu] * H2[nu] / H1[nu]
            else:
                Q[nu] = 0.0
                dQ[nu] = 0.0
            G[nu] = pv * pv + Q[nu] * Q[nu]
        for nu in range(n):
            acc = 0.0
            diag = 0.0
            for mu in range(n):
                if mu != nu:
                    acc += (-a[mu] / (H[nu] - H[mu])) * G[mu]
                    diag += 1.0 / (H[mu] - H[nu])
            acc += a[nu] * diag * G[nu]
            dEdx = 0.5 * H1[nu] * acc
            if complex_mode:
                dEdx += a[nu] * Q[nu] * dQ[nu]
            out[b, nu] = a[nu] * y[b, n + nu]
            out[b, n + nu] = -dEdx
    return out


@njit(cache=True)
def invariants_kernel(y, J, bp, cf, cnt, periods, complex_mode, c,
                      outE, outFc, outFi):
    B = y.shape[0]
    n = bp.shape[0]
    H = np.empty(n)
    H1 = np.empty(n)
    aG = np.empty(n)
    es = np.empty(n + 1)
    for b in range(B):
        for nu in range(n):
            v, d1, _ = _chart_eval(bp[nu], cf[nu], cnt[nu], periods[nu], y[b, nu])
            H[nu] = v
            H1[nu] = d1
        for nu in range(n):
            prod = 1.0
            for mu in range(n):
                if mu != nu:
                    prod *= H[mu] - H[nu]
            if (n - 1 - nu) % 2 == 1:
                prod = -prod
            pv = y[b, n + nu]
            qv = 0.0
            if complex_mode:
                u = -H[nu]
                pi = 0.0
                for j in range(n, 0, -1):
                    pi = pi * u + J[b, j - 1]
                s = 1.0 if (n - 1 - nu) % 2 == 0 else -1.0
                qv = s * pi / H1[nu]
            aG[nu] = (pv * pv + qv * qv) / prod
        tot = 0.0
        for nu in range(n):
            tot += aG[nu]
        outE[b] = 0.5 * tot
        for k in range(1, n):
            ck = c[k]
            acc = 0.0
            for mu in range(n):
                prod = aG[mu]
                for xi in range(n):
                    if xi != mu:
                        prod *= H[xi] - ck
                acc += prod
            outFc[b, k - 1] = acc
        for i in range(1, n + 1):
            deg = n - i
            acc = 0.0
            for mu in range(n):
                for q in range(n):
                    es[q] = 0.0
                es[0] = 1.0
                m = 0
                for xi in range(n):
                    if xi != mu:
                        m += 1
                        for q in range(m, 0, -1):
                            es[q] += H[xi] * es[q - 1]
                acc += es[deg] * aG[mu]
            outFi[b, i - 1] = acc


@njit(cache=True)
def guards_kernel(y, bp, cf, cnt, periods, complex_mode, out_gap, out_h1):
    B = y.shape[0]
    n = bp.shape[0]
    H = np.empty(n)
    H1 = np.empty(n)
    for b in range(B):
        for nu in range(n):
            v, d1, _ = _chart_eval(bp[nu], cf[nu], cnt[nu], periods[nu], y[b, nu])
            H[nu] = v
            H1[nu] = d1
        gap = np.inf
        for nu in range(n - 1):
            g = abs(H[nu] - H[nu + 1])
            if g < gap:
                gap = g
        out_gap[b] = gap
        h1m = np.inf
        if complex_mode:
            for nu in range(n):
                g = abs(H1[nu])
                if g < h1m:
                    h1m = g
        out_h1[b] = h1m
