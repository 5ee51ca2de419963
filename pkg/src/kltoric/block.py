"""One-block seeds and their derived geometry.

A block of size n is described by a seed: a strictly decreasing row
1 = c_0 > ... > c_n = 0, a positive curvature normalisation d_*, a period
l, and an even profile h on R/lZ decreasing from 1 to 0 on [0, l/2].
Admissible seeds obey matching conditions on h' at the branch times and
on h'' at the endpoints; from an admissible seed we derive

  * branch times T_nu with h(T_nu) = c_nu,
  * coordinate periods P_nu = 4 * int dt / sqrt((-1)^(nu-1) prod (h-c_mu)),
  * profiles ht_nu on the coordinate circles (even, least period P_nu/2,
    ht_nu(0) = c_nu, reaching c_{nu-1} at P_nu/4),
  * the flat-ish torus metric and the integral tensors, and
  * the order-2^n fold group whose quotient is the real form.

Endpoint square-root singularities of the period integrand are removed by
the substitution t = T -+ s^2; the vanishing factor is evaluated through
its Taylor expansion below a cutoff so no catastrophic cancellation
enters.  Profiles are built by accumulating x(t) on s-grids and fitting a
C^2 quintic Hermite interpolant to exact (value, slope, curvature) nodes;
the evaluated derivative is the exact derivative of the evaluated value,
which is what conservation tests downstream require.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import BPoly, PPoly
from scipy.optimize import brentq

from .errors import (
    CollisionSingularity,
    InversionFailure,
    NegativeRadicand,
    RootNotBracketed,
)

COLLISION_GAP = 1e-10


# ---------------------------------------------------------------------------
# profiles

class Cos2Profile:
    """h(t) = cos^2(pi t / l); admissible for every c-row once
    d_* = 2 pi^2 / l^2, since then h' = -sqrt(2 d_* h (1-h)) identically."""

    kind = "cos2"

    def __init__(self, l: float):
        self.l = float(l)
        self._w = math.pi / self.l

    def h(self, t):
        return np.cos(self._w * np.asarray(t)) ** 2

    def dh(self, t):
        return -self._w * np.sin(2 * self._w * np.asarray(t))

    def d2h(self, t):
        return -2 * self._w ** 2 * np.cos(2 * self._w * np.asarray(t))

    def natural_d_star(self) -> float:
        return 2 * math.pi ** 2 / self.l ** 2


class TableProfile:
    """Profile from samples of h on [0, l/2], extended evenly and
    periodically.  A clamped cubic spline (h' = 0 at both ends) supplies
    the derivatives; residuals of the admissibility conditions are then a
    statement about the table, not about this interpolation."""

    kind = "table"

    def __init__(self, l: float, samples):
        from scipy.interpolate import CubicSpline
        self.l = float(l)
        samples = np.asarray(samples, dtype=float)
        if samples.ndim == 1:
            ts = np.linspace(0.0, self.l / 2, len(samples))
            vals = samples
        else:
            ts, vals = samples[:, 0], samples[:, 1]
        if abs(vals[0] - 1.0) > 1e-9 or abs(vals[-1]) > 1e-9:
            raise NegativeRadicand("table must run from h=1 at t=0 to h=0 at t=l/2")
        self._spline = CubicSpline(ts, vals, bc_type=((1, 0.0), (1, 0.0)))

    def _fold(self, t):
        t = np.mod(np.asarray(t, dtype=float), self.l)
        refl = t > self.l / 2
        t = np.where(refl, self.l - t, t)
        return t, np.where(refl, -1.0, 1.0)

    def h(self, t):
        tf, _ = self._fold(t)
        return self._spline(tf)

    def dh(self, t):
        tf, sgn = self._fold(t)
        return sgn * self._spline(tf, 1)

    def d2h(self, t):
        tf, _ = self._fold(t)
        return self._spline(tf, 2)


@dataclass(frozen=True)
class BlockSeed:
    n: int
    c: tuple[float, ...]          # c_0 = 1 > ... > c_n = 0
    d_star: float
    profile: Cos2Profile | TableProfile

    @property
    def l(self) -> float:
        return self.profile.l

    def __post_init__(self):
        if len(self.c) != self.n + 1:
            raise ValueError("c-row must have n+1 entries")
        if abs(self.c[0] - 1.0) > 1e-12 or abs(self.c[-1]) > 1e-12:
            raise ValueError("c-row must run from 1 to 0")
        if any(x <= y for x, y in zip(self.c, self.c[1:])):
            raise ValueError("c-row must strictly decrease")
        if self.d_star <= 0:
            raise ValueError("d_star must be positive")


def cos2_seed(n: int, c, l: float = math.pi) -> BlockSeed:
    prof = Cos2Profile(l)
    return BlockSeed(n=n, c=tuple(float(x) for x in c),
                     d_star=prof.natural_d_star(), profile=prof)


# ---------------------------------------------------------------------------
# admissibility

def validate_seed(seed: BlockSeed, samples: int = 400) -> dict:
    """Residual table for the admissibility conditions.

    Returns {"ok": bool, "residuals": {...}}; residuals are absolute.  The
    monotonicity entry is the largest (signed) value of h' on the open
    half-period, so anything significantly above zero is a violation.
    """
    p = seed.profile
    l = seed.l
    ts = np.linspace(0.0, l / 2, samples + 1)[1:-1]
    res = {}
    sym = np.linspace(0.01 * l, 0.49 * l, 97)
    res["evenness"] = float(np.max(np.abs(p.h(-sym) - p.h(sym))))
    res["h_at_0"] = abs(float(p.h(0.0)) - 1.0)
    res["h_at_half"] = abs(float(p.h(l / 2)))
    res["monotone_max_dh"] = float(np.max(p.dh(ts)))
    res["second_deriv_at_0"] = abs(float(-p.d2h(0.0)) - seed.d_star)
    res["second_deriv_at_half"] = abs(float(p.d2h(l / 2)) - seed.d_star)
    if seed.n >= 2:
        T = branch_times(seed)
        worst = 0.0
        for nu in range(1, seed.n):
            c = seed.c[nu]
            target = -math.sqrt(2 * seed.d_star * c * (1 - c))
            worst = max(worst, abs(float(p.dh(T[nu])) - target))
        res["branch_slope"] = worst
    tol = 1e-6
    ok = (res["evenness"] < tol and res["h_at_0"] < tol and
          res["h_at_half"] < tol and res["monotone_max_dh"] < tol and
          res["second_deriv_at_0"] < tol and res["second_deriv_at_half"] < tol and
          res.get("branch_slope", 0.0) < tol)
    return {"ok": ok, "residuals": res}


def branch_times(seed: BlockSeed) -> list[float]:
    """Times T_0 = 0 < T_1 < ... < T_n = l/2 with h(T_nu) = c_nu, found by
    bracketed root-finding on the monotone half-period and polished with
    one Newton step."""
    p = seed.profile
    l = seed.l
    out = [0.0]
    for nu in range(1, seed.n):
        c = seed.c[nu]
        f = lambda t: float(p.h(t)) - c
        a, b = 1e-12 * l, l / 2 - 1e-12 * l
        if f(a) < 0 or f(b) > 0:
            raise RootNotBracketed(f"profile does not cross c_{nu} = {c}")
        t0 = brentq(f, a, b, xtol=1e-15, rtol=8.9e-16)
        slope = float(p.dh(t0))
        if slope != 0:
            t0 -= (float(p.h(t0)) - c) / slope
        out.append(t0)
    out.append(l / 2)
    if any(x >= y for x, y in zip(out, out[1:])):
        raise RootNotBracketed("branch times are not strictly increasing")
    return out


# ---------------------------------------------------------------------------
# period integrals

def _radicand_factory(seed: BlockSeed, nu: int):
    """f(t) = (-1)^(nu-1) prod_{mu=1}^{n-1} (h(t) - c_mu) for segment nu,
    with the interior constants for factor-splitting."""
    sign = -1.0 if nu % 2 == 0 else 1.0
    cs = np.array(seed.c[1:seed.n])  # interior constants

    def f_scalar(t):
        hv = float(seed.profile.h(t))
        out = sign
        for c in cs:
            out *= hv - c
        return out

    return f_scalar, sign, cs


def _desing_integrand(seed: BlockSeed, nu: int, anchor: float, direction: int,
                      vanish_index: int | None, s_cut: float):
    """Integrand in s for int dt/sqrt(f) near ``anchor``, t = anchor +
    direction * s^2.

    With a vanishing factor (h - c) at the anchor the integrand is
    2 / sqrt(f(t) / s^2); the ratio (h(t) - c)/s^2 switches to a Taylor
    form below ``s_cut`` so roundoff in the root location enters only
    linearly.  Without a vanishing factor it is plainly 2 s / sqrt(f).
    """
    f_scalar, sign, cs = _radicand_factory(seed, nu)
    p = seed.profile
    hp_a = float(p.dh(anchor))
    hpp_a = float(p.d2h(anchor))

    def integrand(s):
        t = anchor + direction * s * s
        if vanish_index is None:
            val = f_scalar(t)
            if val <= 0:
                raise NegativeRadicand(f"radicand not positive at t={t}")
            return 2.0 * s / math.sqrt(val)
        c = cs[vanish_index]
        hv = float(p.h(t))
        rest = sign
        for k, ck in enumerate(cs):
            if k != vanish_index:
                rest *= hv - ck
        if s >= s_cut:
            ratio = (hv - c) / (s * s) * direction
        else:
            # h(anchor + d s^2) - c  ~  d h' s^2 + h'' s^4 / 2
            ratio = hp_a + 0.5 * hpp_a * direction * s * s
        # ratio = (h - c) / (direction s^2), so ratio*rest*direction = f(t)/s^2
        val = ratio * rest * direction
        if val <= 0:
            raise NegativeRadicand(f"desingularised radicand not positive at s={s}")
        return 2.0 / math.sqrt(val)

    return integrand


def _segment_integrals(seed: BlockSeed, T: list[float], nu: int):
    """x-lengths of the two halves of segment [T_{nu-1}, T_nu]; the anchor
    of each half is the adjacent branch time."""
    lo, hi = T[nu - 1], T[nu]
    mid = 0.5 * (lo + hi)
    scale = hi - lo
    s_cut = 1e-3 * math.sqrt(scale)

    # right half, anchored at T_nu: vanishing factor c_nu unless nu == n
    vanish_hi = nu - 1 if nu <= seed.n - 1 else None
    g_hi = _desing_integrand(seed, nu, hi, -1, vanish_hi, s_cut)
    I_hi, err_hi = quad(g_hi, 0.0, math.sqrt(hi - mid), epsabs=1e-13, epsrel=1e-12, limit=200)

    # left half, anchored at T_{nu-1}: vanishing factor c_{nu-1} unless nu == 1
    vanish_lo = nu - 2 if nu >= 2 else None
    g_lo = _desing_integrand(seed, nu, lo, +1, vanish_lo, s_cut)
    I_lo, err_lo = quad(g_lo, 0.0, math.sqrt(mid - lo), epsabs=1e-13, epsrel=1e-12, limit=200)

    return I_lo, I_hi, err_lo + err_hi


def periods(seed: BlockSeed, T: list[float] | None = None) -> list[float]:
    """P_nu = 4 * int_{T_{nu-1}}^{T_nu} dt / sqrt(radicand), nu = 1..n."""
    if T is None:
        T = branch_times(seed)
    out = []
    for nu in range(1, seed.n + 1):
        I_lo, I_hi, _ = _segment_integrals(seed, T, nu)
        out.append(4.0 * (I_lo + I_hi))
    return out


# ---------------------------------------------------------------------------
# profile construction

def _chart_nodes(seed: BlockSeed, T, nu: int, anchor: float, direction: int,
                 s_max: float, vanish_index, n_nodes: int):
    """Sample x(s) on a uniform s-grid by panelwise Gauss quadrature and
    return (x, t) node arrays plus the chart's total length."""
    s_cut = 1e-3 * math.sqrt(T[nu] - T[nu - 1])
    g = _desing_integrand(seed, nu, anchor, direction, vanish_index, s_cut)
    gl_x, gl_w = np.polynomial.legendre.leggauss(12)
    s_nodes = np.linspace(0.0, s_max, n_nodes)
    xs = [0.0]
    for a, b in zip(s_nodes[:-1], s_nodes[1:]):
        hw = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        panel = sum(w * g(mid + hw * xi) for xi, w in zip(gl_x, gl_w)) * hw
        xs.append(xs[-1] + panel)
    xs = np.array(xs)
    ts = anchor + direction * s_nodes ** 2
    return s_nodes, xs, ts


@dataclass
class CoordinateChart:
    """C^2 interpolant for one profile ht_nu on its quarter period,
    evaluated everywhere by evenness and half-period folding.

    Value and both derivatives are packed into one piecewise polynomial
    (trailing axis), so a full chart evaluation is a single C call; the
    evaluated derivative is the exact derivative of the evaluated value.
    """

    period: float                      # full period P_nu
    packed: PPoly = field(repr=False)  # trailing axis: value, d1, d2

    @classmethod
    def from_hermite(cls, period, x_nodes, values, d1, d2):
        bp = BPoly.from_derivatives(x_nodes, np.stack([values, d1, d2], axis=1))
        pp = PPoly.from_bernstein_basis(bp)
        k, m = pp.c.shape
        c3 = np.zeros((k, m, 3))
        c3[:, :, 0] = pp.c
        cd = pp.derivative().c
        c3[k - cd.shape[0]:, :, 1] = cd
        cdd = pp.derivative(2).c
        c3[k - cdd.shape[0]:, :, 2] = cdd
        return cls(period=float(period), packed=PPoly(c3, pp.x))

    def _fold(self, x):
        half = 0.5 * self.period
        quarter = 0.25 * self.period
        y = np.mod(np.asarray(x, dtype=float), half)
        refl = y > quarter
        y = np.where(refl, half - y, y)
        return y, np.where(refl, -1.0, 1.0)

    def eval_all(self, x):
        y, sgn = self._fold(x)
        out = self.packed(y)
        return out[..., 0], sgn * out[..., 1], out[..., 2]

    def value(self, x):
        return self.eval_all(x)[0]

    def d1(self, x):
        return self.eval_all(x)[1]

    def d2(self, x):
        return self.eval_all(x)[2]


@dataclass
class BlockGeometry:
    seed: BlockSeed
    T: list[float]
    P: list[float]                      # chart-consistent periods
    P_quad: list[float]                 # independent quadrature values
    charts: list[CoordinateChart]
    chart_residual: float               # |P - P_quad| max

    @property
    def n(self) -> int:
        return self.seed.n


def build_profiles(seed: BlockSeed, T: list[float] | None = None,
                   P: list[float] | None = None, nodes_per_chart: int = 220) -> BlockGeometry:
    """Construct every profile ht_nu with consistent derivatives.

    For each segment the map x(t) is accumulated on two s-charts anchored
    at the branch times; inverting on the quarter period and joining the
    charts gives monotone nodes (x, t).  Values, slopes and curvatures at
    the nodes are exact (chain rule with dt/dx = -sqrt(f)), and a quintic
    Hermite interpolant through them is the evaluated profile.  The chart
    total 4*(x_A + x_B) must agree with the quadrature period.
    """
    if T is None:
        T = branch_times(seed)
    if P is None:
        P = periods(seed, T)
    p = seed.profile
    n = seed.n
    charts = []
    worst = 0.0
    for nu in range(1, n + 1):
        lo, hi = T[nu - 1], T[nu]
        mid = 0.5 * (lo + hi)
        van_hi = nu - 1 if nu <= n - 1 else None
        van_lo = nu - 2 if nu >= 2 else None
        sA, xA, tA = _chart_nodes(seed, T, nu, hi, -1, math.sqrt(hi - mid),
                                  van_hi, nodes_per_chart)
        sB, xB, tB = _chart_nodes(seed, T, nu, lo, +1, math.sqrt(mid - lo),
                                  van_lo, nodes_per_chart)
        quarter = xA[-1] + xB[-1]
        period = 4.0 * quarter
        worst = max(worst, abs(period - P[nu - 1]))

        # merge: chart A covers x in [0, xA_max] (t decreasing from T_nu),
        # chart B covers x in [quarter - xB_max, quarter] from the far end
        x_nodes = np.concatenate([xA, quarter - xB[::-1][1:]])
        t_nodes = np.concatenate([tA, tB[::-1][1:]])
        if np.any(np.diff(x_nodes) <= 0):
            raise InversionFailure(f"x(t) not strictly monotone on segment {nu}")

        sign = -1.0 if nu % 2 == 0 else 1.0
        cs = np.array(seed.c[1:n]) if n >= 2 else np.zeros(0)
        hv = np.asarray(p.h(t_nodes), dtype=float)
        hp = np.asarray(p.dh(t_nodes), dtype=float)
        hpp = np.asarray(p.d2h(t_nodes), dtype=float)
        if n >= 2:
            diffs = hv[None, :] - cs[:, None]
            fval = sign * np.prod(diffs, axis=0)
            fprime = sign * hp * np.sum(
                np.prod(np.where(np.eye(len(cs), dtype=bool)[:, :, None],
                                 1.0, diffs[None, :, :]), axis=1), axis=0)
        else:
            fval = np.ones_like(hv)
            fprime = np.zeros_like(hv)
        fval = np.maximum(fval, 0.0)
        root = np.sqrt(fval)
        val = hv
        d1 = -hp * root                      # dt/dx = -sqrt(f) on (0, quarter)
        d2 = hpp * fval + 0.5 * hp * fprime  # d2t/dx2 = f'/2
        # turning points carry exact zero slope
        d1[0] = 0.0
        d1[-1] = 0.0
        charts.append(CoordinateChart.from_hermite(period, x_nodes, val, d1, d2))

    if worst > 1e-8:
        raise InversionFailure(
            f"chart-accumulated period differs from quadrature by {worst:.3e}")
    return BlockGeometry(seed=seed, T=T, P=[c.period for c in charts],
                         P_quad=P, charts=charts, chart_residual=worst)


# ---------------------------------------------------------------------------
# metric and tensors

def metric_and_integrals(geom: BlockGeometry, x) -> dict:
    """Diagonal metric entries and the integral-tensor rows at a torus
    point (off the collision set)."""
    n = geom.n
    x = np.asarray(x, dtype=float)
    H = np.array([float(geom.charts[nu].value(x[nu])) for nu in range(n)])
    for nu in range(n - 1):
        if abs(H[nu] - H[nu + 1]) < COLLISION_GAP:
            raise CollisionSingularity(f"adjacent profile values collide at pair {nu + 1}")
    g = np.empty(n)
    for nu in range(n):
        prod = 1.0
        for mu in range(n):
            if mu != nu:
                prod *= H[mu] - H[nu]
        g[nu] = (-1.0) ** (n - 1 - nu) * prod
    rows = np.empty((max(n - 1, 0), n))
    for k in range(1, n):
        c = geom.seed.c[k]
        for mu in range(n):
            num = 1.0
            den = 1.0
            for xi in range(n):
                if xi != mu:
                    num *= H[xi] - c
                    den *= H[xi] - H[mu]
            rows[k - 1, mu] = num / ((-1.0) ** (n - 1 - mu) * den)
    return {"h": H, "g_diag": g, "F_rows": rows}


# ---------------------------------------------------------------------------
# fold group

@dataclass(frozen=True)
class FoldElement:
    """x_nu -> eps_nu * x_nu + k_nu * P_nu / 2 with eps in {+-1}, k in {0,1}."""
    eps: tuple[int, ...]
    k: tuple[int, ...]

    def compose(self, other: "FoldElement") -> "FoldElement":
        eps = tuple(a * b for a, b in zip(self.eps, other.eps))
        k = tuple((self.eps[i] * other.k[i] + self.k[i]) % 2
                  for i in range(len(self.eps)))
        return FoldElement(eps, k)

    def apply(self, x, periods):
        x = np.asarray(x, dtype=float)
        out = np.array([self.eps[i] * x[i] + self.k[i] * periods[i] / 2
                        for i in range(len(self.eps))])
        return np.mod(out, periods)


def fold_group(geom: BlockGeometry) -> list[FoldElement]:
    """Closure of the deck transformations; always order 2^n."""
    n = geom.n
    gens = []
    for nu in range(0, n - 1):  # pairs (nu, nu+1), 0-based
        eps = [1] * n
        k = [0] * n
        eps[nu] = -1
        eps[nu + 1] = -1
        k[nu + 1] = 1
        gens.append(FoldElement(tuple(eps), tuple(k)))
    eps = [1] + [-1] * (n - 1)
    k = [1] + [0] * (n - 1)
    gens.append(FoldElement(tuple(eps), tuple(k)))

    identity = FoldElement(tuple([1] * n), tuple([0] * n))
    group = {identity}
    frontier = [identity]
    while frontier:
        new = []
        for el in frontier:
            for g in gens:
                nxt = g.compose(el)
                if nxt not in group:
                    group.add(nxt)
                    new.append(nxt)
        frontier = new
    return sorted(group, key=lambda e: (e.eps, e.k))


def orbit(geom: BlockGeometry, x) -> list[np.ndarray]:
    """Distinct images of x under the fold group, as points of the torus."""
    periods = np.array(geom.P)
    seen = {}
    for el in fold_group(geom):
        y = el.apply(x, periods)
        # key by angle so that values straddling the period wrap coincide
        key = tuple((np.round(np.mod(y / periods, 1.0) * 2 ** 24).astype(int)) % 2 ** 24)
        seen.setdefault(key, y)
    return list(seen.values())


def canonical_representative(geom: BlockGeometry, x) -> np.ndarray:
    """Lexicographically least orbit point (coordinates reduced mod P)."""
    pts = orbit(geom, x)
    return min(pts, key=lambda q: tuple(np.round(q, 12)))


def branch_class(geom: BlockGeometry, x, tol: float = 1e-9) -> list[str]:
    """Wall conditions satisfied at x: which invariant hypersurfaces the
    image of x lies on.  Walls for 1 <= nu <= n-1 are x_nu in {0, P/2} or
    x_{nu+1} = +-P/4; the extreme hypersurfaces use x_1 = +-P_1/4 and
    x_n in {0, P_n/2}."""
    n = geom.n
    P = geom.P
    x = np.mod(np.asarray(x, dtype=float), P)
    out = []

    def near(val, target, period):
        return abs((val - target + period / 2) % period - period / 2) < tol * period

    for nu in range(1, n):  # interior hypersurfaces L_nu
        hit = near(x[nu - 1], 0.0, P[nu - 1]) or near(x[nu - 1], P[nu - 1] / 2, P[nu - 1]) \
            or near(x[nu], P[nu] / 4, P[nu]) or near(x[nu], -P[nu] / 4, P[nu])
        if hit:
            out.append(f"L{nu}")
    if near(x[0], P[0] / 4, P[0]) or near(x[0], -P[0] / 4, P[0]):
        out.append("L0")
    if near(x[n - 1], 0.0, P[n - 1]) or near(x[n - 1], P[n - 1] / 2, P[n - 1]):
        out.append(f"L{n}")
    return out
