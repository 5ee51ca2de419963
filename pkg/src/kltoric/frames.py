"""Pointwise coefficient algebra on the open stratum.

Given a value of the fundamental functions (one strictly decreasing row
per block, each entry in (0,1) away from the strata) and the conjunction
constants, this module produces the positive weights a_i, the block
couplings u_a, the sparse matrices b and f, and the weight vectors of the
generating polynomial.  All identities these satisfy are checked
numerically in the test suite; nothing here is symbolic.

Indices follow the canonical frame numbering: block ``a`` covers the
1-based range s(a)..t(a); within a block, position nu = 1..|a| maps to
index s(a) + nu - 1 and rows are ordered so h decreases with nu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PoleAtLambda, StratumCollision
from .poset import Poset

COLLISION_RTOL = 1e-12


@dataclass(frozen=True)
class HPoint:
    """A point of the coefficient algebra: h-rows per block plus the
    conjunction constants, with the chamber (orderings and signs of
    h_i + e) implied by the actual values."""

    poset: Poset
    h: dict[str, tuple[float, ...]]          # decreasing row per block
    e: dict[tuple[str, str], float]          # (lower, cover successor)

    def __post_init__(self):
        for a, row in self.h.items():
            if len(row) != self.poset.size[a]:
                raise ValueError(f"h-row of {a!r} has wrong length")
            for x, y in zip(row, row[1:]):
                gap = abs(x - y)
                scale = max(abs(x), abs(y), 1.0)
                if gap <= COLLISION_RTOL * scale:
                    raise StratumCollision(f"h-values collide in block {a!r}")

    def e_between(self, lo: str, hi: str) -> float:
        p = self.poset
        step = p.chain_between(lo, hi)[0]
        return self.e[(lo, step)]

    def h_index(self, i: int) -> float:
        a = self.poset.block_of_index(i)
        return self.h[a][i - self.poset.index_range(a).start]

    @property
    def n(self) -> int:
        return self.poset.n


def elementary_symmetric(values, k: int) -> float:
    """S_k of the given values (S_0 = 1)."""
    values = tuple(values)
    coeffs = [1.0] + [0.0] * len(values)
    m = 0
    for v in values:
        m += 1
        for i in range(m, 0, -1):
            coeffs[i] += v * coeffs[i - 1]
    return coeffs[k] if 0 <= k < len(coeffs) else 0.0


def block_u(point: HPoint, a: str) -> float:
    """Product of (h_k + e) over all blocks strictly below ``a``."""
    p = point.poset
    u = 1.0
    for g in p.downset_chain(a):
        e = point.e_between(g, a)
        for v in point.h[g]:
            u *= v + e
    return u


def point_coefficients(point: HPoint):
    """Positive weights a_i, couplings u_a, and the momentum symbols v_i.

    a_i for i in block a is the reciprocal of |prod_{j in a, j != i}
    (h_j - h_i)| * |u_a|; v_i = u_a * S_{t(a)-i+1}(h; a).
    """
    p = point.poset
    n = p.n
    a_out = np.zeros(n + 1)  # 1-based
    v_out = np.zeros(n + 1)
    u_out = {}
    for blk in p.elements:
        u = block_u(point, blk)
        u_out[blk] = u
        row = point.h[blk]
        rng = p.index_range(blk)
        t = rng.stop - 1
        for pos, i in enumerate(rng):
            prod = 1.0
            for q, hv in enumerate(row):
                if q != pos:
                    prod *= hv - row[pos]
            a_out[i] = 1.0 / (abs(prod) if prod != 0 else _collide(blk)) / abs(u)
            v_out[i] = u * elementary_symmetric(row, t - i + 1)
    return a_out[1:], u_out, v_out[1:]


def _collide(blk):
    raise StratumCollision(f"coincident h-values in block {blk!r}")


def _m_sign_counters(point: HPoint, blk: str):
    """m(i) = #{j in block : h_j < h_i}; m(a,b) = #negative h_i + e_ab."""
    row = point.h[blk]
    m_i = [sum(1 for w in row if w < v) for v in row]
    return m_i


def b_matrix(point: HPoint) -> np.ndarray:
    """The sparse transfer matrix b (rows i, columns j, 1-based blocks).

    Within the block of i the entries are signed powers of -h_i; the only
    off-block entries sit in the top column t(b) of each cover successor
    b and carry (h_i + e)^{-1} with the chamber sign.
    """
    p = point.poset
    n = p.n
    b = np.zeros((n, n))
    for blk in p.elements:
        row_vals = point.h[blk]
        rng = p.index_range(blk)
        s = rng.start
        m_i = _m_sign_counters(point, blk)
        for pos, i in enumerate(rng):
            hi = row_vals[pos]
            sign_i = (-1.0) ** m_i[pos]
            for j in rng:
                b[i - 1, j - 1] = sign_i * (-hi) ** (j - s)
            for nxt in p.succ[blk]:
                e = point.e[(blk, nxt)]
                m_ab = sum(1 for v in row_vals if v + e < 0)
                t_next = p.index_range(nxt).stop - 1
                b[i - 1, t_next - 1] = (-1.0) ** (m_i[pos] - 1 + m_ab) / (hi + e)
    return b


def f_matrix(point: HPoint) -> np.ndarray:
    """Inverse-side matrix f; (f) (a_i b_{ij}) is the identity.

    Row i (in block a) holds |u_a| S_{t(a)-i} over the block with column
    j's value deleted, and for every j in a strict successor the value
    |u_a| sum_m e^m S_{t(a)-i-m}(h; a) with e toward that successor.
    """
    p = point.poset
    n = p.n
    f = np.zeros((n, n))
    for blk in p.elements:
        row_vals = point.h[blk]
        rng = p.index_range(blk)
        t = rng.stop - 1
        u = abs(block_u(point, blk))
        for pos, i in enumerate(rng):
            deg = t - i
            for q, j in enumerate(rng):
                others = [row_vals[r] for r in range(len(row_vals)) if r != q]
                f[i - 1, j - 1] = u * elementary_symmetric(others, deg)
            for nxt in p.succ[blk]:
                e = point.e[(blk, nxt)]
                val = sum((e ** mm) * elementary_symmetric(row_vals, deg - mm)
                          for mm in range(deg + 1))
                for g in p.elements:
                    if p.leq(nxt, g):
                        for j in p.index_range(g):
                            f[i - 1, j - 1] = u * val
    return f


def generating_weights(point: HPoint, blk: str, lam: float,
                       pole_rtol: float = 1e-9) -> np.ndarray:
    """Diagonal weights of the lambda-polynomial of block ``blk``.

    Index j inside the block gets |u| * prod over the other positions of
    (h - lambda); indices in strict successors through b get the shared
    branch weight |u| * [prod (h + e_b) - prod (h - lambda)] / (e_b +
    lambda), whose removable pole at lambda = -e_b is evaluated by the
    derivative of the product.
    """
    p = point.poset
    n = p.n
    u = abs(block_u(point, blk))
    row = point.h[blk]
    w = np.zeros(n)
    rng = p.index_range(blk)
    for pos, j in enumerate(rng):
        prod = 1.0
        for q, hv in enumerate(row):
            if q != pos:
                prod *= hv - lam
        w[j - 1] = u * prod
    for nxt in p.succ[blk]:
        e = point.e[(blk, nxt)]
        denom = e + lam
        scale = max(abs(e), abs(lam), 1.0)
        if abs(denom) <= pole_rtol * scale:
            if abs(denom) > 0 and abs(denom) > 1e-13 * scale:
                raise PoleAtLambda(
                    f"lambda within the pole guard band of -e toward {nxt!r};"
                    " evaluate exactly at -e for the limit")
            # limit value: d/dlambda of -prod(h - lambda) at lambda = -e
            val = sum(math.prod(hv + e for q, hv in enumerate(row) if q != pos)
                      for pos in range(len(row)))
        else:
            val = (math.prod(hv + e for hv in row)
                   - math.prod(hv - lam for hv in row)) / denom
        for g in p.elements:
            if p.leq(nxt, g):
                for j in p.index_range(g):
                    w[j - 1] = u * val
    return w
