"""Fundamental, conjunction, and scaling constants.

Everything here is exact: values are :class:`fractions.Fraction`, because
the admissibility conditions are integrality statements that must be
decided, not approximated.  Floats only appear downstream in the analytic
layer.

Keys:  ``c[a]`` is the row ``(c_{a,0}, ..., c_{a,|a|})`` normalised to
``1 = c_0 > ... > c_{|a|} = 0``; ``e[(b, a)]`` couples block ``b`` to a
cover successor ``a`` and extends to any block above ``a`` along the
chain; ``d[a]`` is the nonzero scaling constant of the block.  The derived
transition numbers ``m[(a, nu)]`` (non-minimal ``a``, ``0 <= nu <=
|pred(a)|``) drive the lattice recursion.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .errors import (
    InconsistentSiblings,
    MissingPredecessorConstants,
    ValidationError,
)
from .poset import Poset

Q = Fraction


def as_fraction(x) -> Fraction:
    """Exact conversion: ints, Fractions, 'p/q' / decimal strings; floats
    are accepted only when they are exactly representable decimals."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Q(x)
    if isinstance(x, str):
        return Q(x)
    if isinstance(x, float):
        return Q(repr(x))  # shortest decimal that round-trips
    raise TypeError(f"cannot convert {x!r} to an exact rational")


@dataclass(frozen=True)
class ConstantBundle:
    poset: Poset
    c: dict[str, tuple[Fraction, ...]]
    e: dict[tuple[str, str], Fraction]
    d: dict[str, Fraction]

    def e_between(self, lo: str, hi: str) -> Fraction:
        """Conjunction constant for lo < hi; constant along upward chains,
        so it is looked up through the cover successor of lo below hi."""
        p = self.poset
        if not p.lt(lo, hi):
            raise KeyError((lo, hi))
        step = p.chain_between(lo, hi)[0]
        return self.e[(lo, step)]

    def eps(self, a: str) -> int:
        return 1 if self.d[a] > 0 else -1

    @property
    def m(self) -> dict[tuple[str, int], Fraction]:
        return m_from_constants(self.poset, self.c, self.e, self.d)


def m_from_constants(poset: Poset, c, e, d) -> dict[tuple[str, int], Fraction]:
    """Transition numbers of every non-minimal block.

    m_{a,nu} = (d_p / d_a) * prod_{mu != nu} (c_{p,mu} + e_{pa})   with
    p the immediate predecessor of a and 0 <= nu <= |p|.
    """
    m: dict[tuple[str, int], Fraction] = {}
    for a in poset.elements:
        p = poset.pred[a]
        if p is None:
            continue
        if p not in c or (p, a) not in e:
            raise MissingPredecessorConstants(f"block {a!r} needs c-row of {p!r} and e[({p!r},{a!r})]")
        row = c[p]
        epa = e[(p, a)]
        ratio = Q(d[p]) / Q(d[a])
        k = poset.size[p]
        for nu in range(k + 1):
            prod = Q(1)
            for mu in range(k + 1):
                if mu != nu:
                    prod *= row[mu] + epa
            m[(a, nu)] = ratio * prod
    return m


def constants_from_m(poset: Poset, m, d_minimal=None, c_maximal=None,
                     allow_decreasing=False) -> ConstantBundle:
    """Invert the transition numbers.

    For a non-maximal block b with successor a:
        e_{ba}   = m_{a,0} / (m_{a,|b|} - m_{a,0})
        c_{b,nu} = (m_{a,0}/m_{a,nu}) (m_{a,|b|}-m_{a,nu}) / (m_{a,|b|}-m_{a,0})
        d_b/d_a  = m_{a,0} / prod_{mu>=1} (c_{b,mu} + e_{ba})

    Free data passed through: ``d_minimal[a]`` for minimal blocks
    (default 1) and ``c_maximal[a]`` rows for maximal blocks (default
    evenly spaced).  Rows must be increasing per admissibility; a
    decreasing row is rejected unless ``allow_decreasing``, in which case
    the caller is expected to canonicalise via :func:`dual_involution`.
    Raises :class:`InconsistentSiblings` when two successors of one block
    induce different c-rows.
    """
    d_minimal = dict(d_minimal or {})
    c_maximal = dict(c_maximal or {})
    m = {k: as_fraction(v) for k, v in m.items()}

    for a in poset.elements:
        p = poset.pred[a]
        if p is None:
            continue
        k = poset.size[p]
        row = [m[(a, nu)] for nu in range(k + 1)]
        if any(v <= 0 for v in row):
            raise ValidationError([{"code": "NonPositiveM", "detail": f"m-row of {a!r} must be positive"}])
        increasing = all(row[i] < row[i + 1] for i in range(k))
        decreasing = all(row[i] > row[i + 1] for i in range(k))
        if not increasing and not (decreasing and allow_decreasing):
            raise ValidationError([{
                "code": "NonMonotoneM",
                "detail": f"m-row of {a!r} must be strictly increasing"
                          " (or decreasing with the dual orientation flag)",
            }])

    c: dict[str, tuple[Fraction, ...]] = {}
    e: dict[tuple[str, str], Fraction] = {}
    d: dict[str, Fraction] = {}

    for b in poset.elements:
        if not poset.succ[b]:
            k = poset.size[b]
            row = c_maximal.get(b)
            if row is None:
                row = tuple(Q(k - nu, k) for nu in range(k + 1))
            else:
                row = tuple(as_fraction(x) for x in row)
            c[b] = row
        else:
            k = poset.size[b]
            rows = {}
            for a in poset.succ[b]:
                m0, mk = m[(a, 0)], m[(a, k)]
                rows[a] = tuple(
                    (m0 / m[(a, nu)]) * (mk - m[(a, nu)]) / (mk - m0)
                    for nu in range(k + 1))
            vals = list(rows.values())
            for a, row in rows.items():
                if row != vals[0]:
                    raise InconsistentSiblings(
                        f"successors of {b!r} induce different c-rows")
            c[b] = vals[0]
            for a in poset.succ[b]:
                e[(b, a)] = m[(a, 0)] / (m[(a, k)] - m[(a, 0)])

    # d: free on minimal blocks, then propagate upward along covers
    for a in poset.elements:
        p = poset.pred[a]
        if p is None:
            d[a] = as_fraction(d_minimal.get(a, 1))
    for a in poset.elements:
        p = poset.pred[a]
        if p is None:
            continue
        k = poset.size[p]
        prod = Q(1)
        for mu in range(1, k + 1):
            prod *= c[p][mu] + e[(p, a)]
        # m_{a,0} = (d_p/d_a) * prod  =>  d_a = d_p * prod / m_{a,0}
        d[a] = d[p] * prod / m[(a, 0)]

    return ConstantBundle(poset=poset, c=c, e=e, d=d)


def dual_involution(bundle: ConstantBundle, block: str) -> ConstantBundle:
    """Flip the orientation of one block: reverse its c-row through
    c' = 1 - c_reversed, replace e' = -1 - e toward every successor, and
    negate d of blocks strictly above when the block size is odd.
    Applying the flip twice is the identity."""
    p = bundle.poset
    k = p.size[block]
    c = dict(bundle.c)
    c[block] = tuple(1 - bundle.c[block][k - nu] for nu in range(k + 1))
    e = dict(bundle.e)
    for a in p.succ[block]:
        e[(block, a)] = -1 - bundle.e[(block, a)]
    d = dict(bundle.d)
    if k % 2 == 1:
        for g in p.elements:
            if p.lt(block, g):
                d[g] = -d[g]
    return ConstantBundle(poset=p, c=c, e=e, d=d)


def validate_compatibility(poset: Poset, bundle: ConstantBundle,
                           lattice=None) -> dict:
    """Full admissibility report for a bundle.

    Checks, exactly over the rationals:
      * normalisation of every c-row (1 = c_0 > ... > c_k = 0);
      * every conjunction constant is > 0 or < -1, and constant along
        upward chains;
      * scaling constants nonzero;
      * m-rows positive and strictly monotone, differences m_nu - m_0
        integral, chain products integral, sibling consistency;
      * when a lattice is supplied, the divisibility ledger tying the
        chain products of m_0's to the primitive index of each relation
        vector.
    Returns {"ok": bool, "violations": [...], "m": ..., "l": ...}.
    """
    violations = []
    for a in poset.elements:
        k = poset.size[a]
        row = bundle.c.get(a)
        if row is None or len(row) != k + 1:
            violations.append({"code": "MissingCRow", "detail": f"c-row of {a!r} absent or wrong length", "block": a})
            continue
        if row[0] != 1 or row[k] != 0:
            violations.append({"code": "CRowNotNormalized", "detail": f"c-row of {a!r} must run from 1 to 0", "block": a})
        if any(row[i] <= row[i + 1] for i in range(k)):
            violations.append({"code": "CRowNotDecreasing", "detail": f"c-row of {a!r} must strictly decrease", "block": a})
    for (lo, hi), val in bundle.e.items():
        if not (val > 0 or val < -1):
            violations.append({"code": "ConjunctionOutOfRange",
                               "detail": f"e[({lo!r},{hi!r})] = {val} not in (0,inf) or (-inf,-1)",
                               "block": hi})
    for a in poset.elements:
        if bundle.d.get(a, 0) == 0:
            violations.append({"code": "ZeroScaling", "detail": f"d[{a!r}] must be nonzero", "block": a})

    m = None
    if not violations:
        m = m_from_constants(poset, bundle.c, bundle.e, bundle.d)
        for a in poset.elements:
            p = poset.pred[a]
            if p is None:
                continue
            k = poset.size[p]
            row = [m[(a, nu)] for nu in range(k + 1)]
            if any(v <= 0 for v in row):
                violations.append({"code": "NonPositiveM", "detail": f"m-row of {a!r} not positive", "block": a})
            if not (all(row[i] < row[i + 1] for i in range(k)) or
                    all(row[i] > row[i + 1] for i in range(k))):
                violations.append({"code": "NonMonotoneM", "detail": f"m-row of {a!r} not strictly monotone", "block": a})
            for nu in range(1, k + 1):
                if (row[nu] - row[0]).denominator != 1:
                    violations.append({
                        "code": "NonIntegralDifference",
                        "detail": f"m[{a!r},{nu}] - m[{a!r},0] = {row[nu] - row[0]} is not an integer",
                        "block": a, "nu": nu,
                    })
        # chain products: prod_{b < g <= a} m_{g,0} * (m_{b,nu} - m_{b,0})
        for b in poset.elements:
            if poset.pred[b] is None:
                continue
            kb = poset.size[poset.pred[b]]
            for a in poset.elements:
                if not poset.lt(b, a):
                    continue
                prod = Q(1)
                for g in poset.chain_between(b, a):
                    prod *= m[(g, 0)]
                for nu in range(1, kb + 1):
                    v = prod * (m[(b, nu)] - m[(b, 0)])
                    if v.denominator != 1:
                        violations.append({
                            "code": "NonIntegralChainProduct",
                            "detail": f"chain {b!r}->{a!r}, nu={nu}: {v} not an integer",
                            "block": b, "nu": nu,
                        })
        # sibling consistency through the inversion formulas
        for b in poset.elements:
            sibs = poset.succ[b]
            if len(sibs) < 2:
                continue
            k = poset.size[b]
            induced = []
            for a in sibs:
                m0, mk = m[(a, 0)], m[(a, k)]
                if mk == m0:
                    continue
                induced.append(tuple((m0 / m[(a, nu)]) * (mk - m[(a, nu)]) / (mk - m0)
                                     for nu in range(k + 1)))
            if any(r != induced[0] for r in induced[1:]):
                violations.append({"code": "InconsistentSiblings",
                                   "detail": f"successors of {b!r} disagree on its c-row",
                                   "block": b})

    l_report = None
    if lattice is not None and not violations:
        l_report = dict(lattice.l)
        for g in poset.elements:
            if poset.pred[g] is None:
                continue
            lg = lattice.l[g]
            for a in poset.elements:
                if not poset.lt(g, a):
                    continue
                prod = Q(1)
                for bb in poset.chain_between(g, a):
                    prod *= m[(bb, 0)]
                if (prod * lg).denominator != 1:
                    violations.append({
                        "code": "NonIntegralBundleIndex",
                        "detail": f"prod m0 over {g!r}->{a!r} times l[{g!r}]={lg} not an integer",
                        "block": g,
                    })

    return {"ok": not violations, "violations": violations, "m": m, "l": l_report}
