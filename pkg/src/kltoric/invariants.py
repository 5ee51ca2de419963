"""Divisor-class data: Picard coordinates, curve pairings, the Kähler
class, and cell counts.

The divisor class group is the cokernel of the dual restriction map from
the quotient-lattice covectors into the ambient covectors; it is free with
one generator zeta_a per block (the class of the divisor attached to the
ray (a, 0)).  Curve classes come from codimension-one cones via the
wall-crossing relation between the two maximal cones that share them.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import ConeNotWall
from .fan import LatticeModel, section_keys
from .intlinalg import solve_fractions
from .poset import Poset, enumerate_sections

Q = Fraction


def picard_reduce(model: LatticeModel, xi: dict) -> dict[str, int]:
    """Coordinates of an ambient covector's class in the basis {zeta_a}.

    xi maps (block, nu) keys to integers.  The class is found by
    subtracting the pullback of the quotient covector that matches xi on
    the canonical basis directions; what is left is supported on the
    (a, 0) directions.
    """
    poset = model.poset
    xi = {k: int(xi.get(k, 0)) for k in model.jkeys}
    eta = {k: xi[k] for k in model.basis_keys}  # covector on the quotient

    coords = {}
    for a in poset.elements:
        pair_z = sum(eta[k] * z for k, z in zip(model.basis_keys, model.Z[a]))
        coords[a] = xi[(a, 0)] + sum(xi[(a, nu)] for nu in range(1, poset.size[a] + 1)) - pair_z
    return coords


def _wall_curve(model: LatticeModel, b: str) -> dict:
    """Intersection numbers of every ray divisor with the curve of the
    wall tau(b): rays nu >= 1 everywhere except nu >= 2 on block b."""
    poset = model.poset
    wall = [(g, nu) for g in poset.elements
            for nu in range(1, poset.size[g] + 1) if not (g == b and nu == 1)]
    u1, u2 = (b, 1), (b, 0)

    # the two maximal cones containing the wall are iota == 0 and the one
    # with iota(b) = 1; anything else means the fan is broken
    holders = []
    for iota, keys in zip(model_sections(model), model_cones(model)):
        if set(wall) <= set(keys):
            holders.append(iota)
    if len(holders) != 2:
        raise ConeNotWall(f"wall for block {b!r} contained in {len(holders)} maximal cones")

    # relation u1 + u2 + sum_w c_w w = 0 determines the curve numbers
    cols = wall + [u1]
    mat = model.ray_matrix(cols)
    rhs = [-(y1 + y2) for y1, y2 in zip(model.Y[u1], model.Y[u2])]
    sol = solve_fractions(mat, rhs)
    coeff_u1 = sol[-1] + 1  # move u1's share back: c_{u1} = 1 requires sol = 0
    if coeff_u1 != 1:
        raise ConeNotWall(f"wall relation for {b!r} does not close with unit coefficients")
    numbers = {k: sol[i] for i, k in enumerate(wall)}
    numbers[u1] = Q(1)
    numbers[u2] = Q(1)
    for k in model.jkeys:
        numbers.setdefault(k, Q(0))
    return numbers


def model_sections(model: LatticeModel):
    return enumerate_sections(model.poset)


def model_cones(model: LatticeModel):
    return [tuple(section_keys(model.poset, iota)) for iota in model_sections(model)]


def pair_divisor_with_curve(model: LatticeModel, xi: dict, b: str) -> Fraction:
    curve = _wall_curve(model, b)
    return sum(Q(xi.get(k, 0)) * curve[k] for k in model.jkeys)


def chern_pairing(model: LatticeModel) -> list[list[Fraction]]:
    """Matrix <zeta_a, curve(b)>; the identity for every valid model."""
    poset = model.poset
    out = []
    for a in poset.elements:
        xi = {(a, 0): 1}
        out.append([pair_divisor_with_curve(model, xi, b) for b in poset.elements])
    return out


def kahler_class(poset: Poset, bundle, model: LatticeModel) -> dict:
    """Cohomology class of the Kähler form and the curve periods.

    Both are exact rationals with the overall 2*pi factored out:
    ``period[a] = (1/d_a) prod_{b<a} prod_nu (c_{b,nu} + e_{ba})`` and the
    class is ``sum_s (1/d_{a_s}) (zeta_{a_s} + sum_{a>a_s} prod m_0 *
    zeta_a)`` over the component minima a_s.  Consistency of the two via
    the curve pairing is asserted here, exactly.
    """
    m = bundle.m
    coeffs = {a: Q(0) for a in poset.elements}
    for comp in poset.components():
        a_s = comp[0]
        assert poset.pred[a_s] is None
        inv_d = 1 / Q(bundle.d[a_s])
        coeffs[a_s] += inv_d
        for a in comp:
            if a == a_s:
                continue
            prod = Q(1)
            for g in poset.chain_between(a_s, a):
                prod *= m[(g, 0)]
            coeffs[a] += inv_d * prod

    periods = {}
    for a in poset.elements:
        val = 1 / Q(bundle.d[a])
        for b in poset.downset_chain(a):
            e = bundle.e_between(b, a)
            for nu in range(1, poset.size[b] + 1):
                val *= bundle.c[b][nu] + e
        periods[a] = val

    pairing = chern_pairing(model)
    for j, b in enumerate(poset.elements):
        paired = sum(coeffs[a] * pairing[i][j] for i, a in enumerate(poset.elements))
        if paired != periods[b]:
            raise AssertionError(
                f"class pairing {paired} disagrees with period {periods[b]} on {b!r}")
    return {"class": coeffs, "periods": periods}


def cell_counts(poset: Poset) -> dict:
    """Euler number and per-dimension cell counts of the model.

    The count of 2k-cells is the number of sections with weight k, i.e.
    the coefficient of x^k in prod_a (1 + x + ... + x^{|a|}).
    """
    coeffs = [1]
    for a in poset.elements:
        k = poset.size[a]
        new = [0] * (len(coeffs) + k)
        for i, ci in enumerate(coeffs):
            for j in range(k + 1):
                new[i + j] += ci
        coeffs = new
    return {"euler": sum(coeffs), "cells_2k": coeffs}
