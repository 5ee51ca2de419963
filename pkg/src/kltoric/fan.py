"""Lattice and fan construction.

The ambient lattice has one basis vector Yt_{a,nu} per hypersurface index
(a, nu), 0 <= nu <= |a|.  Dividing by the relations

    R_a = sum_nu Yt_{a,nu} - Zt_a,

with Zt_a the integer vector determined by the transition numbers, yields
an n-dimensional lattice presented in the canonical basis
{Y_{a,nu} : nu >= 1}.  Maximal cones are indexed by sections iota (one
dropped ray per block); the fan is complete and non-singular for every
admissible bundle, which is re-verified here rather than assumed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BasisDeterminantNotUnit, NonIntegralCoefficient, NotOpenSubset
from .intlinalg import det_int, gcd_vec, inv_unimodular, mat_vec_int
from .poset import Poset, enumerate_sections, split

Q = Fraction


def _jkeys(poset: Poset) -> list[tuple[str, int]]:
    """Canonical enumeration of the hypersurface index set (size n + #blocks)."""
    return [(a, nu) for a in poset.elements for nu in range(poset.size[a] + 1)]


def _basis_keys(poset: Poset) -> list[tuple[str, int]]:
    """Canonical lattice basis: indices with nu >= 1 (the iota == 0 section)."""
    return [(a, nu) for a in poset.elements for nu in range(1, poset.size[a] + 1)]


def z_vectors(poset: Poset, bundle) -> dict:
    """Relation targets Z_a from a constants bundle; see z_vectors_from_m."""
    return z_vectors_from_m(poset, bundle.m)


def z_vectors_from_m(poset: Poset, m) -> dict:
    """Relation targets Z_a, exactly.

    Computed twice: by the one-step recursion Z_a = m_{a,0} Z_p +
    sum_nu (m_{a,nu} - m_{a,0}) Y_{p,nu} and by its expanded chain form;
    both must agree and land in the integer lattice.
    """
    basis = _basis_keys(poset)
    pos = {k: i for i, k in enumerate(basis)}
    n = len(basis)

    expanded: dict[str, list[Fraction]] = {}
    for a in poset.elements:
        vec = [Q(0)] * n
        for b in poset.elements:
            if poset.pred[b] is None or not poset.leq(b, a):
                continue
            prod = Q(1)
            for g in poset.chain_between(b, a):
                prod *= m[(g, 0)]
            p = poset.pred[b]
            for nu in range(1, poset.size[p] + 1):
                vec[pos[(p, nu)]] += prod * (m[(b, nu)] - m[(b, 0)])
        expanded[a] = vec

    recursive: dict[str, list[Fraction]] = {}
    for a in poset.elements:  # canonical order is a linear extension
        p = poset.pred[a]
        if p is None:
            recursive[a] = [Q(0)] * n
            continue
        vec = [m[(a, 0)] * x for x in recursive[p]]
        for nu in range(1, poset.size[p] + 1):
            vec[pos[(p, nu)]] += m[(a, nu)] - m[(a, 0)]
        recursive[a] = vec

    out = {}
    for a in poset.elements:
        if expanded[a] != recursive[a]:
            raise NonIntegralCoefficient(
                f"recursion and expansion disagree for Z[{a!r}] (inconsistent m-data)")
        bad = [x for x in expanded[a] if x.denominator != 1]
        if bad:
            raise NonIntegralCoefficient(
                f"Z[{a!r}] has non-integral coordinate {bad[0]}")
        out[a] = tuple(int(x) for x in expanded[a])
    return out


@dataclass(frozen=True)
class LatticeModel:
    poset: Poset
    jkeys: tuple[tuple[str, int], ...]
    basis_keys: tuple[tuple[str, int], ...]
    Y: dict[tuple[str, int], tuple[int, ...]]   # rays in the canonical basis
    Z: dict[str, tuple[int, ...]]
    Zt: dict[str, tuple[int, ...]]              # ambient coordinates
    R: dict[str, tuple[int, ...]]               # relation vectors, ambient
    l: dict[str, int | None] = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.basis_keys)

    def ray_matrix(self, keys) -> list[list[int]]:
        """Columns are the rays named by ``keys``."""
        vecs = [self.Y[k] for k in keys]
        return [[vecs[j][i] for j in range(len(vecs))] for i in range(self.n)]


def build_lattice(poset: Poset, bundle) -> LatticeModel:
    """Rays, relation vectors, and primitive indices, all exact."""
    return lattice_from_m(poset, bundle.m)


def lattice_from_m(poset: Poset, m) -> LatticeModel:
    """The lattice model needs nothing beyond the poset, the block sizes,
    and the transition numbers; constants only enter through them."""
    jkeys = _jkeys(poset)
    basis = _basis_keys(poset)
    pos = {k: i for i, k in enumerate(basis)}
    jpos = {k: i for i, k in enumerate(jkeys)}
    n = len(basis)
    Z = z_vectors_from_m(poset, m)

    Y: dict[tuple[str, int], tuple[int, ...]] = {}
    for a, nu in jkeys:
        if nu >= 1:
            vec = [0] * n
            vec[pos[(a, nu)]] = 1
            Y[(a, nu)] = tuple(vec)
    for a in poset.elements:
        vec = list(Z[a])
        for nu in range(1, poset.size[a] + 1):
            vec[pos[(a, nu)]] -= 1
        Y[(a, 0)] = tuple(vec)

    # ambient counterparts: Zt over basis directions Yt_{p,nu}, R_a = sum Yt - Zt
    Zt: dict[str, tuple[int, ...]] = {}
    for a in poset.elements:
        vec = [Q(0)] * len(jkeys)
        for b in poset.elements:
            if poset.pred[b] is None or not poset.leq(b, a):
                continue
            prod = Q(1)
            for g in poset.chain_between(b, a):
                prod *= m[(g, 0)]
            p = poset.pred[b]
            for nu in range(1, poset.size[p] + 1):
                vec[jpos[(p, nu)]] += prod * (m[(b, nu)] - m[(b, 0)])
        if any(x.denominator != 1 for x in vec):
            raise NonIntegralCoefficient(f"Zt[{a!r}] not integral")
        Zt[a] = tuple(int(x) for x in vec)
    R = {}
    for a in poset.elements:
        vec = [0] * len(jkeys)
        for nu in range(poset.size[a] + 1):
            vec[jpos[(a, nu)]] += 1
        R[a] = tuple(x - z for x, z in zip(vec, Zt[a]))

    l: dict[str, int | None] = {}
    for a in poset.elements:
        l[a] = None if poset.pred[a] is None else gcd_vec(Z[a])

    model = LatticeModel(poset=poset, jkeys=tuple(jkeys), basis_keys=tuple(basis),
                         Y=Y, Z=Z, Zt=Zt, R=R, l=l)

    for a in poset.elements:
        s = [0] * n
        for nu in range(poset.size[a] + 1):
            s = [x + y for x, y in zip(s, Y[(a, nu)])]
        if tuple(s) != Z[a]:
            raise BasisDeterminantNotUnit(f"ray relation fails for block {a!r}")
    for key, vec in Y.items():
        if gcd_vec(vec) != 1:
            raise BasisDeterminantNotUnit(f"ray {key!r} is not primitive")
    for iota in enumerate_sections(poset):
        keys = section_keys(poset, iota)
        if abs(det_int(model.ray_matrix(keys))) != 1:
            raise BasisDeterminantNotUnit(f"cone basis for section {iota!r} not unimodular")
    return model


def section_keys(poset: Poset, iota) -> list[tuple[str, int]]:
    return [(a, nu) for a in poset.elements
            for nu in range(poset.size[a] + 1) if nu != iota[a]]


@dataclass(frozen=True)
class Fan:
    lattice: LatticeModel
    sections: tuple[dict, ...]
    cones: tuple[tuple[tuple[str, int], ...], ...]  # generator key sets
    smooth: bool
    complete: bool
    completeness_evidence: dict = field(repr=False)

    @property
    def rays(self):
        return self.lattice.Y


def build_fan(model: LatticeModel, sample_seed: int = 0,
              n_random_samples: int = 1000) -> Fan:
    """Assemble the maximal cones and verify smoothness/completeness.

    Smoothness: every maximal-cone generator matrix has determinant +-1.
    Completeness: (a) every facet of a maximal cone is a wall between
    exactly two maximal cones lying on opposite sides, and (b) a
    deterministic sample of covectors -- all +-1 sign patterns plus seeded
    random integer vectors -- each lies in at least one maximal cone
    (membership decided exactly through the integer inverse of the cone
    basis).
    """
    poset = model.poset
    sections = enumerate_sections(poset)
    cone_keys = [tuple(section_keys(poset, iota)) for iota in sections]

    smooth = True
    inverses = []
    for keys in cone_keys:
        mat = model.ray_matrix(keys)
        if abs(det_int(mat)) != 1:
            smooth = False
            inverses.append(None)
        else:
            inverses.append(inv_unimodular(mat))

    # facet pairing: dropping one generator of sigma_iota leaves a wall that
    # must be shared with exactly one other maximal cone, on the other side
    walls_ok = True
    cone_sets = [frozenset(k) for k in cone_keys]
    for ci, keys in enumerate(cone_keys):
        for drop in keys:
            facet = cone_sets[ci] - {drop}
            others = [cj for cj, s in enumerate(cone_sets) if cj != ci and facet <= s]
            if len(others) != 1:
                walls_ok = False
                continue
            cj = others[0]
            opp = next(iter(cone_sets[cj] - facet))
            if inverses[ci] is None:
                continue
            # normal coordinate of the opposite ray must be negative
            row = [inverses[ci][keys.index(drop)][i] for i in range(model.n)]
            val = sum(r * y for r, y in zip(row, model.Y[opp]))
            if val >= 0:
                walls_ok = False

    # sampled covering check
    n = model.n
    samples = [tuple(signs) for signs in itertools.product((-1, 1), repeat=n)]
    rng = np.random.default_rng(sample_seed)
    while len(samples) < 2 ** n + n_random_samples:
        v = tuple(int(x) for x in rng.integers(-9, 10, size=n))
        if any(v):
            samples.append(v)
    uncovered = []
    for v in samples:
        hit = False
        for inv in inverses:
            if inv is None:
                continue
            if all(c >= 0 for c in mat_vec_int(inv, list(v))):
                hit = True
                break
        if not hit:
            uncovered.append(v)

    complete = walls_ok and not uncovered
    return Fan(lattice=model, sections=tuple(sections), cones=tuple(cone_keys),
               smooth=smooth, complete=complete,
               completeness_evidence={
                   "samples": len(samples),
                   "uncovered": uncovered[:5],
                   "walls_paired": walls_ok,
               })


@dataclass(frozen=True)
class FibrationData:
    subset: tuple[str, ...]
    complement: tuple[str, ...]
    gamma_prime_keys: tuple[tuple[str, int], ...]   # basis directions spanning Gamma'
    fibre_cones: tuple[tuple[tuple[str, int], ...], ...]
    base_rays: dict[tuple[str, int], tuple[int, ...]]
    base_cones: tuple[tuple[tuple[str, int], ...], ...]
    psi: dict[str, tuple[int, ...]]     # generator a in complement -> vector in Gamma'
    curvature: tuple[dict, ...]
    integrality_ok: bool


def split_fibration(model: LatticeModel, bundle, subset) -> FibrationData:
    """Sub-fan, quotient fan, classifying homomorphism, and curvature data
    for a downward-closed subset of blocks.

    The classifying map sends the image of each relation vector R_a
    (a outside the subset) to  (prod m_{b,0} over the chain) * Z_{a0},
    with a0 the minimal element of the complement component below a; the
    formula is recomputed here by exact projection of R_a and compared.
    """
    poset = model.poset
    parts = split(poset, subset)   # raises NotOpenSubset when not open
    sub = parts["subset"]
    rest = parts["complement"]
    m = bundle.m

    sub_names = set(sub.elements) if sub else set()
    rest_names = set(rest.elements) if rest else set()

    gamma_prime = tuple(k for k in model.basis_keys if k[0] in sub_names)
    prime_pos = {k: i for i, k in enumerate(model.basis_keys)}

    # fibre fan: cones of Delta inside the span of Gamma'
    fibre_cones = []
    if sub is not None:
        for iota in enumerate_sections(sub):
            fibre_cones.append(tuple(section_keys(sub, iota)))

    # base fan: project out the Gamma' coordinates
    base_keys = [k for k in model.basis_keys if k[0] in rest_names]
    base_idx = [prime_pos[k] for k in base_keys]
    base_rays = {}
    for a, nu in model.jkeys:
        if a in rest_names:
            vec = model.Y[(a, nu)]
            base_rays[(a, nu)] = tuple(vec[i] for i in base_idx)
    base_cones = []
    if rest is not None:
        for iota in enumerate_sections(rest):
            base_cones.append(tuple(section_keys(rest, iota)))

    # classifying homomorphism on the generators pi(R_a), a in complement
    psi = {}
    ok = True
    for a in (rest.elements if rest else ()):
        a0 = a
        while poset.pred[a0] is not None and poset.pred[a0] in rest_names:
            a0 = poset.pred[a0]
        prod = Q(1)
        for g in poset.chain_between(a0, a):
            prod *= m[(g, 0)]
        formula = [prod * z for z in model.Z[a0]]
        if any(x.denominator != 1 for x in formula):
            raise NonIntegralCoefficient(
                f"classifying image of R[{a!r}] is not integral")
        # independent route: negate the Gamma'-part of R_a and push to Gamma
        proj = [Q(0)] * model.n
        for j, key in enumerate(model.jkeys):
            coef = model.R[a][j]
            if coef and key[0] in sub_names:
                for i in range(model.n):
                    proj[i] -= coef * model.Y[key][i]
        if [int(x) for x in formula] != [int(x) for x in proj]:
            ok = False
        psi[a] = tuple(int(x) for x in formula)

    # curvature coefficients per complement component, plus the
    # divisibility ledger for the chain products of m_0's
    curvature = []
    integrality_ok = True
    for comp in (parts["complement_components"] or []):
        a_s = comp["minimum"]
        d = bundle.d[a_s]
        d_pp = abs(d)
        z = model.Z[a_s]
        l_s = model.l[a_s]
        curvature.append({"component": comp["blocks"], "minimum": a_s,
                          "coefficient": d_pp, "Z": z, "l": l_s})
        if l_s is None:
            continue  # Z = 0: flat factor, nothing to divide
        for a in comp["blocks"]:
            prod = Q(1)
            for g in poset.chain_between(a_s, a):
                prod *= m[(g, 0)]
            if (prod * l_s).denominator != 1:
                integrality_ok = False

    if not ok:
        raise NonIntegralCoefficient("projected relation vectors disagree with the classifying formula")

    return FibrationData(
        subset=tuple(sub.elements) if sub else (),
        complement=tuple(rest.elements) if rest else (),
        gamma_prime_keys=gamma_prime,
        fibre_cones=tuple(fibre_cones),
        base_rays=base_rays,
        base_cones=tuple(base_cones),
        psi=psi,
        curvature=tuple(curvature),
        integrality_ok=integrality_ok,
    )
