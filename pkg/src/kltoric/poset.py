"""Partially ordered block structure.

A model is seeded by a finite poset of "blocks", each carrying a positive
size.  Admissible posets have the property that the strict downset of any
block is a chain, so every non-minimal block has a unique immediate
predecessor and the Hasse diagram is a forest growing upward from the
minimal elements.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import NotOpenSubset, ValidationError


@dataclass(frozen=True)
class Poset:
    """Validated block poset with derived order data.

    ``elements`` is in canonical order (a topological sort refined
    lexicographically); all downstream enumerations follow it.  Frame
    indices 1..n are assigned to blocks consecutively in this order.
    """

    elements: tuple[str, ...]
    size: dict[str, int]
    covers: tuple[tuple[str, str], ...]
    below: dict[str, frozenset[str]] = field(repr=False)  # strict downsets
    pred: dict[str, str | None] = field(repr=False)
    succ: dict[str, tuple[str, ...]] = field(repr=False)  # cover successors

    # -- order relation ------------------------------------------------------

    def leq(self, a: str, b: str) -> bool:
        return a == b or a in self.below[b]

    def lt(self, a: str, b: str) -> bool:
        return a in self.below[b]

    def chain_between(self, a: str, b: str) -> tuple[str, ...]:
        """Blocks g with a < g <= b, in increasing order."""
        if not self.lt(a, b):
            return ()
        out = []
        g = b
        while g != a:
            out.append(g)
            g = self.pred[g]
        return tuple(reversed(out))

    def downset_chain(self, a: str) -> tuple[str, ...]:
        """Blocks strictly below ``a``, in increasing order."""
        out = []
        g = self.pred[a]
        while g is not None:
            out.append(g)
            g = self.pred[g]
        return tuple(reversed(out))

    # -- derived structure ----------------------------------------------------

    @property
    def n(self) -> int:
        return sum(self.size.values())

    @property
    def maximal(self) -> tuple[str, ...]:
        return tuple(a for a in self.elements if not self.succ[a])

    @property
    def minimal(self) -> tuple[str, ...]:
        return tuple(a for a in self.elements if self.pred[a] is None)

    @property
    def is_kl_a(self) -> bool:
        return all(self.size[a] >= 2 for a in self.maximal)

    def components(self) -> tuple[tuple[str, ...], ...]:
        """Connected components of the comparability graph, each listed in
        canonical order.  Every component has a unique minimal element."""
        parent = {a: a for a in self.elements}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for lo, hi in self.covers:
            parent[find(lo)] = find(hi)
        groups: dict[str, list[str]] = {}
        for a in self.elements:
            groups.setdefault(find(a), []).append(a)
        comps = sorted(groups.values(), key=lambda g: self.elements.index(g[0]))
        return tuple(tuple(g) for g in comps)

    def component_minimum(self, a: str) -> str:
        """The unique minimal element of the component containing ``a``."""
        g = a
        while self.pred[g] is not None:
            g = self.pred[g]
        return g

    # -- frame index bookkeeping ----------------------------------------------

    def index_range(self, a: str) -> range:
        """1-based frame indices covered by block ``a`` (s..t inclusive)."""
        s = 1
        for b in self.elements:
            if b == a:
                return range(s, s + self.size[a])
            s += self.size[b]
        raise KeyError(a)

    def block_of_index(self, i: int) -> str:
        s = 1
        for b in self.elements:
            if s <= i < s + self.size[b]:
                return b
            s += self.size[b]
        raise IndexError(i)


def _canonical_order(elements, covers_map, size):
    """Topological sort (minimal first), ties broken by identifier."""
    preds = {a: set() for a in elements}
    for lo, ups in covers_map.items():
        for up in ups:
            preds[up].add(lo)
    ready = sorted(a for a in elements if not preds[a])
    order = []
    while ready:
        a = ready.pop(0)
        order.append(a)
        newly = []
        for b in elements:
            if b not in order and b not in ready and a in preds[b]:
                preds[b].discard(a)
                if not preds[b]:
                    newly.append(b)
        ready = sorted(ready + newly)
    return order


def validate_poset(elements, sizes, covers, require_kl_a=True) -> Poset:
    """Check the order axioms and return the canonical :class:`Poset`.

    Collects all violations (cycles, diamond downsets, undersized maximal
    blocks when ``require_kl_a``) and raises :class:`ValidationError`
    listing every one of them; structural problems in the raw input
    (unknown names, non-positive sizes) are reported the same way.
    """
    violations = []
    elements = list(elements)
    if not elements:
        violations.append({"code": "EmptyPoset", "detail": "no blocks given"})
        raise ValidationError(violations)
    if len(set(elements)) != len(elements):
        violations.append({"code": "DuplicateBlock", "detail": "repeated block identifier"})
    for a in elements:
        if sizes.get(a, 0) < 1:
            violations.append({"code": "BadSize", "detail": f"size of {a!r} must be >= 1"})
    for lo, hi in covers:
        if lo not in sizes or hi not in sizes or lo not in elements or hi not in elements:
            violations.append({"code": "UnknownBlock", "detail": f"cover ({lo!r}, {hi!r}) references unknown block"})
        elif lo == hi:
            violations.append({"code": "CycleDetected", "detail": f"self-cover on {lo!r}"})
    if violations:
        raise ValidationError(violations)

    up = {a: set() for a in elements}
    for lo, hi in covers:
        up[lo].add(hi)

    # transitive closure by DFS; a block reachable from itself is a cycle
    below = {a: set() for a in elements}
    color = {a: 0 for a in elements}
    cyclic = False

    def dfs(a):
        nonlocal cyclic
        color[a] = 1
        for b in up[a]:
            if color[b] == 1:
                cyclic = True
                continue
            if color[b] == 0:
                dfs(b)
            below[b].add(a)
            below[b].update(below[a] - {b})
        color[a] = 2

    for a in elements:
        if color[a] == 0:
            dfs(a)
    # propagate until stable (DFS above misses paths through shared nodes)
    changed = True
    while changed and not cyclic:
        changed = False
        for lo, hi in covers:
            add = (below[lo] | {lo}) - below[hi]
            if add:
                below[hi].update(add)
                changed = True
        for a in elements:
            if a in below[a]:
                cyclic = True
    if cyclic:
        violations.append({"code": "CycleDetected", "detail": "cover relation contains a cycle"})
        raise ValidationError(violations)

    # each strict downset must be a chain
    for a in elements:
        down = sorted(below[a])
        for x, y in itertools.combinations(down, 2):
            if not (x in below[y] or y in below[x]):
                violations.append({
                    "code": "DownsetNotChain",
                    "detail": f"{x!r} and {y!r} are incomparable below {a!r}",
                })
                break

    order = _canonical_order(elements, up, sizes)
    succ = {a: tuple(b for b in order if a in below[b] and
                     not any(g in below[b] and a in below[g] for g in elements))
            for a in order}
    pred = {}
    for a in order:
        down = [b for b in order if b in below[a]]
        if not down:
            pred[a] = None
        else:
            # maximal element of the (chain) downset
            top = down[0]
            for b in down[1:]:
                if top in below[b]:
                    top = b
            pred[a] = top

    if require_kl_a:
        for a in order:
            if not succ[a] and sizes[a] < 2:
                violations.append({
                    "code": "MaximalBlockTooSmall",
                    "detail": f"maximal block {a!r} has size {sizes[a]} < 2",
                })
    if violations:
        raise ValidationError(violations)

    return Poset(
        elements=tuple(order),
        size={a: int(sizes[a]) for a in order},
        covers=tuple(sorted((lo, hi) for lo, hi in covers)),
        below={a: frozenset(below[a]) for a in order},
        pred=pred,
        succ=succ,
    )


def enumerate_sections(poset: Poset) -> list[dict[str, int]]:
    """All assignments a -> iota(a) in 0..|a|, lexicographic in canonical
    block order.  There are prod(|a|+1) of them."""
    ranges = [range(poset.size[a] + 1) for a in poset.elements]
    return [dict(zip(poset.elements, combo)) for combo in itertools.product(*ranges)]


def split(poset: Poset, subset) -> dict:
    """Split along a downward-closed subset.

    Returns the induced posets on the subset and its complement together
    with their connected components (each tagged with its minimal
    element).  Raises :class:`NotOpenSubset` if some member has a
    predecessor outside the subset.
    """
    sub = set(subset)
    unknown = sub - set(poset.elements)
    if unknown:
        raise NotOpenSubset(f"unknown blocks {sorted(unknown)!r}")
    for b in sub:
        outside = poset.below[b] - sub
        if outside:
            raise NotOpenSubset(
                f"{sorted(outside)[0]!r} lies below {b!r} but is not in the subset")

    def induced(names):
        names = [a for a in poset.elements if a in names]
        cov = [(lo, hi) for lo, hi in poset.covers if lo in names and hi in names]
        return validate_poset(names, {a: poset.size[a] for a in names}, cov,
                              require_kl_a=False) if names else None

    prime = induced(sub)
    rest = induced(set(poset.elements) - sub)

    def comp_info(p):
        if p is None:
            return []
        return [{"blocks": list(c), "minimum": p.component_minimum(c[0])}
                for c in p.components()]

    return {
        "subset": prime,
        "complement": rest,
        "subset_components": comp_info(prime),
        "complement_components": comp_info(rest),
    }
