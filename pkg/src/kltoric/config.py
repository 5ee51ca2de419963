"""Configuration ingestion.

A config is one JSON document with sections for the poset, constants,
per-block seeds, simulation, and check parameters.  Rationals may be
written as integers, "p/q" strings, or decimal strings; they are parsed
exactly.  Unknown keys anywhere are rejected so typos cannot silently
change a run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .constants import ConstantBundle, as_fraction
from .errors import ParseError, SchemaError, ValidationError
from .poset import Poset, validate_poset

_TOP_KEYS = {"type", "poset", "constants", "seeds", "simulate", "check", "split"}
_POSET_KEYS = {"elements", "sizes", "covers"}
_CONST_KEYS = {"c", "e", "d"}
_SEED_KEYS = {"l", "d_star", "profile"}
_PROFILE_KEYS = {"kind", "samples"}
_SIM_KEYS = {"mode", "t_final", "rtol", "atol", "initial", "rng_seed", "count", "record_stride"}
_CHECK_KEYS = {"samples", "fd_step", "rng_seed"}
_INITIAL_KEYS = {"x", "p", "J"}


@dataclass
class Config:
    kind: str                      # "KL-A" | "KL-B"
    poset: Poset
    bundle: ConstantBundle | None
    seeds: dict[str, dict]
    simulate: dict
    check: dict
    split_subset: list[str] | None
    raw: dict = field(repr=False)


def _reject_unknown(d: dict, allowed: set, path: str):
    for key in d:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}", "unknown key")


def _rational(value, path: str) -> Fraction:
    try:
        return as_fraction(value)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise SchemaError(path, f"not an exact rational: {value!r}") from exc


def parse_config(path) -> Config:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config_dict(raw)


def parse_config_dict(raw: dict) -> Config:
    if not isinstance(raw, dict):
        raise SchemaError("$", "top level must be an object")
    _reject_unknown(raw, _TOP_KEYS, "$")

    kind = raw.get("type", "KL-A")
    if kind not in ("KL-A", "KL-B"):
        raise SchemaError("$.type", f"must be 'KL-A' or 'KL-B', got {kind!r}")

    pd = raw.get("poset")
    if not isinstance(pd, dict):
        raise SchemaError("$.poset", "required object")
    _reject_unknown(pd, _POSET_KEYS, "$.poset")
    elements = pd.get("elements")
    sizes = pd.get("sizes")
    covers = pd.get("covers", [])
    if not isinstance(elements, list) or not all(isinstance(x, str) for x in elements):
        raise SchemaError("$.poset.elements", "must be a list of strings")
    if not isinstance(sizes, dict):
        raise SchemaError("$.poset.sizes", "must map block -> positive integer")
    for i, cov in enumerate(covers):
        if (not isinstance(cov, list)) or len(cov) != 2:
            raise SchemaError(f"$.poset.covers[{i}]", "must be a [lower, upper] pair")
        if cov[0] not in elements or cov[1] not in elements:
            raise SchemaError(f"$.poset.covers[{i}]", f"unknown block in {cov!r}")
    poset = validate_poset(elements, sizes, [tuple(c) for c in covers],
                           require_kl_a=(kind == "KL-A"))

    bundle = None
    cd = raw.get("constants")
    if cd is not None:
        if not isinstance(cd, dict):
            raise SchemaError("$.constants", "must be an object")
        _reject_unknown(cd, _CONST_KEYS, "$.constants")
        c = {}
        for a, row in (cd.get("c") or {}).items():
            if a not in poset.size:
                raise SchemaError(f"$.constants.c.{a}", "unknown block")
            if not isinstance(row, list) or len(row) != poset.size[a] + 1:
                raise SchemaError(f"$.constants.c.{a}",
                                  f"row must have {poset.size[a] + 1} entries")
            c[a] = tuple(_rational(x, f"$.constants.c.{a}[{i}]")
                         for i, x in enumerate(row))
        e = {}
        for lo, ups in (cd.get("e") or {}).items():
            if lo not in poset.size:
                raise SchemaError(f"$.constants.e.{lo}", "unknown block")
            if not isinstance(ups, dict):
                raise SchemaError(f"$.constants.e.{lo}", "must map successor -> value")
            for hi, val in ups.items():
                if hi not in poset.succ[lo]:
                    raise SchemaError(f"$.constants.e.{lo}.{hi}",
                                      f"{hi!r} is not a cover successor of {lo!r}")
                e[(lo, hi)] = _rational(val, f"$.constants.e.{lo}.{hi}")
        d = {}
        for a, val in (cd.get("d") or {}).items():
            if a not in poset.size:
                raise SchemaError(f"$.constants.d.{a}", "unknown block")
            d[a] = _rational(val, f"$.constants.d.{a}")
        for a in poset.elements:
            d.setdefault(a, Fraction(1))
            if a not in c:
                k = poset.size[a]
                c[a] = tuple(Fraction(k - nu, k) for nu in range(k + 1))
        missing = [(lo, hi) for lo in poset.elements for hi in poset.succ[lo]
                   if (lo, hi) not in e]
        if missing:
            raise SchemaError("$.constants.e", f"missing pairs {missing!r}")
        bundle = ConstantBundle(poset=poset, c=c, e=e, d=d)

    seeds = {}
    for a, sd in (raw.get("seeds") or {}).items():
        if a not in poset.size:
            raise SchemaError(f"$.seeds.{a}", "unknown block")
        if not isinstance(sd, dict):
            raise SchemaError(f"$.seeds.{a}", "must be an object")
        _reject_unknown(sd, _SEED_KEYS, f"$.seeds.{a}")
        prof = sd.get("profile", {"kind": "cos2"})
        _reject_unknown(prof, _PROFILE_KEYS, f"$.seeds.{a}.profile")
        if prof.get("kind") not in ("cos2", "table"):
            raise SchemaError(f"$.seeds.{a}.profile.kind", "must be 'cos2' or 'table'")
        if prof["kind"] == "table" and "samples" not in prof:
            raise SchemaError(f"$.seeds.{a}.profile.samples", "required for table profiles")
        seeds[a] = {"l": float(sd.get("l", 3.141592653589793)),
                    "d_star": sd.get("d_star"),
                    "profile": prof}

    sim = dict(raw.get("simulate") or {})
    _reject_unknown(sim, _SIM_KEYS, "$.simulate")
    if "initial" in sim:
        _reject_unknown(sim["initial"], _INITIAL_KEYS, "$.simulate.initial")
    sim.setdefault("mode", "real")
    if sim["mode"] not in ("real", "complex"):
        raise SchemaError("$.simulate.mode", "must be 'real' or 'complex'")
    sim.setdefault("t_final", 100.0)
    sim.setdefault("rtol", 1e-10)
    sim.setdefault("atol", 1e-12)
    sim.setdefault("rng_seed", 0)
    sim.setdefault("count", 1)
    sim.setdefault("record_stride", 10)

    check = dict(raw.get("check") or {})
    _reject_unknown(check, _CHECK_KEYS, "$.check")
    check.setdefault("samples", 1000)
    check.setdefault("fd_step", 1e-4)
    check.setdefault("rng_seed", 0)

    split_subset = raw.get("split")
    if split_subset is not None:
        if not isinstance(split_subset, list) or not all(isinstance(x, str) for x in split_subset):
            raise SchemaError("$.split", "must be a list of block names")

    return Config(kind=kind, poset=poset, bundle=bundle, seeds=seeds,
                  simulate=sim, check=check, split_subset=split_subset, raw=raw)
