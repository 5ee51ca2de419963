"""Command-line front end.

Exit codes: 0 all checks pass; 1 validation failure; 2 numerical failure
(drift or brackets beyond thresholds); 3 I/O or schema error.  Reports are
JSON on stdout (sorted keys, exact rationals as "p/q" strings, floats with
17 significant digits); diagnostics go to stderr, one structured line each.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import block as blk
from . import cpn as cpn_mod
from . import flow as flow_mod
from .config import parse_config
from .constants import validate_compatibility
from .errors import KLError, ParseError, SchemaError, ValidationError
from .fan import build_fan, build_lattice, split_fibration
from .invariants import cell_counts, chern_pairing, kahler_class

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj) if obj.denominator != 1 else str(obj.numerator)
    if isinstance(obj, float):
        return float(format(obj, ".17g"))
    if isinstance(obj, np.floating):
        return float(format(float(obj), ".17g"))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {_key(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    return obj


def _key(k):
    if isinstance(k, tuple):
        return ",".join(str(x) for x in k)
    return str(k)


def _emit(report, out_dir, name):
    text = json.dumps(_jsonable(report), sort_keys=True, indent=2)
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / f"{name}.json").write_text(text + "\n", encoding="utf-8")
    print(text)


def _diag(msg):
    print(json.dumps({"diagnostic": msg}), file=sys.stderr)


def _geometry_for(cfg, a):
    sd = cfg.seeds.get(a, {"l": float(np.pi), "d_star": None, "profile": {"kind": "cos2"}})
    n = cfg.poset.size[a]
    c_row = [float(x) for x in cfg.bundle.c[a]] if cfg.bundle else \
        [1 - nu / n for nu in range(n + 1)]
    if sd["profile"]["kind"] == "cos2":
        prof = blk.Cos2Profile(sd["l"])
        d_star = sd["d_star"] if sd["d_star"] is not None else prof.natural_d_star()
    else:
        prof = blk.TableProfile(sd["l"], sd["profile"]["samples"])
        if sd["d_star"] is None:
            raise ValidationError([{"code": "MissingDStar",
                                    "detail": f"table profile for {a!r} needs d_star"}])
        d_star = sd["d_star"]
    seed = blk.BlockSeed(n=n, c=tuple(c_row), d_star=float(d_star), profile=prof)
    return seed


def cmd_validate(cfg, args):
    report = {"poset": {"elements": list(cfg.poset.elements),
                        "sizes": cfg.poset.size,
                        "n": cfg.poset.n,
                        "kl_a": cfg.poset.is_kl_a}}
    ok = True
    if cfg.bundle is not None:
        lattice = None
        compat = validate_compatibility(cfg.poset, cfg.bundle)
        if compat["ok"]:
            lattice = build_lattice(cfg.poset, cfg.bundle)
            compat = validate_compatibility(cfg.poset, cfg.bundle, lattice)
        report["constants"] = {"ok": compat["ok"], "violations": compat["violations"]}
        ok = ok and compat["ok"]
    seeds = {}
    for a in cfg.seeds:
        seed = _geometry_for(cfg, a)
        res = blk.validate_seed(seed)
        seeds[a] = res
        ok = ok and res["ok"]
    if seeds:
        report["seeds"] = seeds
    report["ok"] = ok
    _emit(report, args.out, "validate")
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_fan(cfg, args):
    if cfg.bundle is None:
        raise ValidationError([{"code": "MissingConstants", "detail": "fan needs a constants section"}])
    compat = validate_compatibility(cfg.poset, cfg.bundle)
    if not compat["ok"]:
        _emit({"ok": False, "violations": compat["violations"]}, args.out, "fan")
        return EXIT_VALIDATION
    model = build_lattice(cfg.poset, cfg.bundle)
    fan = build_fan(model, sample_seed=args.seed or 0)
    report = {
        "rays": {_key(k): list(v) for k, v in model.Y.items()},
        "cones": [[_key(k) for k in cone] for cone in fan.cones],
        "smooth": fan.smooth,
        "complete": fan.complete,
        "Z": {a: list(v) for a, v in model.Z.items()},
        "l": model.l,
    }
    if cfg.split_subset is not None:
        fib = split_fibration(model, cfg.bundle, cfg.split_subset)
        report["fibration"] = {
            "subset": list(fib.subset),
            "complement": list(fib.complement),
            "psi": {a: list(v) for a, v in fib.psi.items()},
            "curvature": [dict(c, Z=list(c["Z"])) for c in fib.curvature],
            "integrality_ok": fib.integrality_ok,
        }
    _emit(report, args.out, "fan")
    return EXIT_OK if fan.smooth and fan.complete else EXIT_NUMERICAL


def cmd_invariants(cfg, args):
    if cfg.bundle is None:
        raise ValidationError([{"code": "MissingConstants", "detail": "invariants need constants"}])
    model = build_lattice(cfg.poset, cfg.bundle)
    pairing = chern_pairing(model)
    kc = kahler_class(cfg.poset, cfg.bundle, model)
    cells = cell_counts(cfg.poset)
    report = {
        "picard_rank": len(cfg.poset.elements),
        "chern_pairing": pairing,
        "kahler_class": kc["class"],
        "periods_over_2pi": kc["periods"],
        "cells": cells,
    }
    _emit(report, args.out, "invariants")
    identity = all(pairing[i][j] == (1 if i == j else 0)
                   for i in range(len(pairing)) for j in range(len(pairing)))
    return EXIT_OK if identity else EXIT_NUMERICAL


def cmd_block(cfg, args):
    a = args.alpha or cfg.poset.elements[0]
    if a not in cfg.poset.size:
        raise ValidationError([{"code": "UnknownBlock", "detail": f"block {a!r} not in poset"}])
    seed = _geometry_for(cfg, a)
    res = blk.validate_seed(seed)
    if not res["ok"]:
        _emit({"block": a, "seed": res, "ok": False}, args.out, f"block_{a}")
        return EXIT_VALIDATION
    T = blk.branch_times(seed)
    geom = blk.build_profiles(seed)
    report = {
        "block": a, "ok": True,
        "branch_times": T,
        "periods": geom.P,
        "periods_quadrature": geom.P_quad,
        "chart_residual": geom.chart_residual,
        "seed_residuals": res["residuals"],
        "fold_group_order": len(blk.fold_group(geom)),
    }
    if args.out and args.samples:
        rows = ["x" + "".join(f",h{nu + 1}" for nu in range(seed.n))]
        xs = np.linspace(0.0, max(geom.P), args.samples)
        for x in xs:
            vals = [float(geom.charts[nu].value(x)) for nu in range(seed.n)]
            rows.append(",".join(format(v, ".17g") for v in [x] + vals))
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / f"profiles_{a}.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    _emit(report, args.out, f"block_{a}")
    return EXIT_OK


def cmd_simulate(cfg, args):
    if len(cfg.poset.elements) != 1:
        _diag("simulation supports exactly one block; multi-block metrics "
              "depend on connection data that is out of scope")
        return EXIT_VALIDATION
    a = cfg.poset.elements[0]
    seed = _geometry_for(cfg, a)
    geom = blk.build_profiles(seed)
    model = flow_mod.OneBlockModel(geom)
    sim = dict(cfg.simulate)
    mode = (args.mode or sim["mode"]).upper()
    t_final = args.t_final if args.t_final is not None else float(sim["t_final"])
    rtol = args.tol if args.tol is not None else float(sim["rtol"])
    rng = np.random.default_rng(args.seed if args.seed is not None else sim["rng_seed"])
    if "initial" in sim:
        init = sim["initial"]
        state = flow_mod.PhaseState(
            x=np.array([float(v) for v in init["x"]]),
            p=np.array([float(v) for v in init["p"]]),
            J=np.array([float(v) for v in init.get("J", [0.0] * model.n)]),
            mode=mode)
    else:
        state = model.random_state(rng, mode=mode)
    traj, rep = flow_mod.integrate(model, state, t_final, rtol=rtol,
                                   atol=float(sim["atol"]),
                                   record_stride=int(sim["record_stride"]))
    worst = max(v["max_rel_drift"] for v in rep.invariants.values())
    report = {
        "mode": mode, "t_final": t_final, "rtol": rtol,
        "drift": rep.invariants,
        "steps": rep.steps, "rejected": rep.rejected,
        "rhs_evaluations": rep.rhs_evaluations,
        "truncated": rep.truncated, "truncation_reason": rep.truncation_reason,
        "min_gap": rep.min_gap,
        "max_rel_drift": worst,
    }
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        n = model.n
        header = ("t," + ",".join(f"x{i + 1}" for i in range(n)) + ","
                  + ",".join(f"p{i + 1}" for i in range(n)) + ",E,"
                  + ",".join(f"F{i + 1}" for i in range(n)))
        rows = [header]
        for k in range(len(traj.t)):
            vals = ([traj.t[k]] + list(traj.x[k]) + list(traj.p[k])
                    + [traj.E[k]] + list(traj.Fi[k]))
            rows.append(",".join(format(float(v), ".17g") for v in vals))
        (Path(args.out) / "trajectory.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    _emit(report, args.out, "simulate")
    threshold = 1e-8 if mode == "REAL" else 1e-7
    if rep.truncated:
        return EXIT_NUMERICAL
    return EXIT_OK if worst < max(threshold, rtol * 1e3) else EXIT_NUMERICAL


def cmd_check_involution(cfg, args):
    if len(cfg.poset.elements) != 1:
        _diag("involution check supports exactly one block")
        return EXIT_VALIDATION
    a = cfg.poset.elements[0]
    seed = _geometry_for(cfg, a)
    geom = blk.build_profiles(seed)
    model = flow_mod.OneBlockModel(geom)
    samples = args.samples or int(cfg.check["samples"])
    rep = flow_mod.poisson_check(model, n_samples=samples,
                                 fd_step=float(cfg.check["fd_step"]),
                                 seed=args.seed if args.seed is not None else cfg.check["rng_seed"],
                                 mode=(args.mode or "real").upper())
    _emit(rep, args.out, "involution")
    tol = args.tol if args.tol is not None else 1e-6
    return EXIT_OK if rep["max_normalized_bracket"] < tol else EXIT_NUMERICAL


def cmd_cpn(args):
    n = args.n
    c = [1.0 - k / n for k in range(n + 1)]
    report = {"n": n, "c": c}
    cons = cpn_mod.conservation_check(n, c, seed=args.seed or 0)
    report["conservation"] = cons
    report["unitary_invariance"] = cpn_mod.unitary_invariance(n, seed=args.seed or 0)
    ok = cons["max_rel_drift"] < 1e-10 and report["unitary_invariance"] < 1e-12
    if args.check:
        br = cpn_mod.bracket_check(n, c, n_points=args.samples or 1000,
                                   seed=args.seed or 0)
        report["brackets"] = br
        ok = ok and br["max_normalized_bracket"] < 1e-6
    _emit(report, args.out, f"cpn_{n}")
    return EXIT_OK if ok else EXIT_NUMERICAL


def build_parser():
    ap = argparse.ArgumentParser(prog="kltoric", description=__doc__)
    ap.add_argument("command", choices=["validate", "fan", "invariants", "block",
                                        "simulate", "check-involution", "cpn"])
    ap.add_argument("--config", type=str, help="path to the JSON configuration")
    ap.add_argument("--out", type=str, help="directory for report artifacts")
    ap.add_argument("--json", action="store_true", help="(default) JSON report on stdout")
    ap.add_argument("--seed", type=int, default=None, help="RNG seed override")
    ap.add_argument("--tol", type=float, default=None, help="tolerance override")
    ap.add_argument("--t-final", dest="t_final", type=float, default=None)
    ap.add_argument("--mode", choices=["real", "complex"], default=None)
    ap.add_argument("--alpha", type=str, default=None, help="block identifier")
    ap.add_argument("--samples", type=int, default=None)
    ap.add_argument("--n", type=int, default=2, help="dimension for the reference model")
    ap.add_argument("--check", action="store_true", help="include bracket checks (cpn)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "cpn":
            return cmd_cpn(args)
        if not args.config:
            _diag("--config is required for this command")
            return EXIT_IO
        cfg = parse_config(args.config)
        if args.command == "validate":
            return cmd_validate(cfg, args)
        if args.command == "fan":
            return cmd_fan(cfg, args)
        if args.command == "invariants":
            return cmd_invariants(cfg, args)
        if args.command == "block":
            return cmd_block(cfg, args)
        if args.command == "simulate":
            return cmd_simulate(cfg, args)
        if args.command == "check-involution":
            return cmd_check_involution(cfg, args)
        raise AssertionError("unreachable")
    except (SchemaError, ParseError) as exc:
        _diag(str(exc))
        return EXIT_IO
    except ValidationError as exc:
        for v in exc.violations:
            _diag(f"{v['code']}: {v['detail']}")
        print(json.dumps({"ok": False, "violations": _jsonable(exc.violations)},
                         sort_keys=True, indent=2))
        return EXIT_VALIDATION
    except KLError as exc:
        _diag(f"{type(exc).__name__}: {exc}")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
