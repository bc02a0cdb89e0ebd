"""Command-line experiment runner.

``wkit <subcommand> --config <path> [--out <dir>] [--seed <u64>]``

Each run writes ``<subcommand>.report.json`` and one or more
``<subcommand>.<name>.csv`` files into the output directory. Exit status is
0 on PASS, 1 on FAIL and 2 on a configuration problem.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .cusp import FjordCertificate, check_no_narrow_fjords, check_outward_cusps
from .domains import domain_from_spec
from .errors import ConfigurationError, CuspConditionError, WkitError
from .extension import (boundary_probes, default_t_grid, extend_jet, operator_growth,
                        verify_jet_agreement, whitney_decompose)
from .functions import Polynomial, registry_jet
from .jets import seminorm_abs, whitney_jet_check
from .mappings import (ADDITIONS, CircleMap, FlatAddition, submersion_chart_check)
from .patching import (ChartRep, CompactSupportTag, ExtensionOperator, GlobalSection,
                       LocalSectionFamily, atlas_from_spec, box_atlas, circle_atlas, closed_arc,
                       compatibility_check, family_from_global, mixing_map, restrict_section,
                       restriction_defect, seam_jumps, section_csv)
from .trig import TrigPoly

log = logging.getLogger("wkit")

SCHEMA_VERSION = 1
EXPERIMENTS = ("gen-domain", "check-cusp", "check-fjords", "extend", "roundtrip", "patch", "submersion")

_positive = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "domain": {
            "type": "object",
            "required": ["generator"],
            "properties": {"generator": {"type": "string"}, "params": {"type": "object"},
                           "resolution": _positive},
        },
        "m": {"type": "integer", "minimum": 0, "maximum": 6},
        "tolerances": {"type": "object", "additionalProperties": _positive},
        "function": {"type": "object", "required": ["name"],
                     "properties": {"name": {"type": "string"}, "params": {"type": "object"}}},
        "cusp": {"type": "object", "properties": {
            "epsilon0": _positive, "rho": _positive, "r": {"type": "number", "minimum": 1},
            "eps_grid": {"type": "array", "items": _positive, "minItems": 1},
            "probe_count": {"type": "integer", "minimum": 100}}},
        "fjords": {"type": "object", "properties": {
            "a": {"type": "array", "items": {"type": "number"}},
            "p": {"type": "integer", "minimum": 1}, "D": _positive, "radius": _positive,
            "pair_budget": {"type": "integer", "minimum": 1}}},
        "probes": {"type": "object", "properties": {
            "n": {"type": "integer", "minimum": 1}, "t_min": _positive, "t_max": _positive,
            "fd_step": _positive}},
        "t_grid": {"type": "array", "items": _positive, "minItems": 3},
        "atlas": {"type": "object"},
        "subset": {"type": "object", "properties": {
            "a": {"type": "number"}, "b": {"type": "number"},
            "lo": {"type": "array", "items": {"type": "number"}},
            "hi": {"type": "array", "items": {"type": "number"}},
            "resolution": _positive}},
        "trials": {"type": "integer", "minimum": 1},
        "degree": {"type": "integer", "minimum": 0},
        "map": {"type": "object", "properties": {
            "height": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1},
            "tilt": {"type": "number"}, "addition": {"enum": sorted(ADDITIONS)},
            "amplitude": _positive}},
        "spacing": _positive,
    },
}

DEFAULTS = {
    "gen-domain": {"domain": {"generator": "closed_ball", "params": {"d": 2}, "resolution": 0.05}},
    "check-cusp": {"domain": {"generator": "koch_snowflake", "params": {"iterations": 4},
                              "resolution": 0.02},
                   "cusp": {"epsilon0": 0.5, "rho": 0.1, "r": 1.0, "eps_grid": [0.4, 0.2, 0.1],
                            "probe_count": 128}},
    "check-fjords": {"domain": {"generator": "closed_ball", "params": {"d": 2}, "resolution": 0.05},
                     "fjords": {"p": 1, "D": 0.1, "radius": 0.5, "pair_budget": 200}},
    "extend": {"domain": {"generator": "closed_ball", "params": {"d": 2}, "resolution": 0.05},
               "m": 3, "function": {"name": "sin_cos"},
               "probes": {"n": 400, "t_min": 0.005, "t_max": 0.1, "fd_step": 1e-4},
               "tolerances": {"jet_check": 0.5, "decay_slack": 0.25, "agreement": 1e-2}},
    "roundtrip": {"domain": {"generator": "half_space", "params": {"d": 2}, "resolution": 0.05},
                  "m": 2, "function": {"name": "polynomial"},
                  "probes": {"n": 400, "t_min": 0.005, "t_max": 0.1, "fd_step": 1e-4},
                  "tolerances": {"jet_check": 0.5, "reproduction": 5e-3, "agreement": 1e-4}},
    "patch": {"m": 3, "trials": 20, "degree": 3,
              "subset": {"a": math.pi / 4, "b": 3 * math.pi / 4, "resolution": 0.01},
              "tolerances": {"seam": 1e-6, "compatibility": 1e-8, "mixing": 1e-10,
                             "linearity": 1e-9}},
    "submersion": {"m": 3, "trials": 50, "degree": 2, "spacing": 0.01,
                   "subset": {"a": math.pi / 4, "b": 3 * math.pi / 4, "resolution": 0.01},
                   "map": {"height": 0.3, "tilt": 0.4, "addition": "sphere_exp", "amplitude": 0.1},
                   "tolerances": {"defect": 1e-6}},
}


class Failure(Exception):
    """Internal signal: the experiment ran and its property check failed."""


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        # a domain or function block names a new object, so it replaces the default whole
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("params", "domain", "function"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path, experiment, seed=None):
    """Read, validate and complete a config; raises :class:`ConfigurationError`."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from None
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config invalid at {where}: {exc.message}") from None
    if raw.get("experiment", experiment) != experiment:
        raise ConfigurationError(f"config is for {raw['experiment']!r}, not {experiment!r}")
    cfg = _merge(DEFAULTS[experiment], raw)
    cfg["experiment"] = experiment
    if seed is not None:
        cfg["seed"] = seed
    cfg.setdefault("seed", 0)
    if not 0 <= int(cfg["seed"]) < 2 ** 64:
        raise ConfigurationError("seed must be an unsigned 64-bit integer")
    return cfg


def _clean(obj):
    """Make report data JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return obj


def _table(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


# -- experiments ------------------------------------------------------------------

def _domain(cfg):
    return domain_from_spec(cfg["domain"])


def run_gen_domain(cfg):
    dom = _domain(cfg)
    rep = dom.validate(np.random.default_rng(cfg["seed"]))
    ok = all(rep[k] for k in ("interior_implies_member", "metric_symmetric",
                              "metric_zero_iff_equal", "metric_triangle", "regular"))
    d = dom.dimension
    rows = [list(p) + [int(b)] for p, b in zip(dom.samples, dom.boundary)]
    files = {"samples": _table([f"x{k}" for k in range(d)] + ["boundary"], rows)}
    results = {"set_id": dom.set_id(), "validation": rep,
               "box": [dom.box[0].tolist(), dom.box[1].tolist()]}
    return ok, results, files, dom.resolution


def run_check_cusp(cfg):
    dom = _domain(cfg)
    c = cfg["cusp"]
    out = check_outward_cusps(dom, epsilon0=c["epsilon0"], rho=c["rho"], r=c["r"],
                              eps_grid=c.get("eps_grid"), probe_count=c["probe_count"],
                              seed=cfg["seed"])
    d = dom.dimension
    rows = [w["z"] + [w["eps"]] + w["x"] for w in getattr(out, "witnesses", [])]
    files = {"witnesses": _table([f"z{k}" for k in range(d)] + ["eps"] + [f"x{k}" for k in range(d)], rows)}
    return out.passed, {"set_id": dom.set_id(), "result": out.as_dict()}, files, dom.resolution


def run_check_fjords(cfg):
    dom = _domain(cfg)
    f = cfg["fjords"]
    a = f.get("a")
    if a is None:
        a = (0.5 * (dom.box[0] + dom.box[1])).tolist()
    if len(a) != dom.dimension:
        raise ConfigurationError("fjords.a must have the domain's dimension")
    out = check_no_narrow_fjords(dom, np.asarray(a, float), p=f["p"], D=f["D"], radius=f["radius"],
                                 pair_budget=f["pair_budget"], seed=cfg["seed"])
    d = dom.dimension
    rows = []
    if isinstance(out, FjordCertificate):
        rows = [q["x"] + q["y"] + [q["distance"], q["length"]] for q in out.pairs]
    results = {"set_id": dom.set_id(), "result": out.as_dict()}
    if isinstance(out, FjordCertificate):
        results["worst_ratio"] = out.worst_ratio
        results["result"] = {k: v for k, v in results["result"].items() if k != "pairs"}
        results["pairs_recorded"] = len(out.pairs)
    files = {"pairs": _table([f"x{k}" for k in range(d)] + [f"y{k}" for k in range(d)]
                             + ["distance", "length"], rows)}
    return out.passed, results, files, dom.resolution


def _jet(cfg, dom, rng):
    fn = cfg["function"]
    params = dict(fn.get("params", {}))
    if fn["name"] == "polynomial":
        params.setdefault("degree", cfg["m"])
    try:
        return registry_jet(fn["name"], dom.samples, cfg["m"], rng, params)
    except KeyError as exc:
        raise ConfigurationError(str(exc)) from None


def _check_jet(cfg, jet):
    m = cfg["m"]
    t_grid = cfg.get("t_grid") or default_t_grid(jet)
    scale = seminorm_abs(jet, m)
    tol = cfg["tolerances"]["jet_check"]
    res = whitney_jet_check(jet, m, t_grid, tol * scale if scale > 0 else math.inf)
    return res, {"jet_check": res.as_dict(), "jet_scale": scale, "relative_tolerance": tol}


def _probe_rows(dom, probes, vals, extra=None):
    d = dom.dimension
    rows = []
    for k, (p, v) in enumerate(zip(probes, vals)):
        rows.append(list(p) + [v] + ([] if extra is None else [extra[k]]))
    return [f"y{k}" for k in range(d)], rows


def run_extend(cfg):
    dom = _domain(cfg)
    rng = np.random.default_rng(cfg["seed"])
    jet = _jet(cfg, dom, rng)
    res, results = _check_jet(cfg, jet)
    files = {}
    if not res.passed:
        results["witness"] = res.witness.as_dict()
        return False, results, files, dom.resolution
    decomp = whitney_decompose(dom)
    Ef = extend_jet(jet, decomp, check=False)
    pr = cfg["probes"]
    pts, rows = boundary_probes(dom, jet, pr["n"], pr["t_min"], pr["t_max"], seed=cfg["seed"],
                                box=decomp.box)
    agree = verify_jet_agreement(Ef, jet, (pts, rows), h=pr["fd_step"], seed=cfg["seed"])
    slack = cfg["tolerances"]["decay_slack"]
    decay_ok = agree.decay_order >= cfg["m"] - slack
    results.update({"cubes": len(decomp), "decomposition": decomp.check_invariants(),
                    "agreement": agree.as_dict(), "decay_required": cfg["m"] - slack,
                    "growth": operator_growth(Ef, jet, pts, h=pr["fd_step"])})
    head, table = _probe_rows(dom, pts, Ef(pts), dom.distance_to_set(pts))
    files["probes"] = _table(head + ["Ef", "dist"], table)
    return bool(decay_ok), results, files, dom.resolution


def run_roundtrip(cfg):
    dom = _domain(cfg)
    rng = np.random.default_rng(cfg["seed"])
    jet = _jet(cfg, dom, rng)
    res, results = _check_jet(cfg, jet)
    if not res.passed:
        results["witness"] = res.witness.as_dict()
        return False, results, {}, dom.resolution
    decomp = whitney_decompose(dom)
    Ef = extend_jet(jet, decomp, check=False)
    defect = float(np.abs(Ef(dom.samples) - jet.values[:, 0]).max())
    pr = cfg["probes"]
    agree = verify_jet_agreement(Ef, jet, h=pr["fd_step"], seed=cfg["seed"])
    tol = cfg["tolerances"]
    ok = defect == 0 and agree.max_discrepancy <= tol["agreement"] * max(1.0, seminorm_abs(jet, cfg["m"]))
    results.update({"restriction_defect": defect, "cubes": len(decomp), "agreement": agree.as_dict()})
    files = {}
    if cfg["function"]["name"] == "polynomial" and "terms" not in cfg["function"].get("params", {}):
        # rebuild the same polynomial to measure reproduction away from C
        poly = Polynomial.random(dom.dimension, int(cfg["function"].get("params", {}).get("degree", cfg["m"])),
                                 np.random.default_rng(cfg["seed"]))
        if poly.degree <= cfg["m"]:
            pts, _ = boundary_probes(dom, jet, pr["n"], pr["t_min"], pr["t_max"], seed=cfg["seed"],
                                     box=decomp.box)
            got, want = Ef(pts), poly(pts)
            rel = float(np.max(np.abs(got - want)) / max(np.max(np.abs(want)), 1e-300))
            results["reproduction_relative_error"] = rel
            ok = ok and rel <= tol["reproduction"]
            head, table = _probe_rows(dom, pts, got, want)
            files["probes"] = _table(head + ["Ef", "f"], table)
    return bool(ok), results, files, dom.resolution


def _atlas_and_subset(cfg, rank=1):
    if "atlas" in cfg:
        atlas = atlas_from_spec(cfg["atlas"])
    else:
        atlas = circle_atlas(rank=rank)
    sub = cfg["subset"]
    if atlas.manifold == "circle":
        C = closed_arc(sub["a"], sub["b"], sub["resolution"])
    else:
        from .domains import closed_box
        if "lo" not in sub or "hi" not in sub:
            raise ConfigurationError("euclidean atlases need subset.lo and subset.hi")
        C = closed_box(sub["lo"], sub["hi"], sub["resolution"])
    return atlas, C


def _random_section(atlas, rng, degree):
    if atlas.manifold == "circle":
        return GlobalSection.trig([TrigPoly.random(degree, rng) for _ in range(atlas.rank)])
    return GlobalSection.polynomial([Polynomial.random(atlas.dimension, degree, rng)
                                     for _ in range(atlas.rank)])


def run_patch(cfg):
    rng = np.random.default_rng(cfg["seed"])
    atlas, C = _atlas_and_subset(cfg)
    tol = cfg["tolerances"]
    try:
        op = ExtensionOperator(atlas, C, cfg["m"], seed=cfg["seed"])
    except CuspConditionError as exc:
        return False, {"cusp_violation": exc.violation.as_dict()}, {}, C.resolution
    check = atlas.check()
    restr, seam_v, seam_d, compat = 0.0, 0.0, 0.0, 0.0
    first = None
    for _ in range(cfg["trials"]):
        sec = family_from_global(atlas, _random_section(atlas, rng, cfg["degree"]))
        cf = restrict_section(sec, C, cfg["m"])
        glued = op(cf)
        first = first or glued
        restr = max(restr, restriction_defect(glued, cf))
        sj = seam_jumps(glued)
        seam_v = max(seam_v, sj["value_jump"])
        seam_d = max(seam_d, sj["derivative_jump"])
        compat = max(compat, glued.report["post"]["max_defect"])
    # the mixing map sends incompatible families into compatible ones
    mix = 0.0
    for _ in range(cfg["trials"]):
        reps = []
        for c in atlas.charts:
            polys = [Polynomial.random(atlas.dimension, cfg["degree"], rng) for _ in range(atlas.rank)]
            reps.append(ChartRep(lambda u, p=polys: np.stack([q(u) for q in p], axis=1), atlas.rank))
        fam = LocalSectionFamily(atlas, "U", reps, CompactSupportTag(frozenset(range(len(atlas)))))
        mix = max(mix, compatibility_check(mixing_map(fam))["max_defect"])
    # linearity of the assembled operator at C's samples and on a grid
    a, b = rng.uniform(-2, 2, size=2)
    f1 = restrict_section(family_from_global(atlas, _random_section(atlas, rng, cfg["degree"])), C, cfg["m"])
    f2 = restrict_section(family_from_global(atlas, _random_section(atlas, rng, cfg["degree"])), C, cfg["m"])
    x = atlas.sample_points(0.01)
    lhs = op(f1.scaled(a) + f2.scaled(b)).values_at(x)
    rhs = a * op(f1).values_at(x) + b * op(f2).values_at(x)
    lin = float(np.nanmax(np.abs(lhs - rhs)) / max(np.nanmax(np.abs(rhs)), 1e-300))
    ok = (restr == 0 and seam_v <= tol["seam"] and seam_d <= tol["seam"]
          and compat <= tol["compatibility"] and mix <= tol["mixing"] and lin <= tol["linearity"]
          and check["cocycle_ok"] and check["pou_ok"])
    results = {"atlas": atlas.to_spec(), "atlas_check": check, "subset": C.set_id(),
               "restriction_defect": restr, "seam_value_jump": seam_v, "seam_derivative_jump": seam_d,
               "glued_compatibility": compat, "mixing_compatibility": mix, "linearity_relative": lin,
               "trials": cfg["trials"]}
    files = {"section": section_csv(first)} if first is not None else {}
    return bool(ok), results, files, C.resolution


def run_submersion(cfg):
    mp = cfg["map"]
    kind = mp["addition"]
    if kind == "flat":
        add = FlatAddition(1)
        F = CircleMap([TrigPoly([mp["height"], 1.0], [0.0, mp["tilt"]])], add)
    else:
        add = ADDITIONS[kind](3)
        F = CircleMap.latitude_circle(mp["height"], mp["tilt"], add)
    sub = cfg["subset"]
    C = closed_arc(sub["a"], sub["b"], sub["resolution"])
    atlas = circle_atlas(rank=add.n)
    try:
        op = ExtensionOperator(atlas, C, cfg["m"], seed=cfg["seed"])
    except CuspConditionError as exc:
        return False, {"cusp_violation": exc.violation.as_dict()}, {}, C.resolution
    rep = submersion_chart_check(F, C, op, trials=cfg["trials"], seed=cfg["seed"],
                                 amplitude=mp["amplitude"], degree=cfg["degree"],
                                 spacing=cfg["spacing"], tolerance=cfg["tolerances"]["defect"])
    files = {"map": F.on(C.samples[:, 0]).to_csv()}
    return rep["passed"], rep, files, C.resolution


RUNNERS = {
    "gen-domain": run_gen_domain,
    "check-cusp": run_check_cusp,
    "check-fjords": run_check_fjords,
    "extend": run_extend,
    "roundtrip": run_roundtrip,
    "patch": run_patch,
    "submersion": run_submersion,
}


def run(cfg, out_dir):
    """Run one validated config; returns ``(exit_code, report)`` and writes the files."""
    kind = cfg["experiment"]
    passed, results, files, resolution = RUNNERS[kind](cfg)
    report = {
        "schema": SCHEMA_VERSION,
        "experiment": kind,
        "verdict": "PASS" if passed else "FAIL",
        "seed": int(cfg["seed"]),
        "resolution": resolution,
        "tolerances": cfg.get("tolerances", {}),
        "config": cfg,
        "results": results,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report["files"] = sorted(f"{kind}.{name}.csv" for name in files)
    (out / f"{kind}.report.json").write_text(json.dumps(_clean(report), indent=2, sort_keys=True) + "\n")
    for name, text in files.items():
        (out / f"{kind}.{name}.csv").write_text(text)
    return (0 if passed else 1), report


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="wkit", description="Whitney extension experiments")
    parser.add_argument("--version", action="version", version=f"wkit {__version__}")
    sub = parser.add_subparsers(dest="experiment", metavar="subcommand")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default="wkit-out", help="output directory (default: wkit-out)")
        p.add_argument("--seed", type=_seed, default=None, help="override the config seed")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.experiment is None:
        parser.print_usage(sys.stderr)
        print("wkit: error: a subcommand is required", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.experiment, args.seed)
        code, report = run(cfg, args.out)
    except ConfigurationError as exc:
        print(f"wkit: configuration error: {exc}", file=sys.stderr)
        return 2
    except WkitError as exc:
        print(f"wkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"{args.experiment}: {report['verdict']} ({Path(args.out) / (args.experiment + '.report.json')})")
    return code


if __name__ == "__main__":
    sys.exit(main())
