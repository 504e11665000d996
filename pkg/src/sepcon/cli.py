"""Batch front door: build plans, evaluate them on points or grids, run
verification suites, list the gallery, print the JSON schemas.

One job per invocation, described by a JSON job file (--spec) with flags for
the common overrides.  Outputs are deterministic for a fixed spec and seed,
are written atomically, and embed the spec hash and seed.  Exit codes:
0 pass, 1 verification failure, 2 input error.
"""
from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import os
import sys
import tempfile

import numpy as np

from .diagonal import (
    BaseBlend,
    RecursiveBlend,
    build_diagonal_2,
    build_diagonal_n,
    factor_dims,
    sepfn_eval,
    sepfn_from_json,
    sepfn_to_json,
)
from .errors import ParseError, SepconError
from .restrict import (
    RestrictionProblem,
    solve_restriction_theorem2,
    solve_restriction_theorem4,
    solve_restriction_theorem5,
)
from .tower import GALLERY_NAMES, IndexSchedule, gallery, tower_from_json, tower_eval
from .verify import (
    check_diagonal_agreement,
    check_joint_oscillation,
    check_section_continuity,
    reports_to_csv,
)

_EXIT_OK = 0
_EXIT_VERIFY_FAILED = 1
_EXIT_INPUT_ERROR = 2


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write(path: str, data: str) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".sepcon-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _load_spec(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read job spec {path}: {exc}") from exc


def _meta(args, spec_path: str) -> dict:
    return {"spec_sha256": _sha256_file(spec_path), "seed": args.seed}


def _schedule_from(spec: dict, default_cutoff: int = 64) -> IndexSchedule:
    sched = spec.get("schedule")
    if sched:
        return IndexSchedule.from_json(sched)
    return IndexSchedule((default_cutoff,))


# -- build ---------------------------------------------------------------------------

def cmd_build(args) -> int:
    spec = _load_spec(args.spec)
    job = spec.get("build")
    if not job:
        raise ParseError("job spec lacks a 'build' section")
    seed = args.seed if args.seed is not None else int(spec.get("seed", 0))
    args.seed = seed
    depth = args.depth if args.depth is not None else int(
        spec.get("cutoffs", {}).get("tower_depth", 16)
    )

    kind = job.get("kind")
    summary: dict
    if kind == "diagonal":
        tower = tower_from_json(job["tower"])
        n = int(job.get("n", 2))
        if n == 2:
            f = build_diagonal_2(tower, depth=depth)
        else:
            f = build_diagonal_n(tower, n, depth=min(depth, 8), inner_depth=depth, seed=seed)
        plan_json = sepfn_to_json(f, tower_cutoff=max(depth + 2, 8))
        sched = _plan_schedule(f)
        summary = {
            "kind": "diagonal",
            "arity": n,
            "schedule_radii": sched,
            "empirically_validated": f.empirically_validated,
        }
    elif kind == "restriction":
        problem = RestrictionProblem.from_json(job["problem"])
        solver = {
            "theorem2": solve_restriction_theorem2,
            "theorem4": solve_restriction_theorem4,
            "theorem5": solve_restriction_theorem5,
        }[problem.mode]
        f, plan = solver(problem, seed=seed)
        plan_json = sepfn_to_json(f, tower_cutoff=problem.cutoffs.check_cutoff)
        summary = {
            "kind": "restriction",
            "mode": problem.mode,
            "report": plan.report,
            "empirically_validated": f.empirically_validated,
        }
    else:
        raise ParseError(f"unknown build kind {kind!r}")

    out = args.out or spec.get("out")
    if not out:
        raise ParseError("no output path (--out or spec 'out')")
    payload = {
        "meta": {**_meta(args, args.spec), "command": "build"},
        "factor_dims": factor_dims(f),
        "sepfn": plan_json,
    }
    _atomic_write(out, _dump_json(payload))
    summary["out"] = out
    summary["meta"] = payload["meta"]
    sys.stdout.write(_dump_json(summary))
    return _EXIT_OK


def _plan_schedule(f) -> list[float]:
    plan = f.plan
    if isinstance(plan, (BaseBlend, RecursiveBlend)):
        return list(plan.schedule.radii)
    return []


# -- eval -----------------------------------------------------------------------------

def _load_plan(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        return sepfn_from_json(payload["sepfn"]), payload
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ParseError(f"cannot load plan {path}: {exc}") from exc


def _split_point(flat, dims) -> tuple:
    if len(flat) != sum(dims):
        raise ParseError(f"point of length {len(flat)}, expected {sum(dims)}")
    out, i = [], 0
    for d in dims:
        out.append(tuple(float(v) for v in flat[i:i + d]))
        i += d
    return tuple(out)


def cmd_eval(args) -> int:
    spec = _load_spec(args.spec)
    job = spec.get("eval")
    if not job:
        raise ParseError("job spec lacks an 'eval' section")
    seed = args.seed if args.seed is not None else int(spec.get("seed", 0))
    args.seed = seed
    f, payload = _load_plan(job["plan"])
    dims = payload.get("factor_dims") or [f.space.dim] * f.arity
    sched = _schedule_from(job)

    rows: list[list] = []
    if "points" in job:
        flats = [list(map(float, p)) for p in job["points"]]
    elif "grid" in job:
        counts = job["grid"]["counts"]
        axes = _grid_axes(f, dims, counts, job["grid"])
        flats = [list(p) for p in itertools.product(*axes)]
    else:
        raise ParseError("eval job needs 'points' or 'grid'")

    total = sum(dims)
    for flat in flats:
        try:
            x = _split_point(flat, dims)
            out = sepfn_eval(f, x, sched)
            rows.append(
                flat
                + [out.value, out.err_bound, out.cauchy, out.depth_exhausted, "ok"]
            )
        except SepconError:
            rows.append(flat + [None, None, None, None, "outside-domain"])

    header = [f"x{i + 1}" for i in range(total)] + [
        "value", "err_bound", "cauchy", "depth_exhausted", "status",
    ]
    lines = ["# " + json.dumps({**_meta(args, args.spec), "command": "eval"}, sort_keys=True)]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    out_path = args.out or spec.get("out")
    if not out_path:
        raise ParseError("no output path (--out or spec 'out')")
    _atomic_write(out_path, "\n".join(lines) + "\n")
    sys.stdout.write(f"wrote {len(rows)} rows to {out_path}\n")
    return _EXIT_OK


def _flat_bounds(f, dims) -> tuple[list[float], list[float]]:
    from .diagonal import Glued, Pullback

    plan = f.plan
    if isinstance(plan, Glued):
        box = plan.product_model.box
        return list(box.lo), list(box.hi)
    los: list[float] = []
    his: list[float] = []
    for i in range(f.arity):
        box = plan.maps[i].model.box if isinstance(plan, Pullback) else f.space.box
        los.extend(box.lo)
        his.extend(box.hi)
    return los, his


def _grid_axes(f, dims, counts, grid_job):
    total = sum(dims)
    if len(counts) != total:
        raise ParseError("grid counts must name every product coordinate")
    default_lo, default_hi = _flat_bounds(f, dims)
    lo = grid_job.get("lo", default_lo)
    hi = grid_job.get("hi", default_hi)
    return [
        np.linspace(float(a), float(b), int(c)).tolist()
        for a, b, c in zip(lo, hi, counts)
    ]


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


# -- verify ----------------------------------------------------------------------------

def cmd_verify(args) -> int:
    spec = _load_spec(args.spec)
    job = spec.get("verify")
    if not job:
        raise ParseError("job spec lacks a 'verify' section")
    seed = args.seed if args.seed is not None else int(spec.get("seed", 0))
    args.seed = seed
    budget = args.budget if args.budget is not None else int(spec.get("budgets", {}).get("samples", 200))
    tol = args.tol if args.tol is not None else float(spec.get("tolerances", {}).get("oscillation", 1e-3))

    f, payload = _load_plan(job["plan"])
    sched = _schedule_from(job)
    suites = job.get("suites", ["diagonal-agreement"])
    rng = np.random.default_rng(seed)

    results = {}
    continuity_reports = []
    failed = False

    for suite in suites:
        if suite == "diagonal-agreement":
            g = tower_from_json(job["tower"]) if "tower" in job else f.diagonal_tower
            if g is None:
                raise ParseError("plan has no diagonal tower and none was supplied")
            box = g.model.box
            pts = box.sample(rng, budget)
            tolerance = float(job.get("agreement_tolerance", 0.0))
            rep = check_diagonal_agreement(f, g, pts, sched, tolerance=tolerance)
            results[suite] = rep.to_json()
            failed = failed or not rep.passed
        elif suite == "section-continuity":
            radii = _probe_radii(f)
            centers = _verify_centers(f, rng, job.get("centers", 8), tol)
            ok = True
            for c in centers:
                for index in range(f.arity):
                    rep = check_section_continuity(
                        f, c, index, radii, sched, budget=16, tolerance=tol, seed=seed
                    )
                    continuity_reports.append(rep)
                    ok = ok and rep.verdict == "decaying"
            results[suite] = {"passed": ok, "reports": len(continuity_reports)}
            failed = failed or not ok
        elif suite == "joint-oscillation":
            center = job.get("joint_center")
            if center is None:
                c = f.space.box.center()
                center = [list(c)] * f.arity
            center = tuple(tuple(map(float, p)) for p in center)
            radii = [2.0 ** -k for k in range(1, 21)]
            rep = check_joint_oscillation(f, center, radii, sched, budget=16, seed=seed)
            continuity_reports.append(rep)
            expect = job.get("expect", "stalled")
            ok = rep.verdict == expect
            results[suite] = {"passed": ok, "verdict": rep.verdict, "expected": expect}
            failed = failed or not ok
        else:
            raise ParseError(f"unknown suite {suite!r}")

    out_path = args.out or spec.get("out")
    report = {
        "meta": {**_meta(args, args.spec), "command": "verify"},
        "suites": results,
        "passed": not failed,
    }
    if out_path:
        _atomic_write(out_path, _dump_json(report))
        if continuity_reports:
            _atomic_write(out_path + ".csv", reports_to_csv(continuity_reports))
    sys.stdout.write(_dump_json({"passed": not failed, "suites": list(results)}))
    return _EXIT_VERIFY_FAILED if failed else _EXIT_OK


def _probe_radii(f):
    """2^-5 .. 2^-20, truncated at the plan's deepest radius: probing below
    the materialized resolution only measures the declared truncation."""
    radii = [2.0 ** -k for k in range(5, 21)]
    sched = _plan_schedule(f)
    if sched:
        kept = [r for r in radii if r >= sched[-1]]
        if kept:
            return kept
    return radii


def _verify_centers(f, rng, count, tol):
    """Diagonal centers only where the certified tail at the plan's depth is
    below tolerance (elsewhere the truncated evaluation has an honest seam);
    off-diagonal centers kept clear of the diagonal by a probe radius."""
    centers = []
    plan = f.plan
    g = f.diagonal_tower
    depth = len(_plan_schedule(f)) or 8
    tau = None
    if g is not None and g.certificate is not None:
        tau = g.certificate.envelope(depth)
    box = f.space.box
    homogeneous = not isinstance(plan, (type(None),)) and g is not None
    for _ in range(count):
        if homogeneous and rng.uniform() < 0.3 and tau is not None:
            for _try in range(64):
                p = tuple(box.sample(rng, 1)[0].tolist())
                if tau.eval(p) <= tol / 2:
                    centers.append(tuple(p for _ in range(f.arity)))
                    break
            else:
                continue
        else:
            for _try in range(64):
                pts = tuple(
                    tuple(box.sample(rng, 1)[0].tolist()) for _ in range(f.arity)
                )
                seps = [
                    f.space.dist(pts[i], pts[j])
                    for i in range(f.arity)
                    for j in range(i + 1, f.arity)
                ]
                if not seps or min(seps) >= 2.0 ** -4:
                    centers.append(pts)
                    break
    return centers


# -- gallery & schema -------------------------------------------------------------------

def cmd_gallery(args) -> int:
    rows = []
    for name in GALLERY_NAMES:
        g = gallery(name)
        rows.append(
            {
                "name": name,
                "rank": g.rank,
                "domain": g.model.to_json(),
                "certificate": g.certificate is not None,
            }
        )
    sys.stdout.write(_dump_json(rows))
    return _EXIT_OK


_EXPR_SCHEMA = {
    "description": "expression tree node",
    "op": "one of: const, coord, add, sub, mul, min, max, abs, clamp, pl, dist_to",
    "args": "child nodes (absent for leaves)",
    "value": "const only: the number",
    "coord": "coord only: coordinate index",
    "lo/hi": "clamp only: bounds",
    "xs/ys": "pl only: ascending breakpoints and values",
    "point": "dist_to only: anchor point coordinates",
}

_TOWER_SCHEMA = {
    "rank": "integer >= 0",
    "base": "rank 0 only: ContFn {model, expr}",
    "family": {
        "kind": "gallery | explicit",
        "name": "gallery only: one of " + ", ".join(GALLERY_NAMES),
        "cutoff": "explicit only: materialized depth",
        "members": "explicit only: serialized member towers",
    },
}

_PLAN_SCHEMA = {
    "arity": "number of variables",
    "space": "metric model {kind, lo, hi, weights?}",
    "plan": {
        "kind": "base_blend | recursive_blend | pullback | glued",
        "base_blend": {"tower": "tower", "schedule": {"radii": "decreasing list"}},
        "recursive_blend": {"subs": "plans", "schedule": "radii", "top": "tower"},
        "pullback": {"inner": "plan", "maps": "one bundle per factor", "snap_tol": "float"},
        "glued": {"weights": "normalized hats", "windows": "product boxes",
                  "patches": "plans or null", "product_model": "metric model"},
    },
    "empirically_validated": "bool",
}

_JOB_SCHEMA = {
    "command": "build | eval | verify",
    "seed": "int, recorded in every output",
    "out": "output path (or --out)",
    "cutoffs": {"tower_depth": "int", "s_cut": "int", "pp_depth": "int"},
    "tolerances": {"restriction": "float", "oscillation": "float"},
    "budgets": {"samples": "int", "pairs": "int"},
    "build": {"kind": "diagonal | restriction", "tower": "tower json",
              "n": "arity", "problem": "restriction problem json"},
    "eval": {"plan": "path", "points": "[[flat coords]]",
             "grid": {"counts": "per product coordinate", "lo": "opt", "hi": "opt"},
             "schedule": {"cutoffs": "[int]", "eps": "float"}},
    "verify": {"plan": "path", "suites": "[diagonal-agreement|section-continuity|joint-oscillation]",
               "tower": "optional reference tower", "expect": "joint suite verdict"},
}


def cmd_schema(args) -> int:
    sys.stdout.write(
        _dump_json(
            {
                "expression": _EXPR_SCHEMA,
                "tower": _TOWER_SCHEMA,
                "sepfn_plan": _PLAN_SCHEMA,
                "job": _JOB_SCHEMA,
            }
        )
    )
    return _EXIT_OK


# -- entry point -------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sepcon", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("build", cmd_build),
        ("eval", cmd_eval),
        ("verify", cmd_verify),
        ("gallery", cmd_gallery),
        ("schema", cmd_schema),
    ):
        sp = sub.add_parser(name)
        sp.set_defaults(fn=fn)
        if name in ("build", "eval", "verify"):
            sp.add_argument("--spec", required=True, help="job spec JSON path")
            sp.add_argument("--out", default=None, help="output path")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--depth", type=int, default=None)
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--budget", type=int, default=None)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return _EXIT_INPUT_ERROR
    except SepconError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return _EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
