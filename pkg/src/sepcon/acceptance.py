"""Executable acceptance criteria for the whole toolkit.

Each criterion is a self-contained runner with pinned seeds, budgets and
tolerances, returning a CriterionResult; the pytest wrapper asserts and
prints one line per criterion, and scripts/run_acceptance.py does the same
standalone.  Runtime ceilings are part of the pass condition.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .diagonal import build_diagonal_2, build_diagonal_n, schedule_from_lipschitz, sepfn_eval
from .expr import ContFn, VectorFn, coord, mul, pl, vabs
from .restrict import (
    Cutoffs,
    FunctionallyClosedSet,
    ParamSet,
    RestrictionProblem,
    SampledLevel,
    extend_baire_from_closed,
    solve_restriction_theorem2,
    solve_restriction_theorem4,
    solve_restriction_theorem5,
)
from .errors import InjectivityRejected
from .space import BoxDomain, euclidean_box, interval
from .tower import BaireTower, IndexSchedule, gallery, tower_eval
from .verify import (
    check_diagonal_agreement,
    check_joint_oscillation,
    check_section_continuity,
    pp_structure,
    tower_from_sepfn,
)


@dataclass
class CriterionResult:
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark} {self.name} ({self.seconds:.2f}s): {self.detail}"


def _timed(fn):
    t0 = time.perf_counter()
    passed, detail = fn()
    return passed, detail, time.perf_counter() - t0


def criterion_1_diagonal_exactness() -> CriterionResult:
    def run():
        rng = np.random.default_rng(101)
        worst = 0.0
        checked = 0
        for name in ("sign", "point-indicator", "step"):
            g = gallery(name)
            f = build_diagonal_2(g, depth=12)
            lo, hi = g.model.box.lo[0], g.model.box.hi[0]
            pts = [(float(x),) for x in rng.uniform(lo, hi, 1000)]
            rep = check_diagonal_agreement(f, g, pts, IndexSchedule((64,)))
            worst = max(worst, rep.max_diff)
            checked += len(pts)
        g = gallery("two-limit-indicator")
        f = build_diagonal_n(g, 3, depth=6, inner_depth=8)
        pts = [(float(x),) for x in rng.uniform(0.0, 1.0, 1000)]
        rep = check_diagonal_agreement(f, g, pts, IndexSchedule((24, 24)))
        worst = max(worst, rep.max_diff)
        checked += len(pts)
        return worst == 0.0, f"{checked} points, max |f(diag) - g| = {worst}"

    passed, detail, secs = _timed(run)
    passed = passed and secs < 10.0
    return CriterionResult("criterion-1 diagonal exactness", passed, detail, secs)


def criterion_2_section_continuity() -> CriterionResult:
    def run():
        g = gallery("sign")
        f = build_diagonal_2(g, schedule=schedule_from_lipschitz(g, 22))
        s = IndexSchedule((64,))
        radii = [2.0**-k for k in range(5, 21)]
        rng = np.random.default_rng(202)
        centers = []
        while len(centers) < 20:  # diagonal centers away from the jump
            a = float(rng.uniform(-1, 1))
            if abs(a) >= 0.1:
                centers.append(((a,), (a,)))
        while len(centers) < 100:
            x, y = rng.uniform(-1, 1, 2)
            centers.append(((float(x),), (float(y),)))
        failures = 0
        final = 0.0
        for c in centers:
            rep = check_section_continuity(
                f, c, 0, radii, s, budget=16, tolerance=1e-3, seed=202
            )
            final = max(final, rep.oscillations[-1])
            if rep.verdict != "decaying":
                failures += 1
        return (
            failures == 0,
            f"100 centers (20 diagonal), 0 allowed failures, got {failures}; "
            f"worst final oscillation {final:.2e}",
        )

    passed, detail, secs = _timed(run)
    passed = passed and secs < 60.0
    return CriterionResult("criterion-2 base-case section continuity", passed, detail, secs)


def criterion_3_joint_negative_control() -> CriterionResult:
    def run():
        f = build_diagonal_2(gallery("sign"), depth=22)
        radii = [2.0**-k for k in range(1, 21)]
        rep = check_joint_oscillation(
            f, ((0.0,), (0.0,)), radii, IndexSchedule((64,)), budget=16, seed=303
        )
        ok = all(o >= 1.0 for o in rep.oscillations)
        return ok, f"min joint oscillation over 20 scales = {min(rep.oscillations)}"

    passed, detail, secs = _timed(run)
    return CriterionResult("criterion-3 joint-discontinuity negative control", passed, detail, secs)


def criterion_4_prop1_exactness() -> CriterionResult:
    def run():
        m = interval(-1.0, 1.0)
        A = FunctionallyClosedSet(m, ContFn(m, vabs(coord(0))), ((0.0,),))
        g = BaireTower(0, m, base=SampledLevel(m, ((0.0,),), (1.0,), 0.0))
        ext = extend_baire_from_closed(A, g)
        rng = np.random.default_rng(404)
        xs = [x for x in rng.uniform(-1, 1, 1000) if x != 0.0]
        for x in xs:
            kmin = math.ceil(1.0 / abs(x))
            if ext.level(kmin).base.eval((x,)) != 0.0:
                return False, f"level {kmin} does not vanish at x = {x}"
            if ext.level(kmin + 5).base.eval((x,)) != 0.0:
                return False, f"level {kmin + 5} does not vanish at x = {x}"
        for k in range(1, 33):
            if ext.level(k).base.eval((0.0,)) != 1.0:
                return False, f"level {k} is not exactly g on A"
        return True, f"{len(xs)} points, exact vanishing and exact identity on A"

    passed, detail, secs = _timed(run)
    passed = passed and secs < 1.0
    return CriterionResult("criterion-4 closed-set extension exactness", passed, detail, secs)


def _cubic_graph_problem(grid: int, s_cut: int, depth: int, check: int, mode="theorem2"):
    pm = euclidean_box((0.0,), (1.0,))
    t = coord(0)
    e1 = VectorFn((ContFn(pm, t),))
    e2 = VectorFn((ContFn(pm, mul(t, mul(t, t))),))
    E = ParamSet(2, BoxDomain((0.0,), (1.0,)), (e1, e2))
    X = euclidean_box((0.0,), (1.0,))
    return RestrictionProblem(
        (X, X), E, gallery("step"), mode=mode,
        cutoffs=Cutoffs(s_cut=s_cut, depth=depth, grid=grid, check_cutoff=check),
    )


def criterion_5_theorem2_pipeline() -> CriterionResult:
    def run():
        prob = _cubic_graph_problem(grid=257, s_cut=8, depth=12, check=512)
        f, plan = solve_restriction_theorem2(prob, seed=505)
        if plan.report["coherence_max"] > 1e-9:
            return False, f"embedding coherence {plan.report['coherence_max']}"
        eligible = [t for t in plan.grid if abs(t - 0.5) >= 2.0**-8]
        rng = np.random.default_rng(505)
        chosen = rng.choice(len(eligible), size=200, replace=False)
        s = IndexSchedule((512,))
        worst = 0.0
        for i in chosen:
            t = float(eligible[i])
            want = tower_eval(prob.g, (t,), s).value
            x = (prob.E.maps[0].eval((t,)), prob.E.maps[1].eval((t,)))
            got = sepfn_eval(f, x, s).value
            worst = max(worst, abs(got - want))
        ok = worst <= 1e-2
        return ok, (
            f"200 samples off the jump: max |f - g| = {worst:.2e}; "
            f"coherence {plan.report['coherence_max']:.2e}"
        )

    passed, detail, secs = _timed(run)
    passed = passed and secs < 120.0
    return CriterionResult("criterion-5 embedding pipeline", passed, detail, secs)


def criterion_6_theorem4_gatekeeping() -> CriterionResult:
    def run():
        pm = euclidean_box((-1.0,), (1.0,))
        t = coord(0)
        para = ParamSet(
            2, BoxDomain((-1.0,), (1.0,)),
            (VectorFn((ContFn(pm, t),)), VectorFn((ContFn(pm, mul(t, t)),))),
        )
        X = euclidean_box((-1.0,), (1.0,))
        prob_bad = RestrictionProblem((X, X), para, gallery("sign"), mode="theorem4")
        try:
            solve_restriction_theorem4(prob_bad, seed=606)
            return False, "parabola graph was not rejected"
        except InjectivityRejected as exc:
            witness = exc.witness
        if witness is None or witness[2] != 2:
            return False, f"missing or wrong collision witness: {witness}"
        prob_good = _cubic_graph_problem(grid=129, s_cut=6, depth=10, check=256, mode="theorem4")
        f, plan = solve_restriction_theorem4(prob_good, seed=606)
        ok = plan.report["within_tolerance"]
        return ok, (
            f"parabola rejected with witness t={witness[0]}, t'={witness[1]} in factor "
            f"{witness[2]}; monotone graph solved, max err {plan.report['restriction_max_err']:.2e}"
        )

    passed, detail, secs = _timed(run)
    return CriterionResult("criterion-6 injectivity gatekeeping", passed, detail, secs)


def criterion_7_theorem5_gluing() -> CriterionResult:
    def run():
        third = 1.0 / 3.0
        pm = euclidean_box((0.0,), (1.0,))
        t = coord(0)
        e2 = pl(t, (0.0, third, 2 * third, 1.0), (0.0, third, third, 0.0))
        E = ParamSet(
            2, BoxDomain((0.0,), (1.0,)),
            (VectorFn((ContFn(pm, t),)), VectorFn((ContFn(pm, e2),))),
            windows=((0.0, third), (2 * third, 1.0)),
        )
        X = euclidean_box((0.0,), (1.0,))
        cover = (
            (BoxDomain((0.0,), (0.45,)), BoxDomain((0.0,), (1.0,))),
            (BoxDomain((0.40,), (0.60,)), BoxDomain((0.0,), (1.0,))),
            (BoxDomain((0.55,), (1.0,)), BoxDomain((0.0,), (1.0,))),
        )
        prob = RestrictionProblem(
            (X, X), E, gallery("step"), mode="theorem5", cover=cover,
            cutoffs=Cutoffs(s_cut=6, depth=10, grid=97, check_cutoff=256),
        )
        f, plan = solve_restriction_theorem5(prob, seed=707)
        if not plan.report["within_tolerance"]:
            return False, f"restriction error {plan.report['restriction_max_err']}"
        rng = np.random.default_rng(707)
        worst_sum = 0.0
        for p in rng.uniform(0.0, 1.0, (10_000, 2)):
            total = sum(w.eval(tuple(p)) for w in plan.weights)
            worst_sum = max(worst_sum, abs(total - 1.0))
        if worst_sum > 1e-12:
            return False, f"weight sums deviate by {worst_sum}"
        s = IndexSchedule((256,))
        patches = f.plan.patches
        worst_single = 0.0
        for t0 in np.linspace(0.0, third, 9):
            x = (E.maps[0].eval((float(t0),)), E.maps[1].eval((float(t0),)))
            glued = sepfn_eval(f, x, s).value
            patch = sepfn_eval(patches[0], x, s).value
            worst_single = max(worst_single, abs(glued - patch))
        for t0 in np.linspace(2 * third, 1.0, 9):
            x = (E.maps[0].eval((float(t0),)), E.maps[1].eval((float(t0),)))
            glued = sepfn_eval(f, x, s).value
            patch = sepfn_eval(patches[2], x, s).value
            worst_single = max(worst_single, abs(glued - patch))
        ok = worst_single <= 1e-12
        return ok, (
            f"max err {plan.report['restriction_max_err']:.2e}; weight-sum deviation "
            f"{worst_sum:.2e} at 10^4 points; single-patch deviation {worst_single:.2e}"
        )

    passed, detail, secs = _timed(run)
    return CriterionResult("criterion-7 partition gluing", passed, detail, secs)


def criterion_8_roundtrip() -> CriterionResult:
    def run():
        # (a) product function, everywhere, at the mesh-driven bound
        pp = pp_structure(BoxDomain((0.0,), (1.0,)), 7)
        tw = tower_from_sepfn(lambda pts: pts[0][0] * pts[1][0], pp, arity=2)
        s7 = IndexSchedule((7,))
        bound = 1.0 * pp.mesh(7)
        rng = np.random.default_rng(808)
        worst_a = 0.0
        pts = list(rng.uniform(0.0, 1.0, (400, 2))) + [
            (a, b) for a in np.linspace(0, 1, 11) for b in np.linspace(0, 1, 11)
        ]
        for x, y in pts:
            got = tower_eval(tw, (float(x), float(y)), s7).value
            worst_a = max(worst_a, abs(got - float(x) * float(y)))
        if worst_a > bound:
            return False, f"product recovery off by {worst_a} > {bound}"
        # (b) diagonal of the sign construction at marked points, |x| >= 0.1
        g = gallery("sign")
        f = build_diagonal_2(g, depth=14)
        pp2 = pp_structure(BoxDomain((-1.0,), (1.0,)), 7)
        tw2 = tower_from_sepfn(f, pp2, eval_schedule=IndexSchedule((1024,)))
        deep = IndexSchedule((1024,))
        worst_b = 0.0
        count = 0
        for c in pp2.marked_points_1d(7):
            if abs(c) < 0.1:
                continue
            count += 1
            got = tower_eval(tw2, (c, c), s7).value
            want = tower_eval(g, (c,), deep).value
            worst_b = max(worst_b, abs(got - want))
        ok = worst_b <= 1e-2
        return ok, (
            f"(a) product: max err {worst_a:.2e} <= {bound:.2e}; "
            f"(b) sign diagonal at {count} marked points: max err {worst_b:.2e}"
        )

    passed, detail, secs = _timed(run)
    passed = passed and secs < 120.0
    return CriterionResult("criterion-8 tower recovery round trip", passed, detail, secs)


def criterion_9_determinism() -> CriterionResult:
    def run():
        from .cli import main

        with tempfile.TemporaryDirectory() as tmp:
            plan = os.path.join(tmp, "plan.json")
            build_spec = os.path.join(tmp, "build.json")
            with open(build_spec, "w", encoding="utf-8") as fh:
                json.dump(
                    {
                        "command": "build",
                        "seed": 909,
                        "build": {
                            "kind": "diagonal",
                            "tower": {"rank": 1, "family": {"kind": "gallery", "name": "sign"}},
                            "n": 2,
                        },
                        "cutoffs": {"tower_depth": 14},
                        "out": plan,
                    },
                    fh,
                )
            eval_spec = os.path.join(tmp, "eval.json")
            csv_out = os.path.join(tmp, "vals.csv")
            with open(eval_spec, "w", encoding="utf-8") as fh:
                json.dump(
                    {
                        "command": "eval",
                        "seed": 909,
                        "eval": {
                            "plan": plan,
                            "grid": {"counts": [9, 9]},
                            "schedule": {"cutoffs": [64]},
                        },
                        "out": csv_out,
                    },
                    fh,
                )
            verify_spec = os.path.join(tmp, "verify.json")
            report_out = os.path.join(tmp, "report.json")
            with open(verify_spec, "w", encoding="utf-8") as fh:
                json.dump(
                    {
                        "command": "verify",
                        "seed": 909,
                        "verify": {
                            "plan": plan,
                            "suites": ["diagonal-agreement", "section-continuity", "joint-oscillation"],
                            "schedule": {"cutoffs": [64]},
                            "centers": 4,
                        },
                        "out": report_out,
                    },
                    fh,
                )

            outputs = {}
            for round_ in (0, 1):
                assert main(["build", "--spec", build_spec]) == 0
                assert main(["eval", "--spec", eval_spec]) == 0
                assert main(["verify", "--spec", verify_spec]) == 0
                blobs = []
                for path in (plan, csv_out, report_out, report_out + ".csv"):
                    with open(path, "rb") as fh:
                        blobs.append(fh.read())
                outputs[round_] = blobs
            ok = outputs[0] == outputs[1]
            return ok, "build, eval and verify outputs byte-identical across reruns"

    passed, detail, secs = _timed(run)
    return CriterionResult("criterion-9 determinism", passed, detail, secs)


ALL_CRITERIA = (
    criterion_1_diagonal_exactness,
    criterion_2_section_continuity,
    criterion_3_joint_negative_control,
    criterion_4_prop1_exactness,
    criterion_5_theorem2_pipeline,
    criterion_6_theorem4_gatekeeping,
    criterion_7_theorem5_gluing,
    criterion_8_roundtrip,
    criterion_9_determinism,
)


def run_all() -> list[CriterionResult]:
    return [fn() for fn in ALL_CRITERIA]
