"""Numerical verification: diagonal agreement, section continuity,
joint-discontinuity probes, and the inverse approximation that recovers a
tower from a separately continuous function.

Every probe is a finite-sample verdict with explicit budgets and seeds,
deterministic given both.  Oscillation verdicts are evidence, not proofs;
the joint probe is the deliberate negative control that separates
"continuous in each variable" from "continuous".
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .diagonal import SepFn, factor_models, sepfn_eval
from .errors import BudgetExceeded, DimensionMismatch
from .expr import ContFn, coord, mul, pl, pl_value
from .space import BoxDomain, MetricModel, euclidean_box, product_model
from .tower import BaireTower, IndexSchedule, tower_eval


# -- dyadic marked covers ------------------------------------------------------------

@dataclass(frozen=True)
class PPStructure:
    """Per level n: overlapping dyadic boxes of side width * 2^-n with 50%
    overlap, marked points at box centers, triangular hats (plateaued at the
    two domain-boundary boxes so the normalizing sum never vanishes).

    Levels are implicit: boxes, marked points and hat values are computed
    from indices, so deep levels cost nothing until touched.
    """

    domain: BoxDomain
    depth: int

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")

    def side(self, level: int, i: int) -> float:
        return self.domain.width(i) * 2.0 ** -level

    def mesh(self, level: int) -> float:
        return math.sqrt(
            sum(self.side(level, i) ** 2 for i in range(self.domain.dim))
        )

    def count_1d(self, level: int) -> int:
        return 2 ** (level + 1) - 1

    def center_1d(self, level: int, i: int, j: int) -> float:
        s = self.side(level, i)
        return self.domain.lo[i] + (j + 1) * (s / 2.0)

    def _hat_breaks(self, level: int, i: int, j: int):
        s = self.side(level, i)
        c = self.center_1d(level, i, j)
        last = self.count_1d(level) - 1
        if j == 0:
            return (c, c + s / 2.0), (1.0, 0.0)
        if j == last:
            return (c - s / 2.0, c), (0.0, 1.0)
        return (c - s / 2.0, c, c + s / 2.0), (0.0, 1.0, 0.0)

    def hat_value_1d(self, level: int, i: int, j: int, x: float) -> float:
        xs, ys = self._hat_breaks(level, i, j)
        return pl_value(xs, ys, x)

    def covering_1d(self, level: int, i: int, x: float) -> list[int]:
        s = self.side(level, i)
        u = (x - self.domain.lo[i]) / (s / 2.0)
        last = self.count_1d(level) - 1
        lo = max(0, math.ceil(u - 2.0))
        hi = min(last, math.floor(u))
        return list(range(lo, hi + 1))

    def covering(self, level: int, x) -> list[tuple[tuple[int, ...], float, tuple[float, ...]]]:
        """(index, normalized weight, marked point) for the boxes holding x.
        Tensor weights factor per coordinate, so normalization does too."""
        if level > self.depth:
            raise BudgetExceeded(f"level {level} beyond structure depth {self.depth}")
        per_coord = []
        for i in range(self.domain.dim):
            js = self.covering_1d(level, i, float(x[i]))
            vals = [self.hat_value_1d(level, i, j, float(x[i])) for j in js]
            total = sum(vals)
            if total <= 0.0:
                raise BudgetExceeded("point escaped the dyadic cover")
            per_coord.append([(j, v / total) for j, v in zip(js, vals)])
        out = []
        idx = [0] * self.domain.dim
        while True:
            multi = tuple(per_coord[i][idx[i]][0] for i in range(self.domain.dim))
            w = 1.0
            for i in range(self.domain.dim):
                w *= per_coord[i][idx[i]][1]
            if w != 0.0:
                out.append(
                    (multi, w, tuple(self.center_1d(level, i, multi[i])
                                     for i in range(self.domain.dim)))
                )
            for i in range(self.domain.dim):
                idx[i] += 1
                if idx[i] < len(per_coord[i]):
                    break
                idx[i] = 0
            else:
                return out

    def box(self, level: int, multi) -> BoxDomain:
        lo, hi = [], []
        for i, j in enumerate(multi):
            s = self.side(level, i)
            lo.append(self.domain.lo[i] + j * s / 2.0)
            hi.append(self.domain.lo[i] + j * s / 2.0 + s)
        return BoxDomain(tuple(lo), tuple(hi))

    def marked(self, level: int, multi) -> tuple[float, ...]:
        return tuple(self.center_1d(level, i, j) for i, j in enumerate(multi))

    def hat_fn(self, level: int, multi) -> ContFn:
        """The defining hat as an expression tree (matches hat_value_1d exactly)."""
        model = euclidean_box(self.domain.lo, self.domain.hi)
        factors = []
        for i, j in enumerate(multi):
            xs, ys = self._hat_breaks(level, i, j)
            factors.append(pl(coord(i), xs, ys))
        expr = factors[0] if len(factors) == 1 else mul(*factors)
        return ContFn(model, expr)

    def marked_points_1d(self, level: int, i: int = 0) -> list[float]:
        return [self.center_1d(level, i, j) for j in range(self.count_1d(level))]


def pp_structure(domain: BoxDomain, depth: int) -> PPStructure:
    return PPStructure(domain, depth)


# -- recovering a tower from a separately continuous function --------------------------

@dataclass(frozen=True)
class SectionBlend:
    """Innermost function of the recovered tower: a finite partition-of-unity
    combination of sections, one unfolded variable per fixed level."""

    model: MetricModel            # product model
    fn: object                    # callable on a tuple of factor points
    pp: PPStructure
    arity: int
    levels: tuple[int, ...]       # pp level per unfolded variable

    def eval(self, x, check: bool = True) -> float:
        d = self.pp.domain.dim
        if len(x) != d * self.arity:
            raise DimensionMismatch("point length does not match the product")
        pts = [tuple(float(v) for v in x[i * d:(i + 1) * d]) for i in range(self.arity)]

        def rec(i: int, weight: float, marks: tuple) -> float:
            if i == len(self.levels):
                return weight * self.fn(marks + tuple(pts[i:]))
            acc = 0.0
            for _, w, center in self.pp.covering(self.levels[i], pts[i]):
                acc += rec(i + 1, weight * w, marks + (center,))
            return acc

        return rec(0, 1.0, ())

    __call__ = eval


def tower_from_sepfn(
    f,
    pp: PPStructure,
    arity: int | None = None,
    eval_schedule: IndexSchedule | None = None,
) -> BaireTower:
    """Rank-(n-1) tower whose level (k_1, ..., k_{n-1}) replaces variable i by
    a level-k_i marked-point average; each innermost function is continuous
    and the iterated limit recovers the function pointwise."""
    if isinstance(f, SepFn):
        n = f.arity
        s = eval_schedule or IndexSchedule((64,) * max(1, f.arity - 1))
        fn = lambda pts: sepfn_eval(f, pts, s).value
    else:
        if arity is None:
            raise ValueError("arity required for a bare callable")
        n = arity
        fn = f
    factor = euclidean_box(pp.domain.lo, pp.domain.hi)
    product = product_model([factor] * n)

    def make(levels: tuple[int, ...]) -> BaireTower:
        remaining = n - 1 - len(levels)
        if remaining == 0:
            return BaireTower(
                0, product, base=SectionBlend(product, fn, pp, n, levels)
            )
        return BaireTower(
            remaining,
            product,
            family=lambda k: make(levels + (k,)),
            max_index=pp.depth,
        )

    return make(())


# -- reports ---------------------------------------------------------------------------

@dataclass
class AgreementReport:
    points: list
    diffs: list[float]
    max_diff: float
    tolerance: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "kind": "diagonal-agreement",
            "max_diff": self.max_diff,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "points": [list(p) for p in self.points],
            "diffs": self.diffs,
        }


@dataclass
class ContinuityReport:
    center: tuple[float, ...]          # flat product-point coordinates
    section_index: int                 # -1 for a joint probe
    radii: list[float]
    oscillations: list[float]
    verdict: str                       # "decaying" | "stalled"
    budget: int
    tolerance: float
    seed: int

    def to_json(self) -> dict:
        return {
            "kind": "section-continuity" if self.section_index >= 0 else "joint-oscillation",
            "center": list(self.center),
            "section": self.section_index,
            "radii": self.radii,
            "oscillations": self.oscillations,
            "verdict": self.verdict,
            "budget": self.budget,
            "tolerance": self.tolerance,
            "seed": self.seed,
        }

    def csv_rows(self) -> list[list]:
        return [
            list(self.center) + [self.section_index, r, o, self.verdict]
            for r, o in zip(self.radii, self.oscillations)
        ]


def reports_to_csv(reports: list[ContinuityReport]) -> str:
    """Fixed column order: point coordinates, section index, radius,
    oscillation, then the report verdict."""
    if not reports:
        return ""
    dim = len(reports[0].center)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i + 1}" for i in range(dim)] + ["section", "radius", "oscillation", "verdict"])
    for rep in reports:
        for row in rep.csv_rows():
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# -- probes ----------------------------------------------------------------------------

def check_diagonal_agreement(
    f: SepFn,
    g: BaireTower,
    points,
    s: IndexSchedule,
    tolerance: float = 0.0,
    embed=None,
) -> AgreementReport:
    """Per-point |f on the embedded point - tower value|.  With the default
    diagonal embedding both sides share one code path, so the differences
    are exactly zero for any construction carrying its own diagonal tower."""
    if embed is None:
        embed = lambda x: (tuple(x),) * f.arity
    diffs = []
    pts = []
    for x in points:
        x = tuple(float(v) for v in x)
        want = tower_eval(g, x, s).value
        got = sepfn_eval(f, embed(x), s).value
        pts.append(x)
        diffs.append(abs(got - want))
    mx = max(diffs) if diffs else 0.0
    return AgreementReport(pts, diffs, mx, tolerance, mx <= tolerance)


def _section_offsets(rng: np.random.Generator, dim: int, r: float, budget: int):
    offs = []
    for i in range(dim):
        unit = [0.0] * dim
        unit[i] = r
        offs.append(tuple(unit))
        unit2 = [0.0] * dim
        unit2[i] = -r
        offs.append(tuple(unit2))
        half = [0.0] * dim
        half[i] = r / 2.0
        offs.append(tuple(half))
    for _ in range(max(0, budget - len(offs))):
        v = rng.uniform(-r, r, dim)
        offs.append(tuple(v.tolist()))
    return offs


def _tail_decays(oscillations: list[float], tol: float) -> bool:
    if not oscillations or oscillations[-1] > tol:
        return False
    peak = int(np.argmax(oscillations))
    tail = oscillations[peak:]
    return all(b <= a + 1e-9 for a, b in zip(tail, tail[1:]))


def check_section_continuity(
    f: SepFn,
    center,
    index: int,
    radii,
    s: IndexSchedule,
    budget: int = 32,
    tolerance: float = 1e-3,
    seed: int = 0,
) -> ContinuityReport:
    """Oscillation of the section through ``center`` that varies factor
    ``index``, over shrinking balls.  Verdict ``decaying`` iff the tail past
    the peak is nonincreasing and ends below the tolerance."""
    center = tuple(tuple(float(v) for v in p) for p in center)
    radii = [float(r) for r in radii]
    if any(a <= b for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    rng = np.random.default_rng(seed)
    model = factor_models(f)[index]
    base_val = sepfn_eval(f, center, s).value
    dim = len(center[index])
    oscs = []
    for r in radii:
        worst = 0.0
        for off in _section_offsets(rng, dim, r, budget):
            moved = tuple(c + o for c, o in zip(center[index], off))
            if not model.contains(moved):
                continue
            x = tuple(moved if i == index else p for i, p in enumerate(center))
            worst = max(worst, abs(sepfn_eval(f, x, s).value - base_val))
        oscs.append(worst)
    # nested balls: a sample inside a small ball lies in every larger one, so
    # fold the small-radius maxima back into the large-radius estimates
    for j in range(len(oscs) - 2, -1, -1):
        oscs[j] = max(oscs[j], oscs[j + 1])
    verdict = "decaying" if _tail_decays(oscs, tolerance) else "stalled"
    flat = tuple(v for p in center for v in p)
    return ContinuityReport(flat, index, radii, oscs, verdict, budget, tolerance, seed)


def scaled_schedule(base: IndexSchedule, r: float, factor: float = 4.0) -> IndexSchedule:
    """Cutoffs matched to a probe scale: diagonal limits must be resolved at
    least as finely as the box being probed."""
    k = max(max(base.cutoffs), int(math.ceil(factor / r)))
    return IndexSchedule((k,) * len(base.cutoffs), base.eps)


def check_joint_oscillation(
    f: SepFn,
    center,
    radii,
    s: IndexSchedule,
    budget: int = 32,
    tolerance: float = 1e-3,
    seed: int = 0,
    adapt_cutoffs: bool = True,
) -> ContinuityReport:
    """Joint oscillation over product boxes shrinking to ``center``; samples
    always include diagonal displacements, the axis extremes, and seeded
    interior points.  By default the tower cutoffs scale with the probe
    radius so diagonal values are evaluated at matching resolution."""
    center = tuple(tuple(float(v) for v in p) for p in center)
    radii = [float(r) for r in radii]
    rng = np.random.default_rng(seed)
    models = factor_models(f)
    oscs = []
    for r in radii:
        sched = scaled_schedule(s, r) if adapt_cutoffs else s
        base_val = sepfn_eval(f, center, sched).value
        probes = []
        for delta in (r / 2.0, -r / 2.0, r / 4.0, -r / 4.0):
            probes.append(tuple(tuple(c + delta for c in p) for p in center))
        for _ in range(budget):
            probes.append(
                tuple(
                    tuple(c + o for c, o in zip(p, rng.uniform(-r, r, len(p))))
                    for p in center
                )
            )
        worst = 0.0
        for x in probes:
            if not all(m.contains(p) for m, p in zip(models, x)):
                continue
            worst = max(worst, abs(sepfn_eval(f, x, sched).value - base_val))
        oscs.append(worst)
    verdict = "decaying" if _tail_decays(oscs, tolerance) else "stalled"
    flat = tuple(v for p in center for v in p)
    return ContinuityReport(flat, -1, radii, oscs, verdict, budget, tolerance, seed)
