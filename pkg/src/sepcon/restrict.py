"""Extension of functions from special subsets of products.

Pieces, bottom to top:

* ``mcshane_extend``: inf-convolution f(x) = min_a (g(a) + L d(x,a)),
  exact on the sample set and globally L-Lipschitz.
* ``extend_baire_from_closed``: given A = phi^-1(0) and a tower on A,
  multiply extended levels by phi_k = 1 - min(1, k phi); the limit equals
  the original on A and vanishes identically off A, with level k vanishing
  *exactly* once k phi(x) >= 1.
* ``solve_restriction_theorem2``: parametrized set E whose projections embed
  into the factors; bundle per-level extensions into coordinate maps
  phi_i : X_i -> Z (a truncated weighted-sup sequence model), transport the
  tower onto the common image A, extend it from A, run the diagonal
  construction on Z, and pull back.
* ``solve_restriction_theorem4``: compact factors, projective injectivity
  promoted to embedding, then the same pipeline.
* ``solve_restriction_theorem5``: locally injective E, per-patch solves glued
  with a partition of unity subordinate to a product-box cover.

All set-level checks (injectivity, embedding margins, well-definedness of the
transported tower) are sample-based verdicts with declared budgets, not
proofs; budgets and tolerances are recorded in the emitted plan.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .diagonal import SepFn, Glued, Pullback, build_diagonal_2, build_diagonal_n, sepfn_eval
from .errors import (
    CoverGap,
    InconsistentValues,
    InjectivityRejected,
    NotProjectivelyHomeomorphic,
    PatchNotInjective,
    TruncationTooCoarse,
)
from .expr import ContFn, VectorFn, add, clamp, const, dist_to, mul, sub, vmin
from .partition import partition_of_unity
from .space import BoxDomain, MetricModel, euclidean_box, product_model
from .tower import BaireTower, IndexSchedule, tower_eval, tower_to_json, tower_from_json

_REL_SLACK = 1e-9


# -- McShane extension -------------------------------------------------------------

def data_lipschitz(model: MetricModel, points: np.ndarray, values: np.ndarray) -> float:
    """Smallest L consistent with the samples, inflated by a relative margin
    so near-tie terms cannot dip below sample values in floating point."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(points)
    best = 0.0
    for a in range(n):
        d = model.dist_many(points, points[a])
        dv = np.abs(values - values[a])
        zero = d <= 0.0
        if np.any(dv[zero] > 0.0):
            raise InconsistentValues("distinct values at indistinguishable points")
        mask = ~zero
        if mask.any():
            best = max(best, float((dv[mask] / d[mask]).max()))
    return best * (1.0 + _REL_SLACK)


def mcshane_extend(
    model: MetricModel,
    points,
    values,
    lip: float,
    clamp_range: tuple[float, float] | None = None,
) -> ContFn:
    """f(x) = min_a (g(a) + L d(x, a)), optionally clamped to a value range.

    Requires L-consistency of the data: |g(a) - g(b)| <= L d(a,b) for all
    sample pairs (checked, with a small relative slack for rounding).
    """
    points = [tuple(float(v) for v in p) for p in points]
    values = [float(v) for v in values]
    if len(points) != len(values) or not points:
        raise ValueError("need matching, nonempty points and values")
    if lip < 0:
        raise ValueError("Lipschitz constant must be >= 0")
    pts = np.asarray(points)
    vals = np.asarray(values)
    for a in range(len(points)):
        d = model.dist_many(pts, pts[a])
        if np.any(np.abs(vals - vals[a]) > lip * d * (1 + _REL_SLACK) + 1e-12):
            raise InconsistentValues(
                f"values are not {lip}-consistent on the sample set"
            )
    terms = [
        add(const(v), mul(const(lip), dist_to(p))) if lip > 0 else const(v)
        for p, v in zip(points, values)
    ]
    expr = terms[0] if len(terms) == 1 else vmin(*terms)
    if clamp_range is not None and clamp_range[0] < clamp_range[1]:
        expr = clamp(expr, *clamp_range)
    return ContFn(model, expr)


# -- functionally closed sets and the tower extension --------------------------------

@dataclass(frozen=True)
class FunctionallyClosedSet:
    """A = phi^-1(0) for a continuous phi into [0,1], with stored samples of A."""

    ambient: MetricModel
    phi: ContFn
    samples: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "samples", tuple(tuple(float(v) for v in p) for p in self.samples)
        )


def distance_zero_set(ambient: MetricModel, samples) -> FunctionallyClosedSet:
    """Functionally closed hull of a finite sample set: phi = clamp(min_a d(., a), 0, 1)."""
    samples = [tuple(float(v) for v in p) for p in samples]
    terms = [dist_to(p) for p in samples]
    expr = terms[0] if len(terms) == 1 else vmin(*terms)
    return FunctionallyClosedSet(ambient, ContFn(ambient, clamp(expr, 0.0, 1.0)), tuple(samples))


@dataclass(frozen=True)
class SampledLevel:
    """A level function known on a finite sample set with a declared Lipschitz
    constant; extension turns it into a McShane ContFn."""

    model: MetricModel
    points: tuple[tuple[float, ...], ...]
    values: tuple[float, ...]
    lip: float

    def eval(self, x, check: bool = True) -> float:
        d = self.model.dist_many(np.asarray(self.points), x)
        return float((np.asarray(self.values) + self.lip * d).min())

    __call__ = eval


def _cutoff_expr(phi: ContFn, k: int):
    # phi_k = 1 - min(1, k phi): equals 1 exactly on A, 0 exactly once k phi >= 1
    return sub(const(1.0), vmin(const(1.0), mul(const(k), phi.expr)))


def _extend_level(A: FunctionallyClosedSet, base) -> ContFn:
    if isinstance(base, ContFn):
        return base  # already global on the ambient model
    if isinstance(base, SampledLevel):
        return mcshane_extend(A.ambient, base.points, base.values, base.lip)
    raise ValueError(f"cannot extend level of type {type(base)}")


def extend_baire_from_closed(A: FunctionallyClosedSet, g: BaireTower) -> BaireTower:
    """Extend a tower on A to the ambient space: level k becomes
    (extension of level k) * phi_k.  On A every phi_k is 1 and the limit is
    unchanged; off A the levels vanish exactly for k >= 1/phi(x)."""
    model = A.ambient

    if g.rank == 0:
        ext = _extend_level(A, g.base)

        def fam0(k: int) -> BaireTower:
            e = mul(ext.expr, _cutoff_expr(A.phi, k))
            return BaireTower(0, model, base=ContFn(model, e))

        return BaireTower(1, model, family=fam0, max_index=g.max_index)

    if g.rank == 1:

        def fam1(k: int) -> BaireTower:
            ext = _extend_level(A, g.level(k).base)
            e = mul(ext.expr, _cutoff_expr(A.phi, k))
            return BaireTower(0, model, base=ContFn(model, e))

        return BaireTower(1, model, family=fam1, max_index=g.max_index)

    def fam(k: int) -> BaireTower:
        inner = extend_baire_from_closed(A, g.level(k))
        cut = ContFn(model, _cutoff_expr(A.phi, k))
        return inner.map_bases(
            lambda b, _c=cut: ContFn(model, mul(b.expr, _c.expr))
        )

    return BaireTower(g.rank, model, family=fam, max_index=g.max_index)


# -- parametrized subsets of products -------------------------------------------------

@dataclass(frozen=True)
class ParamSet:
    """E = {(e_1(t), ..., e_n(t)) : t in the parameter windows}.

    ``maps`` hold one bundle per factor (out_dim = factor dimension).
    ``windows`` restricts the parameter interval to the sub-intervals that
    actually carry E (a two-piece set parametrizes over two windows).
    Bi-Lipschitz claims, when present, are sample-checked by the solvers.
    """

    n: int
    param_domain: BoxDomain
    maps: tuple[VectorFn, ...]
    windows: tuple[tuple[float, float], ...] = ()
    bilip: tuple[tuple[float, float] | None, ...] = ()

    def __post_init__(self):
        if self.param_domain.dim != 1:
            raise ValueError("one-parameter sets only")
        if len(self.maps) != self.n:
            raise ValueError("one map per factor required")
        if not self.windows:
            object.__setattr__(
                self, "windows", ((self.param_domain.lo[0], self.param_domain.hi[0]),)
            )
        if not self.bilip:
            object.__setattr__(self, "bilip", (None,) * self.n)

    def grid(self, count: int) -> np.ndarray:
        """Deterministic parameter grid: the uniform ``count``-point lattice
        over the full parameter interval restricted to the windows, window
        endpoints included.  Restricting the windows and re-gridding with the
        same count yields a subset, which keeps patch solves sample-exact on
        the points their parent problem checks."""
        lattice = np.linspace(self.param_domain.lo[0], self.param_domain.hi[0], count)
        out: list[float] = []
        for a, b in self.windows:
            out.append(a)
            out.append(b)
            out.extend(lattice[(lattice >= a - 1e-12) & (lattice <= b + 1e-12)].tolist())
        return np.unique(np.asarray(out))

    def point(self, t: float) -> tuple[tuple[float, ...], ...]:
        return tuple(m.eval((t,)) for m in self.maps)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "param_domain": self.param_domain.to_json(),
            "maps": [m.to_json() for m in self.maps],
            "windows": [list(w) for w in self.windows],
            "bilip": [list(b) if b else None for b in self.bilip],
        }

    @staticmethod
    def from_json(obj: dict) -> "ParamSet":
        return ParamSet(
            obj["n"],
            BoxDomain.from_json(obj["param_domain"]),
            tuple(VectorFn.from_json(m) for m in obj["maps"]),
            tuple(tuple(w) for w in obj.get("windows", [])),
            tuple(tuple(b) if b else None for b in obj.get("bilip", [])),
        )


@dataclass(frozen=True)
class InjectivityVerdict:
    accepted: bool
    witness: tuple[float, float, int, float] | None = None  # (t, t', factor, dist)
    pairs_checked: int = 0


def check_projective_injectivity(
    E: ParamSet,
    pairs: int = 20000,
    tolerance: float = 1e-9,
    separation: float = 1e-3,
    seed: int = 0,
) -> InjectivityVerdict:
    """Accept iff no sampled parameter pair with |t - t'| >= separation
    collides in some coordinate (distance < tolerance).  Returns the first
    colliding pair as a witness on rejection."""
    grid_n = max(3, int(math.isqrt(2 * pairs)))
    params = E.grid(grid_n)
    rng = np.random.default_rng(seed)
    extra = [
        float(rng.uniform(a, b)) for a, b in E.windows for _ in range(max(1, grid_n // 8))
    ]
    params = np.unique(np.concatenate([params, extra]))
    images = [np.asarray([E.maps[i].eval((t,)) for t in params]) for i in range(E.n)]
    checked = 0
    for a in range(len(params)):
        if checked >= pairs:
            break
        for b in range(a + 1, len(params)):
            checked += 1
            if abs(params[a] - params[b]) < separation:
                continue
            for i in range(E.n):
                dist = float(np.sqrt(((images[i][a] - images[i][b]) ** 2).sum()))
                if dist < tolerance:
                    return InjectivityVerdict(
                        False, (float(params[a]), float(params[b]), i + 1, dist), checked
                    )
            if checked >= pairs:
                break
    return InjectivityVerdict(True, None, checked)


# -- the restriction problems ----------------------------------------------------------

@dataclass(frozen=True)
class Cutoffs:
    s_cut: int = 8          # truncation of the index set per limit level
    depth: int = 12         # radius-schedule depth for the inner construction
    grid: int = 201         # parameter sample count
    check_cutoff: int = 512  # tower cutoff used when comparing f against g

    def to_json(self) -> dict:
        return {
            "s_cut": self.s_cut,
            "depth": self.depth,
            "grid": self.grid,
            "check_cutoff": self.check_cutoff,
        }

    @staticmethod
    def from_json(obj: dict) -> "Cutoffs":
        return Cutoffs(**obj)


@dataclass(frozen=True)
class Tolerances:
    restriction: float = 1e-2
    coherence: float = 1e-9
    injectivity: float = 1e-9
    separation: float = 1e-3

    def to_json(self) -> dict:
        return {
            "restriction": self.restriction,
            "coherence": self.coherence,
            "injectivity": self.injectivity,
            "separation": self.separation,
        }

    @staticmethod
    def from_json(obj: dict) -> "Tolerances":
        return Tolerances(**obj)


@dataclass(frozen=True)
class RestrictionProblem:
    factors: tuple[MetricModel, ...]
    E: ParamSet
    g: BaireTower
    mode: str = "theorem2"
    cover: tuple[tuple[BoxDomain, ...], ...] = ()
    cutoffs: Cutoffs = field(default_factory=Cutoffs)
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.mode not in ("theorem2", "theorem4", "theorem5"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if len(self.factors) != self.E.n:
            raise ValueError("factor count must match the set arity")
        if self.g.rank > self.E.n - 1:
            raise ValueError("tower rank exceeds n-1")

    def to_json(self) -> dict:
        return {
            "factors": [m.to_json() for m in self.factors],
            "set": self.E.to_json(),
            "g": tower_to_json(self.g, self.cutoffs.check_cutoff),
            "mode": self.mode,
            "cover": [[b.to_json() for b in w] for w in self.cover],
            "cutoffs": self.cutoffs.to_json(),
            "tolerances": self.tolerances.to_json(),
        }

    @staticmethod
    def from_json(obj: dict) -> "RestrictionProblem":
        return RestrictionProblem(
            factors=tuple(MetricModel.from_json(m) for m in obj["factors"]),
            E=ParamSet.from_json(obj["set"]),
            g=tower_from_json(obj["g"]),
            mode=obj.get("mode", "theorem2"),
            cover=tuple(
                tuple(BoxDomain.from_json(b) for b in w) for w in obj.get("cover", [])
            ),
            cutoffs=Cutoffs.from_json(obj["cutoffs"]) if "cutoffs" in obj else Cutoffs(),
            tolerances=(
                Tolerances.from_json(obj["tolerances"]) if "tolerances" in obj else Tolerances()
            ),
        )


@dataclass
class Theorem2Plan:
    """Everything the embedding pipeline produced, for inspection and audit."""

    s_indices: list           # ordered truncated index set, 0 first
    weights: list[float]      # metric weights per index
    extensions: list[list[ContFn]]   # [factor][index position]
    embeddings: list[VectorFn]
    z_model: MetricModel
    image_set: FunctionallyClosedSet
    extended_tower: BaireTower
    inner: SepFn
    grid: np.ndarray
    report: dict


def _s_indices(rank: int, k_cut: int) -> list:
    """{0} followed by {1..K}^rank in lexicographic order (rank >= 1)."""
    if rank == 0:
        return [0]
    return [0] + [tuple(t) for t in itertools.product(range(1, k_cut + 1), repeat=rank)]


def _index_weight(s) -> float:
    if s == 0:
        return 1.0
    total = sum(s) if isinstance(s, tuple) else int(s)
    return 2.0 ** -total


def _tower_level_base(g: BaireTower, path) -> object:
    t = g
    for k in (path if isinstance(path, tuple) else (path,)):
        if t.rank == 0:
            break
        t = t.level(k)
    while t.rank > 0:  # rank lower than n-1: repeat the deepest available level
        t = t.level(1)
    return t.base


def solve_restriction_theorem2(
    problem: RestrictionProblem, seed: int = 0
) -> tuple[SepFn, Theorem2Plan]:
    """Run the embedding pipeline; the returned pullback function agrees with
    the tower on the sampled points of E within the declared tolerance."""
    E, g, cut, tol = problem.E, problem.g, problem.cutoffs, problem.tolerances
    n = E.n

    verdict = check_projective_injectivity(
        E, tolerance=tol.injectivity, separation=tol.separation, seed=seed
    )
    if not verdict.accepted:
        raise NotProjectivelyHomeomorphic(
            f"projection collision at parameters {verdict.witness[:2]} "
            f"in factor {verdict.witness[2]}"
        )
    _check_bilip_claims(E, seed=seed)

    params = E.grid(cut.grid)
    factor_pts = [np.asarray([E.maps[i].eval((t,)) for t in params]) for i in range(n)]

    rank = n - 1
    s_idx = _s_indices(rank, cut.s_cut)
    weights = [_index_weight(s) for s in s_idx]

    # level values on the parameter grid, one row per nonzero index
    level_values: dict = {}
    for s in s_idx[1:]:
        base = _tower_level_base(g, s)
        level_values[s] = np.asarray([base.eval((t,)) for t in params])

    # extensions f_s^(i): index 0 is the defining function of E_i, the rest
    # are McShane extensions of g_s pulled through the parametrization
    extensions: list[list[ContFn]] = []
    for i in range(n):
        model_i = problem.factors[i]
        cols = [_defining_fn(model_i, factor_pts[i])]
        for s in s_idx[1:]:
            vals = level_values[s]
            lip = data_lipschitz(model_i, factor_pts[i], vals)
            lo, hi = float(vals.min()), float(vals.max())
            rng_pair = (lo, hi) if lo < hi else None
            cols.append(mcshane_extend(model_i, factor_pts[i], vals, lip, rng_pair))
        extensions.append(cols)

    embeddings = [VectorFn(tuple(cols)) for cols in extensions]

    # the sequence model Z: per-coordinate bounds = union of component ranges
    los = [min(ext[j].range[0] for ext in extensions) for j in range(len(s_idx))]
    his = [max(ext[j].range[1] for ext in extensions) for j in range(len(s_idx))]
    pad = 1e-9  # absorbs rounding so images stay strictly inside the box
    z_box = BoxDomain(tuple(v - pad for v in los), tuple(v + pad for v in his))
    z_model = MetricModel("weighted-sup-sequence", z_box, tuple(weights))

    # common image A and coherence of the bundles across factors
    z_samples = np.asarray([embeddings[0].eval(p) for p in factor_pts[0]])
    coherence = 0.0
    for i in range(1, n):
        zi = np.asarray([embeddings[i].eval(p) for p in factor_pts[i]])
        coherence = max(
            coherence,
            max(z_model.dist(za, zb) for za, zb in zip(z_samples, zi)),
        )
    if coherence > tol.coherence:
        raise TruncationTooCoarse(
            f"bundle images disagree across factors by {coherence}"
        )

    _check_transport_welldefined(z_model, z_samples, level_values, tol.coherence)

    A = distance_zero_set(z_model, [tuple(z) for z in z_samples])
    transported = _transport_tower(g, z_model, A, params, rank)
    extended = extend_baire_from_closed(A, transported)

    inner = (
        build_diagonal_2(extended, depth=cut.depth)
        if n == 2
        else build_diagonal_n(extended, n, depth=cut.depth, inner_depth=cut.depth)
    )

    f = SepFn(
        n,
        problem.factors[0],
        Pullback(inner, tuple(embeddings), snap_tol=tol.coherence),
        diagonal_tower=None,
        empirically_validated=inner.empirically_validated,
    )

    s_check = IndexSchedule((cut.check_cutoff,) * max(1, rank))
    errs = []
    for j, t in enumerate(params):
        want = tower_eval(g, (float(t),), s_check).value
        got = sepfn_eval(f, tuple(tuple(p) for p in (fp[j] for fp in factor_pts)), s_check).value
        errs.append(abs(want - got))
    report = {
        "restriction_max_err": float(max(errs)) if errs else 0.0,
        "coherence_max": float(coherence),
        "samples": int(len(params)),
        "injectivity_pairs": verdict.pairs_checked,
        "empirically_validated": f.empirically_validated,
    }
    if report["restriction_max_err"] > tol.restriction:
        report["within_tolerance"] = False
    else:
        report["within_tolerance"] = True

    plan = Theorem2Plan(
        s_idx, weights, extensions, embeddings, z_model, A, extended, inner, params, report
    )
    return f, plan


def _defining_fn(model: MetricModel, pts: np.ndarray) -> ContFn:
    terms = [dist_to(tuple(p)) for p in pts]
    expr = terms[0] if len(terms) == 1 else vmin(*terms)
    return ContFn(model, clamp(expr, 0.0, 1.0))


def _check_bilip_claims(E: ParamSet, seed: int, budget: int = 400) -> None:
    rng = np.random.default_rng(seed)
    ts = np.concatenate([rng.uniform(a, b, budget // max(1, len(E.windows)))
                         for a, b in E.windows])
    for i, claim in enumerate(E.bilip):
        if claim is None:
            continue
        ell, big = claim
        img = np.asarray([E.maps[i].eval((t,)) for t in ts])
        for a in range(0, len(ts), 7):
            d = np.sqrt(((img - img[a]) ** 2).sum(axis=1))
            dt = np.abs(ts - ts[a])
            bad_low = d < ell * dt * (1 - 1e-9) - 1e-12
            bad_high = d > big * dt * (1 + 1e-9) + 1e-12
            if bad_low.any() or bad_high.any():
                raise NotProjectivelyHomeomorphic(
                    f"claimed bi-Lipschitz constants fail for factor {i + 1}"
                )


def _check_transport_welldefined(z_model, z_samples, level_values, tol) -> None:
    n = len(z_samples)
    for a in range(n):
        d = z_model.dist_many(z_samples, z_samples[a])
        close = np.flatnonzero(d <= tol)
        for b in close:
            if b == a:
                continue
            for vals in level_values.values():
                if abs(vals[a] - vals[b]) > 1e-9:
                    raise TruncationTooCoarse(
                        "colliding embedded points carry different tower values"
                    )


def _transport_tower(
    g: BaireTower, z_model: MetricModel, A: FunctionallyClosedSet,
    params: np.ndarray, rank: int
) -> BaireTower:
    """Mirror g's structure over the image set: every rank-0 base becomes a
    sampled level on the A-samples (values read through the parametrization)."""
    zpts = A.samples

    def build(sub: BaireTower, depth_left: int) -> BaireTower:
        if depth_left == 0:
            base = sub
            while base.rank > 0:
                base = base.level(1)
            vals = tuple(float(base.base.eval((float(t),))) for t in params)
            lip = data_lipschitz(z_model, np.asarray(zpts), np.asarray(vals))
            return BaireTower(
                0, z_model, base=SampledLevel(z_model, zpts, vals, lip)
            )
        if sub.rank == 0:
            inner = build(sub, 0)
            return BaireTower(depth_left, z_model, family=lambda k: _descend(inner, depth_left - 1))

        def fam(k: int) -> BaireTower:
            return build(sub.level(k), depth_left - 1)

        return BaireTower(depth_left, z_model, family=fam)

    def _descend(leaf: BaireTower, depth_left: int) -> BaireTower:
        if depth_left == 0:
            return leaf
        return BaireTower(depth_left, z_model, family=lambda k: _descend(leaf, depth_left - 1))

    return build(g, rank)


def solve_restriction_theorem4(problem: RestrictionProblem, seed: int = 0) -> tuple[SepFn, Theorem2Plan]:
    """Compact factors: projective injectivity is promoted to embedding, then
    the embedding pipeline runs unchanged."""
    verdict = check_projective_injectivity(
        problem.E,
        tolerance=problem.tolerances.injectivity,
        separation=problem.tolerances.separation,
        seed=seed,
    )
    if not verdict.accepted:
        t, t2, i, d = verdict.witness
        raise InjectivityRejected(
            f"projection {i} collides at t={t}, t'={t2} (distance {d})",
            witness=verdict.witness,
        )
    return solve_restriction_theorem2(problem, seed=seed)


@dataclass
class Theorem5Plan:
    patches: list
    weights: list
    windows: list
    report: dict


def solve_restriction_theorem5(problem: RestrictionProblem, seed: int = 0) -> tuple[SepFn, Theorem5Plan]:
    """Cover the product with boxes, solve each patch on its (compact)
    sub-product, extend patch solutions by zero outside their windows, and
    glue with a partition of unity subordinate to the cover."""
    if not problem.cover:
        raise ValueError("theorem5 requires a cover")
    E, cut, tol = problem.E, problem.cutoffs, problem.tolerances
    n = E.n

    params = E.grid(cut.grid)
    images = [np.asarray([E.maps[i].eval((t,)) for t in params]) for i in range(n)]

    patches: list[SepFn | None] = []
    patch_plans = []
    for w, boxes in enumerate(problem.cover):
        sub_factors = []
        ok = True
        for i, b in enumerate(boxes):
            clipped = b.intersect(problem.factors[i].box)
            if clipped is None:
                ok = False
                break
            sub_factors.append(euclidean_box(clipped.lo, clipped.hi))
        if not ok:
            patches.append(None)
            patch_plans.append(None)
            continue

        inside = np.ones(len(params), dtype=bool)
        for i, b in enumerate(boxes):
            for c in range(b.dim):
                inside &= (images[i][:, c] >= b.lo[c] - 1e-12) & (
                    images[i][:, c] <= b.hi[c] + 1e-12
                )
        if not inside.any():
            patches.append(None)
            patch_plans.append(None)
            continue

        windows = _runs_to_windows(params, inside)
        sub_set = ParamSet(n, E.param_domain, E.maps, tuple(windows))
        sub_problem = RestrictionProblem(
            factors=tuple(sub_factors),
            E=sub_set,
            g=problem.g,
            mode="theorem4",
            cutoffs=cut,
            tolerances=tol,
        )
        try:
            fp, plan = solve_restriction_theorem4(sub_problem, seed=seed)
        except InjectivityRejected as exc:
            raise PatchNotInjective(
                f"cover box {w} meets E non-injectively", witness=exc.witness
            ) from exc
        patches.append(fp)
        patch_plans.append(plan)

    product = product_model(list(problem.factors))
    cover_boxes = []
    for boxes in problem.cover:
        joined = BoxDomain(
            tuple(v for b in boxes for v in b.lo), tuple(v for b in boxes for v in b.hi)
        ).intersect(product.box)
        if joined is None:
            raise CoverGap("cover box does not meet the product domain")
        cover_boxes.append(joined)
    weights = partition_of_unity(cover_boxes, product, seed=seed)

    plan_windows = tuple(tuple(b for b in boxes) for boxes in problem.cover)
    glued = Glued(
        weights=tuple(w.fn for w in weights),
        windows=plan_windows,
        patches=tuple(patches),
        product_model=product,
    )
    f = SepFn(n, problem.factors[0], glued)

    s_check = IndexSchedule((cut.check_cutoff,) * max(1, problem.g.rank))
    errs = []
    for j, t in enumerate(params):
        want = tower_eval(problem.g, (float(t),), s_check).value
        x = tuple(tuple(img[j]) for img in images)
        got = sepfn_eval(f, x, s_check).value
        errs.append(abs(want - got))
    report = {
        "restriction_max_err": float(max(errs)) if errs else 0.0,
        "samples": int(len(params)),
        "patches_solved": sum(1 for p in patches if p is not None),
        "patches_total": len(problem.cover),
    }
    report["within_tolerance"] = report["restriction_max_err"] <= tol.restriction
    return f, Theorem5Plan(patch_plans, weights, plan_windows, report)


def _runs_to_windows(params: np.ndarray, mask: np.ndarray) -> list[tuple[float, float]]:
    windows = []
    start = None
    for j, flag in enumerate(mask):
        if flag and start is None:
            start = j
        elif not flag and start is not None:
            windows.append((float(params[start]), float(params[j - 1])))
            start = None
    if start is not None:
        windows.append((float(params[start]), float(params[-1])))
    return [(a, b) for a, b in windows if b > a]
