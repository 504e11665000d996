"""Iterated pointwise limits of continuous functions ("towers").

A rank-0 tower wraps a single continuous function; a rank-r tower is a
lazily materialized family k -> rank-(r-1) tower.  Evaluation replaces each
limit level with a finite cutoff.  A tower may carry a rate certificate: a
family of continuous envelopes tau_k bounding the whole tail
|evaluation at cutoffs >= k  -  limit| pointwise, which turns truncation
into a certified error bar.  Without one, evaluation reports the observed
Cauchy increment as a diagnostic, never as a bound.

The gallery holds the canonical discontinuous examples used throughout the
test suite; every gallery tower whose tail admits a continuous envelope
ships one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .errors import BudgetExceeded, ParseError, UnknownGallery
from .expr import ContFn, Expr, clamp, const, coord, mul, sub, vabs, vmax
from .space import MetricModel, interval


@dataclass(frozen=True)
class IndexSchedule:
    """Per-level cutoffs K1 >= K2 >= ... plus a Cauchy tolerance."""

    cutoffs: tuple[int, ...]
    eps: float = 1e-9

    def __post_init__(self):
        cuts = tuple(int(k) for k in self.cutoffs)
        object.__setattr__(self, "cutoffs", cuts)
        if not cuts or any(k < 1 for k in cuts):
            raise ValueError("cutoffs must be positive")
        if any(a < b for a, b in zip(cuts, cuts[1:])):
            raise ValueError("cutoffs must be nonincreasing")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def cutoff(self, level: int) -> int:
        return self.cutoffs[min(level, len(self.cutoffs) - 1)]

    def to_json(self) -> dict:
        return {"cutoffs": list(self.cutoffs), "eps": self.eps}

    @staticmethod
    def from_json(obj: dict) -> "IndexSchedule":
        return IndexSchedule(tuple(obj["cutoffs"]), obj.get("eps", 1e-9))


@dataclass(frozen=True)
class RateCertificate:
    """Continuous envelopes tau_k >= 0 with |eval at cutoffs >= k - limit| <= tau_k."""

    envelope: Callable[[int], ContFn]
    monotone: bool = False


@dataclass
class EvalOutcome:
    """Value plus diagnostics from a truncated evaluation."""

    value: float
    err_bound: float | None = None   # certified, from a rate certificate
    cauchy: float | None = None      # observed last increment, diagnostic only
    nonconvergent: bool = False
    depth_exhausted: bool = False
    indices: tuple[int, ...] = ()


class BaireTower:
    """Rank-r iterated-limit representation.

    rank 0: ``base`` is a ContFn-like object (``.eval``/``.model``).
    rank >= 1: ``family`` maps 1-based indices to rank-(r-1) towers,
    materialized lazily and memoized (construction is deterministic, so
    concurrent first access at worst recomputes an equal value).
    """

    def __init__(
        self,
        rank: int,
        model: MetricModel,
        base=None,
        family: Callable[[int], "BaireTower"] | None = None,
        certificate: RateCertificate | None = None,
        sup_env: Callable[[int], float] | None = None,
        name: str | None = None,
        max_index: int | None = None,
    ):
        if rank < 0:
            raise ValueError("rank must be >= 0")
        if rank == 0 and base is None:
            raise ValueError("rank-0 tower needs a base function")
        if rank >= 1 and family is None:
            raise ValueError("positive-rank tower needs an index family")
        self.rank = rank
        self.model = model
        self.base = base
        self._family = family
        self._memo: dict[int, BaireTower] = {}
        self.certificate = certificate
        self.sup_env = sup_env
        self.name = name
        self.max_index = max_index

    def level(self, k: int) -> "BaireTower":
        if self.rank == 0:
            raise ValueError("rank-0 tower has no levels")
        if k < 1:
            raise ValueError("levels are 1-based")
        if self.max_index is not None and k > self.max_index:
            raise BudgetExceeded(
                f"level {k} beyond materializable cutoff {self.max_index}"
            )
        got = self._memo.get(k)
        if got is None:
            got = self._family(k)
            if got.rank != self.rank - 1:
                raise ValueError("family member has wrong rank")
            self._memo[k] = got
        return got

    def map_bases(self, fn: Callable[[object], object]) -> "BaireTower":
        """Structure-preserving transform of every rank-0 base function."""
        if self.rank == 0:
            return BaireTower(0, self.model, base=fn(self.base))
        return BaireTower(
            self.rank,
            self.model,
            family=lambda k: self.level(k).map_bases(fn),
            certificate=self.certificate,
            sup_env=self.sup_env,
            max_index=self.max_index,
        )


def tower_eval(g: BaireTower, x, s: IndexSchedule, _level: int = 0) -> EvalOutcome:
    """Evaluate the iterated limit, each level truncated at its cutoff.

    With a certificate the outcome carries eval(tau_K, x) as a bound; without
    one it carries the increment between the last two top-level cutoffs, and
    flags non-convergence when the increments fail to decrease.
    """
    if g.rank == 0:
        return EvalOutcome(value=g.base.eval(x))
    k = s.cutoff(_level)
    if g.max_index is not None and k > g.max_index:
        out = tower_eval(g.level(g.max_index), x, s, _level + 1)
        out.depth_exhausted = True
        out.indices = (g.max_index,)
        return out
    out = tower_eval(g.level(k), x, s, _level + 1)
    result = EvalOutcome(
        value=out.value, depth_exhausted=out.depth_exhausted, indices=(k,)
    )
    if _level == 0 and g.certificate is not None:
        result.err_bound = g.certificate.envelope(k).eval(x)
        return result
    if _level == 0 and k >= 2:
        prev = tower_eval(g.level(k - 1), x, s, _level + 1).value
        result.cauchy = abs(result.value - prev)
        if k >= 3 and result.cauchy > s.eps:
            prev2 = tower_eval(g.level(k - 2), x, s, _level + 1).value
            if result.cauchy > abs(prev - prev2):
                result.nonconvergent = True
    return result


# -- gallery --------------------------------------------------------------------

GALLERY_NAMES = ("sign", "point-indicator", "step", "two-limit-indicator")


def _hat_envelope(model: MetricModel, center_expr: Expr) -> Callable[[int], ContFn]:
    def env(k: int) -> ContFn:
        return ContFn(model, vmax(const(0.0), sub(const(1.0), mul(const(k), center_expr))))

    return env


def _sign_like(model: MetricModel, shift: float, name: str) -> BaireTower:
    x = coord(0)
    arg = sub(x, const(shift)) if shift else x

    def level(k: int) -> BaireTower:
        return BaireTower(0, model, base=ContFn(model, clamp(mul(const(k), arg), -1.0, 1.0)))

    cert = RateCertificate(_hat_envelope(model, vabs(arg)), monotone=True)
    return BaireTower(1, model, family=level, certificate=cert,
                      sup_env=lambda k: 1.0, name=name)


def _point_indicator(model: MetricModel) -> BaireTower:
    x = coord(0)

    def level(k: int) -> BaireTower:
        e = vmax(const(0.0), sub(const(1.0), mul(const(k), vabs(x))))
        return BaireTower(0, model, base=ContFn(model, e))

    cert = RateCertificate(_hat_envelope(model, vabs(x)), monotone=True)
    return BaireTower(1, model, family=level, certificate=cert,
                      sup_env=lambda k: 1.0, name="point-indicator")


def _tli_points(j: int) -> list[float]:
    return [1.0 / (i + 1) for i in range(1, j + 1)]


def _two_limit_indicator(model: MetricModel) -> BaireTower:
    """Indicator of {1/2, 1/3, 1/4, ...} as lim_j lim_k of hat maxima.

    Level j is the rank-1 tower for the indicator of the first j points; the
    outer limit adds one accumulation point per level.
    """
    x = coord(0)

    def inner(j: int) -> BaireTower:
        pts = _tli_points(j)

        def level(k: int) -> BaireTower:
            terms = [sub(const(1.0), mul(const(k), vabs(sub(x, const(a))))) for a in pts]
            return BaireTower(0, model, base=ContFn(model, vmax(const(0.0), *terms)))

        def env(k: int) -> ContFn:
            terms = [sub(const(1.0), mul(const(k), vabs(sub(x, const(a))))) for a in pts]
            return ContFn(model, vmax(const(0.0), *terms))

        return BaireTower(1, model, family=level,
                          certificate=RateCertificate(env, monotone=True),
                          sup_env=lambda k: 1.0)

    def outer_env(j: int) -> ContFn:
        # distance to the interval holding every not-yet-included point,
        # plus per-included-point hats to absorb unfinished inner limits
        edge = 1.0 / (j + 2)
        interval_term = sub(
            const(1.0), mul(const(j), vmax(const(0.0), sub(const(0.0), x), sub(x, const(edge))))
        )
        point_terms = [
            sub(const(1.0), mul(const(j), vabs(sub(x, const(a))))) for a in _tli_points(j)
        ]
        return ContFn(model, vmax(const(0.0), interval_term, *point_terms))

    return BaireTower(2, model, family=inner,
                      certificate=RateCertificate(outer_env, monotone=True),
                      sup_env=lambda k: 1.0, name="two-limit-indicator")


def gallery(name: str) -> BaireTower:
    """Canonical towers: sign and point-indicator on [-1,1] (rank 1), step on
    [0,1] with the jump at 1/2 (rank 1), two-limit-indicator on [0,1] (rank 2)."""
    if name == "sign":
        return _sign_like(interval(-1.0, 1.0), 0.0, "sign")
    if name == "step":
        return _sign_like(interval(0.0, 1.0), 0.5, "step")
    if name == "point-indicator":
        return _point_indicator(interval(-1.0, 1.0))
    if name == "two-limit-indicator":
        return _two_limit_indicator(interval(0.0, 1.0))
    raise UnknownGallery(name)


# -- serialization ----------------------------------------------------------------

def tower_to_json(g: BaireTower, cutoff: int | None = None) -> dict:
    """Gallery towers serialize by name (lossless, family stays infinite);
    anything else materializes explicitly up to ``cutoff``."""
    if g.name in GALLERY_NAMES:
        return {"rank": g.rank, "family": {"kind": "gallery", "name": g.name}}
    if g.rank == 0:
        base = g.base
        if not isinstance(base, ContFn):
            raise ParseError("only expression-tree bases serialize")
        return {"rank": 0, "base": base.to_json()}
    cutoff = cutoff or g.max_index
    if cutoff is None:
        raise ParseError("explicit serialization needs a finite cutoff")
    return {
        "rank": g.rank,
        "family": {
            "kind": "explicit",
            "cutoff": cutoff,
            "members": [tower_to_json(g.level(k), cutoff) for k in range(1, cutoff + 1)],
        },
    }


def tower_from_json(obj: dict) -> BaireTower:
    try:
        rank = obj["rank"]
        if rank == 0:
            fn = ContFn.from_json(obj["base"])
            return BaireTower(0, fn.model, base=fn)
        fam = obj["family"]
        if fam["kind"] == "gallery":
            return gallery(fam["name"])
        members = [tower_from_json(m) for m in fam["members"]]
        return BaireTower(
            rank,
            members[0].model,
            family=lambda k: members[k - 1],
            max_index=len(members),
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise ParseError(f"bad tower payload: {obj!r}") from exc


def constant_tower(model: MetricModel, c: float, rank: int = 1) -> BaireTower:
    """Rank-r tower all of whose bases are the constant c (handy fixture)."""
    base = BaireTower(0, model, base=ContFn(model, const(c)))
    t = base
    for _ in range(rank):
        inner = t
        t = BaireTower(t.rank + 1, model, family=lambda k, _i=inner: _i,
                       sup_env=lambda k: abs(c))
    return t
