"""Continuous functions as expression trees with certified bounds.

The node set is deliberately small: constants, coordinate projections,
ring-free arithmetic (+, -, *), lattice ops (min, max, abs), clamping,
univariate piecewise-linear composition, and distance-to-point.  Everything
the constructions downstream need is expressible here, and every node has

  * an exact pointwise evaluation,
  * an interval enclosure over the domain box, and
  * a structural Lipschitz bound with respect to the domain metric.

Bounds are never sampled: conservative is fine, an underestimate is not,
because radius schedules lean on them.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

from .errors import (
    DimensionMismatch,
    ParseError,
    PointOutsideDomain,
    UnboundedExpression,
)
from .space import MetricModel

_OPS = ("const", "coord", "add", "sub", "mul", "min", "max", "abs", "clamp", "pl", "dist_to")


@dataclass(frozen=True)
class Expr:
    """One expression-tree node.  Only the fields relevant to ``op`` are set."""

    op: str
    args: tuple["Expr", ...] = ()
    value: float | None = None            # const
    coord: int | None = None              # coord
    lo: float | None = None               # clamp
    hi: float | None = None               # clamp
    xs: tuple[float, ...] | None = None   # pl breakpoints (ascending)
    ys: tuple[float, ...] | None = None   # pl values
    point: tuple[float, ...] | None = None  # dist_to anchor

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unknown op {self.op!r}")

    def to_json(self) -> dict:
        obj: dict = {"op": self.op}
        if self.args:
            obj["args"] = [a.to_json() for a in self.args]
        if self.op == "const":
            obj["value"] = self.value
        elif self.op == "coord":
            obj["coord"] = self.coord
        elif self.op == "clamp":
            obj["lo"] = self.lo
            obj["hi"] = self.hi
        elif self.op == "pl":
            obj["xs"] = list(self.xs)
            obj["ys"] = list(self.ys)
        elif self.op == "dist_to":
            obj["point"] = list(self.point)
        return obj

    @staticmethod
    def from_json(obj: dict) -> "Expr":
        try:
            op = obj["op"]
            args = tuple(Expr.from_json(a) for a in obj.get("args", []))
            if op == "const":
                return const(obj["value"])
            if op == "coord":
                return coord(obj["coord"])
            if op == "clamp":
                return clamp(args[0], obj["lo"], obj["hi"])
            if op == "pl":
                return pl(args[0], obj["xs"], obj["ys"])
            if op == "dist_to":
                return dist_to(obj["point"])
            return Expr(op, args)
        except (KeyError, IndexError, TypeError) as exc:
            raise ParseError(f"bad expression payload: {obj!r}") from exc


# -- constructors -------------------------------------------------------------

def const(v: float) -> Expr:
    return Expr("const", value=float(v))


def coord(i: int) -> Expr:
    if i < 0:
        raise ValueError("coordinate index must be >= 0")
    return Expr("coord", coord=int(i))


def _lift(x) -> Expr:
    return x if isinstance(x, Expr) else const(x)


def add(*args) -> Expr:
    return Expr("add", tuple(_lift(a) for a in args))


def sub(a, b) -> Expr:
    return Expr("sub", (_lift(a), _lift(b)))


def mul(*args) -> Expr:
    return Expr("mul", tuple(_lift(a) for a in args))


def vmin(*args) -> Expr:
    return Expr("min", tuple(_lift(a) for a in args))


def vmax(*args) -> Expr:
    return Expr("max", tuple(_lift(a) for a in args))


def vabs(a) -> Expr:
    return Expr("abs", (_lift(a),))


def clamp(a, lo: float, hi: float) -> Expr:
    lo, hi = float(lo), float(hi)
    if lo >= hi:
        raise ValueError("clamp requires lo < hi")
    return Expr("clamp", (_lift(a),), lo=lo, hi=hi)


def pl(a, xs, ys) -> Expr:
    """Piecewise-linear univariate composition with constant extension
    outside [xs[0], xs[-1]] (same semantics as numpy.interp)."""
    xs = tuple(float(v) for v in xs)
    ys = tuple(float(v) for v in ys)
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("pl needs >= 2 matching breakpoints")
    if any(a >= b for a, b in zip(xs, xs[1:])):
        raise ValueError("pl breakpoints must be strictly ascending")
    return Expr("pl", (_lift(a),), xs=xs, ys=ys)


def dist_to(point) -> Expr:
    return Expr("dist_to", point=tuple(float(v) for v in point))


# -- evaluation ----------------------------------------------------------------

def pl_value(xs, ys, u: float) -> float:
    """Piecewise-linear interpolation with constant extension (np.interp
    semantics); shared so other modules can match the pl node bit-for-bit."""
    if u <= xs[0]:
        return ys[0]
    if u >= xs[-1]:
        return ys[-1]
    i = bisect_right(xs, u) - 1
    if i == len(xs) - 1:
        return ys[-1]
    return ys[i] + (u - xs[i]) * (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])


def _pl_value(e: Expr, u: float) -> float:
    return pl_value(e.xs, e.ys, u)


def eval_expr(e: Expr, x, model: MetricModel) -> float:
    op = e.op
    if op == "const":
        return e.value
    if op == "coord":
        if e.coord >= len(x):
            raise DimensionMismatch(f"coord {e.coord} on point of length {len(x)}")
        return float(x[e.coord])
    if op == "add":
        return sum(eval_expr(a, x, model) for a in e.args)
    if op == "sub":
        return eval_expr(e.args[0], x, model) - eval_expr(e.args[1], x, model)
    if op == "mul":
        acc = 1.0
        for a in e.args:
            acc *= eval_expr(a, x, model)
        return acc
    if op == "min":
        return min(eval_expr(a, x, model) for a in e.args)
    if op == "max":
        return max(eval_expr(a, x, model) for a in e.args)
    if op == "abs":
        return abs(eval_expr(e.args[0], x, model))
    if op == "clamp":
        return min(e.hi, max(e.lo, eval_expr(e.args[0], x, model)))
    if op == "pl":
        return _pl_value(e, eval_expr(e.args[0], x, model))
    if op == "dist_to":
        return model.dist(x, e.point)
    raise AssertionError(op)


# -- interval enclosure --------------------------------------------------------

def _pl_range(e: Expr, lo: float, hi: float) -> tuple[float, float]:
    vals = [_pl_value(e, lo), _pl_value(e, hi)]
    vals.extend(y for xk, y in zip(e.xs, e.ys) if lo < xk < hi)
    return min(vals), max(vals)


def interval_eval(e: Expr, model: MetricModel) -> tuple[float, float]:
    """Enclosure of the expression's range over the domain box."""
    op = e.op
    if op == "const":
        return e.value, e.value
    if op == "coord":
        if e.coord >= model.dim:
            raise DimensionMismatch(f"coord {e.coord} in model of dim {model.dim}")
        return model.box.lo[e.coord], model.box.hi[e.coord]
    if op == "dist_to":
        return model.dist_range_to(e.point)
    subs = [interval_eval(a, model) for a in e.args]
    if op == "add":
        return sum(s[0] for s in subs), sum(s[1] for s in subs)
    if op == "sub":
        (a, b), (c, d) = subs
        return a - d, b - c
    if op == "mul":
        lo, hi = subs[0]
        for a, b in subs[1:]:
            cands = (lo * a, lo * b, hi * a, hi * b)
            lo, hi = min(cands), max(cands)
        return lo, hi
    if op == "min":
        return min(s[0] for s in subs), min(s[1] for s in subs)
    if op == "max":
        return max(s[0] for s in subs), max(s[1] for s in subs)
    if op == "abs":
        a, b = subs[0]
        if a >= 0:
            return a, b
        if b <= 0:
            return -b, -a
        return 0.0, max(-a, b)
    if op == "clamp":
        a, b = subs[0]
        return min(e.hi, max(e.lo, a)), min(e.hi, max(e.lo, b))
    if op == "pl":
        return _pl_range(e, *subs[0])
    raise AssertionError(op)


# -- structural Lipschitz bound --------------------------------------------------

def _max_abs_slope(xs, ys) -> float:
    return max(
        abs(ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) for i in range(len(xs) - 1)
    )


def lipschitz_expr(e: Expr, model: MetricModel) -> float:
    """Certified Lipschitz bound w.r.t. the model metric.

    Rules: sums add; min/max/abs take the max; products use
    sup|f|*L_g + sup|g|*L_f with sup bounds from interval evaluation;
    univariate compositions chain through the max absolute slope.
    """
    op = e.op
    if op == "const":
        return 0.0
    if op == "coord":
        return model.coord_lip(e.coord)
    if op == "dist_to":
        return 1.0
    if op == "add":
        return sum(lipschitz_expr(a, model) for a in e.args)
    if op == "sub":
        return lipschitz_expr(e.args[0], model) + lipschitz_expr(e.args[1], model)
    if op in ("min", "max"):
        return max(lipschitz_expr(a, model) for a in e.args)
    if op == "abs":
        return lipschitz_expr(e.args[0], model)
    if op == "clamp":
        return lipschitz_expr(e.args[0], model)
    if op == "pl":
        return _max_abs_slope(e.xs, e.ys) * lipschitz_expr(e.args[0], model)
    if op == "mul":
        lip = lipschitz_expr(e.args[0], model)
        lo, hi = interval_eval(e.args[0], model)
        sup = max(abs(lo), abs(hi))
        for a in e.args[1:]:
            la = lipschitz_expr(a, model)
            alo, ahi = interval_eval(a, model)
            asup = max(abs(alo), abs(ahi))
            lip = sup * la + asup * lip
            cands = (lo * alo, lo * ahi, hi * alo, hi * ahi)
            lo, hi = min(cands), max(cands)
            sup = max(abs(lo), abs(hi))
        return lip
    raise AssertionError(op)


# -- the user-facing function object ---------------------------------------------

@dataclass(frozen=True)
class ContFn:
    """An evaluable continuous function on a metric model.

    ``lip`` and ``sup_bound`` are certified on construction; evaluation is
    pure, so instances are freely shareable.
    """

    model: MetricModel
    expr: Expr
    lip: float = field(init=False)
    sup_bound: float = field(init=False)
    range: tuple[float, float] = field(init=False)

    def __post_init__(self):
        lo, hi = interval_eval(self.expr, self.model)
        lip = lipschitz_expr(self.expr, self.model)
        if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(lip)):
            raise UnboundedExpression("interval evaluation overflowed")
        object.__setattr__(self, "range", (lo, hi))
        object.__setattr__(self, "sup_bound", max(abs(lo), abs(hi)))
        object.__setattr__(self, "lip", lip)

    def eval(self, x, check: bool = True) -> float:
        if check and not self.model.contains(x):
            raise PointOutsideDomain(f"{tuple(x)!r} outside {self.model.box}")
        return eval_expr(self.expr, x, self.model)

    __call__ = eval

    def to_json(self) -> dict:
        return {"model": self.model.to_json(), "expr": self.expr.to_json()}

    @staticmethod
    def from_json(obj: dict) -> "ContFn":
        return ContFn(MetricModel.from_json(obj["model"]), Expr.from_json(obj["expr"]))


@dataclass(frozen=True)
class SupportedFn:
    """A nonnegative function together with a box outside which it vanishes."""

    fn: object  # ContFn-like: .model, .eval, .lip, .sup_bound
    support_box: "object"

    def eval(self, x, check: bool = True) -> float:
        return self.fn.eval(x, check=check)

    __call__ = eval


@dataclass(frozen=True)
class VectorFn:
    """A bundle of scalar functions sharing one domain; maps points to R^M."""

    components: tuple[ContFn, ...]

    def __post_init__(self):
        if not self.components:
            raise ValueError("empty bundle")
        m0 = self.components[0].model
        if any(c.model is not m0 and c.model != m0 for c in self.components):
            raise DimensionMismatch("bundle components must share a domain")

    @property
    def model(self) -> MetricModel:
        return self.components[0].model

    @property
    def out_dim(self) -> int:
        return len(self.components)

    def eval(self, x, check: bool = True) -> tuple[float, ...]:
        return tuple(c.eval(x, check=check) for c in self.components)

    __call__ = eval

    def range_box(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        los = tuple(c.range[0] for c in self.components)
        his = tuple(c.range[1] for c in self.components)
        return los, his

    def to_json(self) -> dict:
        return {"components": [c.to_json() for c in self.components]}

    @staticmethod
    def from_json(obj: dict) -> "VectorFn":
        return VectorFn(tuple(ContFn.from_json(c) for c in obj["components"]))
