"""Partitions of unity subordinate to box covers.

Hats are tensor products of univariate trapezoids: each cover box gets a
plateau ramped down to zero over the outer quarter of every side, except
sides flush with the domain boundary, which stay at plateau height so the
boundary remains covered.  Weights are the hats normalized by their sum at
evaluation time; the node algebra has no division, so a weight is a
numerator/denominator pair of expression trees rather than a single tree.

The denominator's positive lower bound is certified by subdividing the
domain and interval-evaluating the hat sum per cell (tensor hats make the
per-hat cell enclosures exact, so refinement converges).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoverGap, DimensionMismatch
from .expr import ContFn, Expr, SupportedFn, add, coord, eval_expr, interval_eval, mul, pl
from .space import BoxDomain, MetricModel

_RAMP_FRAC = 0.25
_FLUSH_TOL = 1e-12


def tensor_hat(cover_box: BoxDomain, domain: BoxDomain) -> Expr:
    """Trapezoid bump supported on ``cover_box``, plateau 1 in the middle."""
    if cover_box.dim != domain.dim:
        raise DimensionMismatch("cover box and domain dimensions differ")
    factors = []
    for i in range(cover_box.dim):
        lo, hi = cover_box.lo[i], cover_box.hi[i]
        ramp = _RAMP_FRAC * (hi - lo)
        flush_lo = lo <= domain.lo[i] + _FLUSH_TOL
        flush_hi = hi >= domain.hi[i] - _FLUSH_TOL
        xs: list[float] = []
        ys: list[float] = []
        if flush_lo:
            xs += [lo]
            ys += [1.0]
        else:
            xs += [lo, lo + ramp]
            ys += [0.0, 1.0]
        if flush_hi:
            xs += [hi]
            ys += [1.0]
        else:
            xs += [hi - ramp, hi]
            ys += [1.0, 0.0]
        factors.append(pl(coord(i), xs, ys))
    if len(factors) == 1:
        return factors[0]
    return mul(*factors)


@dataclass(frozen=True)
class PartitionWeight:
    """One normalized weight h_i / sum_j h_j; ContFn-like.

    ``lip`` comes from the quotient rule with a certified positive lower
    bound for the denominator, so it is conservative but never an
    underestimate.
    """

    num: ContFn
    den: ContFn
    den_min: float

    @property
    def model(self) -> MetricModel:
        return self.num.model

    @property
    def lip(self) -> float:
        return (
            self.num.lip * self.den.sup_bound + self.num.sup_bound * self.den.lip
        ) / (self.den_min * self.den_min)

    @property
    def sup_bound(self) -> float:
        return 1.0

    def eval(self, x, check: bool = True) -> float:
        return self.num.eval(x, check=check) / self.den.eval(x, check=check)

    __call__ = eval

    def to_json(self) -> dict:
        return {
            "num": self.num.to_json(),
            "den": self.den.expr.to_json(),
            "den_min": self.den_min,
        }


def _certify_den_min(den: ContFn, domain: BoxDomain, cells_per_dim: int) -> float:
    """Grid-subdivided interval lower bound for the hat sum; may be 0 if the
    grid is too coarse or the cover has a genuine gap."""
    dim = domain.dim
    edges = [
        np.linspace(domain.lo[i], domain.hi[i], cells_per_dim + 1) for i in range(dim)
    ]
    best = float("inf")
    idx = [0] * dim
    while True:
        lo = tuple(edges[i][idx[i]] for i in range(dim))
        hi = tuple(edges[i][idx[i] + 1] for i in range(dim))
        cell = MetricModel(den.model.kind, BoxDomain(lo, hi), den.model.weights)
        cell_lo, _ = interval_eval(den.expr, cell)
        best = min(best, cell_lo)
        if best <= 0.0:
            return 0.0
        for i in range(dim):
            idx[i] += 1
            if idx[i] <= cells_per_dim - 1:
                break
            idx[i] = 0
        else:
            return best
    # unreachable


def partition_of_unity(
    cover: list[BoxDomain],
    domain: MetricModel,
    sample_budget: int = 2048,
    seed: int = 0,
) -> list[SupportedFn]:
    """Weights (phi_i) with phi_i >= 0, supp phi_i inside cover box i, and
    sum_i phi_i identically 1 on the domain.

    Raises CoverGap (with a witness point) when some sample point is in no
    cover box, i.e. the normalizing sum vanishes there.
    """
    if not cover:
        raise CoverGap("empty cover")
    hats = [ContFn(domain, tensor_hat(b, domain.box)) for b in cover]
    den_expr = hats[0].expr if len(hats) == 1 else add(*(h.expr for h in hats))
    den = ContFn(domain, den_expr)

    rng = np.random.default_rng(seed)
    pts = domain.box.sample(rng, sample_budget)
    for p in pts:
        if eval_expr(den_expr, p, domain) <= 0.0:
            raise CoverGap("sample point in no cover box", witness=tuple(p))

    # certified positive lower bound, refining the grid a few times if needed
    den_min = 0.0
    for cells in (8, 16, 32, 64):
        if cells**domain.dim > 65536:
            break
        den_min = _certify_den_min(den, domain.box, cells)
        if den_min > 0.0:
            break
    if den_min <= 0.0:
        raise CoverGap("could not certify a positive hat sum on the domain")

    return [
        SupportedFn(PartitionWeight(h, den, den_min), b) for h, b in zip(hats, cover)
    ]
