"""Compact metric domains.

Two concrete models: Euclidean boxes, and truncated weighted-sup sequence
spaces (the metrizable receptacle for coordinate-bundle embeddings).  Every
model carries explicit per-coordinate bounds so interval evaluation and
structural Lipschitz bounds stay finite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ParseError

EUCLIDEAN = "euclidean-box"
WEIGHTED_SUP = "weighted-sup-sequence"


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned compact box, lo[i] < hi[i] per coordinate."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi) or not lo:
            raise DimensionMismatch("lo and hi must be equal-length, nonempty")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("box requires lo < hi in every coordinate")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def width(self, i: int) -> float:
        return self.hi[i] - self.lo[i]

    def contains(self, x, tol: float = 0.0) -> bool:
        if len(x) != self.dim:
            return False
        return all(
            self.lo[i] - tol <= float(x[i]) <= self.hi[i] + tol
            for i in range(self.dim)
        )

    def center(self) -> tuple[float, ...]:
        return tuple((a + b) / 2.0 for a, b in zip(self.lo, self.hi))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return rng.uniform(lo, hi, size=(n, self.dim))

    def intersect(self, other: "BoxDomain") -> "BoxDomain | None":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if any(a >= b for a, b in zip(lo, hi)):
            return None
        return BoxDomain(lo, hi)

    def to_json(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}

    @staticmethod
    def from_json(obj: dict) -> "BoxDomain":
        try:
            return BoxDomain(tuple(obj["lo"]), tuple(obj["hi"]))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad box payload: {obj!r}") from exc


@dataclass(frozen=True)
class MetricModel:
    """A compact box plus the metric that lives on it.

    ``euclidean-box`` uses the usual l2 distance.  ``weighted-sup-sequence``
    uses d(p,q) = max_s w_s * min(1, |p_s - q_s|) with weights in (0,1]; the
    min(1,.) truncation is what lets an infinite-product metric truncate
    cleanly to finitely many coordinates.
    """

    kind: str
    box: BoxDomain
    weights: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, WEIGHTED_SUP):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.kind == WEIGHTED_SUP:
            if len(self.weights) != self.box.dim:
                raise DimensionMismatch("one weight per coordinate required")
            if any(not (0.0 < w <= 1.0) for w in self.weights):
                raise ValueError("weights must lie in (0, 1]")
        elif self.weights:
            raise ValueError("euclidean model takes no weights")

    @property
    def dim(self) -> int:
        return self.box.dim

    def contains(self, x, tol: float = 0.0) -> bool:
        return self.box.contains(x, tol)

    def dist(self, p, q) -> float:
        if len(p) != self.dim or len(q) != self.dim:
            raise DimensionMismatch(
                f"points of length {len(p)}, {len(q)} in model of dim {self.dim}"
            )
        if self.kind == EUCLIDEAN:
            acc = 0.0
            for a, b in zip(p, q):
                d = float(a) - float(b)
                acc += d * d
            return math.sqrt(acc)
        best = 0.0
        for w, a, b in zip(self.weights, p, q):
            v = w * min(1.0, abs(float(a) - float(b)))
            if v > best:
                best = v
        return best

    def dist_many(self, pts: np.ndarray, q) -> np.ndarray:
        """Vectorized distance from rows of ``pts`` to a single point."""
        pts = np.asarray(pts, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.kind == EUCLIDEAN:
            return np.sqrt(((pts - q) ** 2).sum(axis=1))
        w = np.asarray(self.weights)
        return (w * np.minimum(1.0, np.abs(pts - q))).max(axis=1)

    def coord_lip(self, i: int) -> float:
        """Lipschitz constant of the i-th coordinate projection.

        Euclidean: 1.  Weighted-sup: |p_i - q_i| <= max(1, diam_i) * min(1, |p_i - q_i|)
        and w_i * min(1, .) <= d, hence max(1, diam_i) / w_i.
        """
        if self.kind == EUCLIDEAN:
            return 1.0
        return max(1.0, self.box.width(i)) / self.weights[i]

    def dist_range_to(self, point) -> tuple[float, float]:
        """Exact range of x -> d(x, point) over the box (coordinates decouple)."""
        los, his = [], []
        for i in range(self.dim):
            p = float(point[i])
            lo_i, hi_i = self.box.lo[i], self.box.hi[i]
            near = max(0.0, lo_i - p, p - hi_i)
            far = max(abs(p - lo_i), abs(p - hi_i))
            los.append(near)
            his.append(far)
        if self.kind == EUCLIDEAN:
            return (
                math.sqrt(sum(v * v for v in los)),
                math.sqrt(sum(v * v for v in his)),
            )
        w = self.weights
        return (
            max(w[i] * min(1.0, los[i]) for i in range(self.dim)),
            max(w[i] * min(1.0, his[i]) for i in range(self.dim)),
        )

    def diameter(self) -> float:
        return self.dist(self.box.lo, self.box.hi)

    def to_json(self) -> dict:
        obj = {"kind": self.kind, **self.box.to_json()}
        if self.kind == WEIGHTED_SUP:
            obj["weights"] = list(self.weights)
        return obj

    @staticmethod
    def from_json(obj: dict) -> "MetricModel":
        box = BoxDomain.from_json(obj)
        kind = obj.get("kind", EUCLIDEAN)
        if kind == WEIGHTED_SUP:
            return MetricModel(kind, box, tuple(obj.get("weights", ())))
        return MetricModel(kind, box)


def euclidean_box(lo, hi) -> MetricModel:
    return MetricModel(EUCLIDEAN, BoxDomain(tuple(lo), tuple(hi)))


def interval(lo: float, hi: float) -> MetricModel:
    return euclidean_box((lo,), (hi,))


def weighted_sup_model(box: BoxDomain, weights) -> MetricModel:
    return MetricModel(WEIGHTED_SUP, box, tuple(weights))


def product_model(models: list[MetricModel]) -> MetricModel:
    """Concatenate euclidean factors into one euclidean box (for joint probes
    and gluing; the weighted-sup model does not participate in products)."""
    if any(m.kind != EUCLIDEAN for m in models):
        raise ValueError("product model requires euclidean factors")
    lo = tuple(v for m in models for v in m.box.lo)
    hi = tuple(v for m in models for v in m.box.hi)
    return euclidean_box(lo, hi)
