import numpy as np
import pytest

from sepcon.errors import BudgetExceeded, UnknownGallery
from sepcon.expr import ContFn, const, coord, mul
from sepcon.space import interval
from sepcon.tower import (
    BaireTower,
    GALLERY_NAMES,
    IndexSchedule,
    constant_tower,
    gallery,
    tower_eval,
    tower_from_json,
    tower_to_json,
)


def test_schedule_validation():
    with pytest.raises(ValueError):
        IndexSchedule((0,))
    with pytest.raises(ValueError):
        IndexSchedule((4, 8))  # must be nonincreasing
    with pytest.raises(ValueError):
        IndexSchedule((4,), eps=0.0)
    s = IndexSchedule((8, 4))
    assert s.cutoff(0) == 8 and s.cutoff(1) == 4 and s.cutoff(5) == 4


def test_rank0_collapses_to_plain_eval():
    m = interval(-1, 1)
    f = ContFn(m, mul(const(2.0), coord(0)))
    t = BaireTower(0, m, base=f)
    out = tower_eval(t, (0.25,), IndexSchedule((64,)))
    assert out.value == f.eval((0.25,))
    assert out.err_bound is None and out.cauchy is None


def test_constant_rank0_example():
    m = interval(-1, 1)
    t = BaireTower(0, m, base=ContFn(m, const(3.5)))
    assert tower_eval(t, (0.9,), IndexSchedule((5,))).value == 3.5


def test_sign_tower_values():
    g = gallery("sign")
    s = IndexSchedule((10,))
    # clamp(10*0.3) = 1 at cutoff 10
    assert tower_eval(g, (0.3,), s).value == 1.0
    # limit at -0.4 is -1 for any cutoff >= 3
    assert tower_eval(g, (-0.4,), IndexSchedule((3,))).value == -1.0
    assert tower_eval(g, (-0.4,), IndexSchedule((64,))).value == -1.0
    # at 0 every level is 0
    assert tower_eval(g, (0.0,), s).value == 0.0


def test_point_indicator_values():
    g = gallery("point-indicator")
    for k in (1, 5, 40):
        assert tower_eval(g, (0.0,), IndexSchedule((k,))).value == 1.0
    assert tower_eval(g, (0.5,), IndexSchedule((40,))).value == 0.0


def test_step_tower_values():
    g = gallery("step")
    s = IndexSchedule((64,))
    assert tower_eval(g, (0.75,), s).value == 1.0
    assert tower_eval(g, (0.25,), s).value == -1.0


def test_gallery_ranks_and_unknown():
    assert gallery("sign").rank == 1
    assert gallery("two-limit-indicator").rank == 2
    with pytest.raises(UnknownGallery):
        gallery("no-such")


def test_two_limit_indicator_values():
    g = gallery("two-limit-indicator")
    s = IndexSchedule((32, 32))
    # 1/2 and 1/5 are members of the indicator set: exactly 1 once included
    assert tower_eval(g, (0.5,), s).value == 1.0
    assert tower_eval(g, (0.2,), s).value == 1.0
    # generic points are exactly 0; at the accumulation point 0 the value
    # decays like the gap to the deepest included point
    assert tower_eval(g, (0.77,), s).value == 0.0
    assert tower_eval(g, (0.0,), s).value <= 1.0 / 33.0 + 1e-12
    assert tower_eval(g, (0.0,), IndexSchedule((128, 128))).value <= 1.0 / 129.0 + 1e-12


def test_lazy_levels_memoized():
    g = gallery("sign")
    a = g.level(7)
    b = g.level(7)
    assert a is b
    assert a.rank == 0
    assert a.base.lip == 7.0


def test_sup_env_bounds_levels():
    rng = np.random.default_rng(0)
    for name in GALLERY_NAMES:
        g = gallery(name)
        lo, hi = g.model.box.lo[0], g.model.box.hi[0]
        for k in (1, 3, 9):
            env = g.sup_env(k)
            sub = g.level(k)
            for x in rng.uniform(lo, hi, 200):
                if sub.rank == 0:
                    v = sub.base.eval((x,))
                else:
                    v = tower_eval(sub, (x,), IndexSchedule((16,))).value
                assert abs(v) <= env + 1e-12


@pytest.mark.parametrize("name", ["sign", "point-indicator", "step", "two-limit-indicator"])
def test_certificate_soundness_k_vs_4k(name):
    # |eval at cutoff K - eval at cutoff 4K| <= tau_K pointwise (sampled)
    g = gallery(name)
    assert g.certificate is not None
    rng = np.random.default_rng(1234)
    lo, hi = g.model.box.lo[0], g.model.box.hi[0]
    xs = rng.uniform(lo, hi, 1000)
    for K in (2, 5, 11):
        tau = g.certificate.envelope(K)
        sK = IndexSchedule((K,) * g.rank)
        s4K = IndexSchedule((4 * K,) * g.rank)
        for x in xs:
            a = tower_eval(g, (x,), sK).value
            b = tower_eval(g, (x,), s4K).value
            assert abs(a - b) <= tau.eval((x,)) + 1e-12


@pytest.mark.parametrize("name", GALLERY_NAMES)
def test_certificate_envelopes_nonnegative_and_monotone(name):
    g = gallery(name)
    cert = g.certificate
    assert cert.monotone
    rng = np.random.default_rng(7)
    lo, hi = g.model.box.lo[0], g.model.box.hi[0]
    xs = rng.uniform(lo, hi, 300)
    for k in (1, 2, 6, 17):
        tk = cert.envelope(k)
        tk1 = cert.envelope(k + 1)
        for x in xs:
            a, b = tk.eval((x,)), tk1.eval((x,))
            assert a >= 0.0
            assert b <= a + 1e-12


def test_pointwise_convergence_cauchy_decreases():
    # uncertified twin of the sign tower: evaluation reports Cauchy increments
    m = interval(-1, 1)
    from sepcon.expr import clamp

    def level(k):
        return BaireTower(0, m, base=ContFn(m, clamp(mul(const(k), coord(0)), -1, 1)))

    g = BaireTower(1, m, family=level)
    x = (0.21,)
    incs = [tower_eval(g, x, IndexSchedule((k,))).cauchy for k in (4, 8, 16, 32)]
    assert incs[0] >= incs[-1]
    assert incs[-1] == 0.0  # saturated well before cutoff 32
    assert not any(
        tower_eval(g, x, IndexSchedule((k,))).nonconvergent for k in (4, 8, 16)
    )


def test_certified_tower_reports_bound_not_cauchy():
    g = gallery("sign")
    out = tower_eval(g, (0.21,), IndexSchedule((8,)))
    assert out.err_bound is not None
    assert out.cauchy is None


def test_certified_error_reported():
    g = gallery("sign")
    out = tower_eval(g, (0.001,), IndexSchedule((10,)))
    # certificate: tau_10(x) = max(0, 1 - 10|x|)
    assert out.err_bound == pytest.approx(1.0 - 10 * 0.001)
    # true limit is sign(x) = 1; bound must cover the truncation error
    assert abs(out.value - 1.0) <= out.err_bound + 1e-12


def test_explicit_serialization_roundtrip():
    m = interval(-1, 1)

    def level(k):
        return BaireTower(0, m, base=ContFn(m, mul(const(1.0 - 1.0 / k), coord(0))))

    t = BaireTower(1, m, family=level, max_index=6)
    back = tower_from_json(tower_to_json(t, cutoff=6))
    s = IndexSchedule((5,))
    assert tower_eval(back, (0.5,), s).value == tower_eval(t, (0.5,), s).value
    with pytest.raises(BudgetExceeded):
        back.level(7)


def test_gallery_serialization_roundtrip():
    for name in GALLERY_NAMES:
        g = gallery(name)
        back = tower_from_json(tower_to_json(g))
        assert back.name == name
        assert back.certificate is not None
        s = IndexSchedule((9,) * g.rank)
        x = (0.31,) if name in ("step", "two-limit-indicator") else (-0.31,)
        assert tower_eval(back, x, s).value == tower_eval(g, x, s).value


def test_depth_exhaustion_flagged():
    m = interval(-1, 1)

    def level(k):
        return BaireTower(0, m, base=ContFn(m, const(float(k))))

    t = BaireTower(1, m, family=level, max_index=3)
    out = tower_eval(t, (0.0,), IndexSchedule((10,)))
    assert out.depth_exhausted
    assert out.value == 3.0


def test_constant_tower_fixture():
    t = constant_tower(interval(0, 1), 2.5, rank=2)
    assert t.rank == 2
    out = tower_eval(t, (0.4,), IndexSchedule((6, 3)))
    assert out.value == 2.5


def test_scaling_towers_map_bases():
    g = gallery("sign")
    doubled = g.map_bases(
        lambda b: ContFn(b.model, mul(const(2.0), b.expr))
    )
    s = IndexSchedule((12,))
    assert tower_eval(doubled, (0.4,), s).value == 2.0 * tower_eval(g, (0.4,), s).value
