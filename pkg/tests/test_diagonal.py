import numpy as np
import pytest

from sepcon.diagonal import (
    BaseBlend,
    RadiusSchedule,
    build_diagonal_2,
    build_diagonal_n,
    schedule_from_lipschitz,
    sepfn_eval,
    sepfn_from_json,
    sepfn_to_json,
)
from sepcon.errors import ScheduleUnsound
from sepcon.expr import ContFn, const, coord, mul
from sepcon.space import interval
from sepcon.tower import BaireTower, IndexSchedule, constant_tower, gallery, tower_eval

S = IndexSchedule((64,))
S2 = IndexSchedule((32, 32))


def test_radius_schedule_validation():
    with pytest.raises(ValueError):
        RadiusSchedule((0.5, 0.5))  # not strictly decreasing
    with pytest.raises(ValueError):
        RadiusSchedule((0.6,))  # violates R_1 <= 1/2
    sch = RadiusSchedule((0.25, 1.0 / 12.0))
    assert sch.depth == 2


def test_schedule_from_lipschitz_hand_values():
    g = gallery("sign")  # L_k = k
    sch = schedule_from_lipschitz(g, 2)
    assert sch.radii[0] == 0.25            # 2^-1 / max(1, 1, 2)
    assert sch.radii[1] == pytest.approx(1.0 / 12.0)  # 2^-2 / max(1,1,2,3)


def test_schedule_constant_tower_is_dyadic():
    t = constant_tower(interval(-1, 1), 4.0, rank=1)
    sch = schedule_from_lipschitz(t, 4)
    assert sch.radii == (0.5, 0.25, 0.125, 0.0625)


def test_unsound_schedule_rejected():
    g = gallery("sign")
    with pytest.raises(ScheduleUnsound):
        build_diagonal_2(g, schedule=RadiusSchedule((0.5, 0.25)))


def test_base_blend_hand_values():
    g = gallery("sign")
    f = build_diagonal_2(g, depth=12)
    # rho = 0.5 >= R_1: g_1(0.5) = 0.5
    assert sepfn_eval(f, ((0.5,), (0.0,)), S).value == 0.5
    # rho = 0.2 in [1/12, 1/4], t = 0.3: 0.7*0.5 + 0.3*1.0 = 0.65
    assert sepfn_eval(f, ((0.5,), (0.3,)), S).value == pytest.approx(0.65, abs=1e-12)


def test_diagonal_routes_through_tower_eval_bit_exact():
    for name in ("sign", "point-indicator", "step"):
        g = gallery(name)
        f = build_diagonal_2(g, depth=10)
        lo, hi = g.model.box.lo[0], g.model.box.hi[0]
        for x in np.random.default_rng(0).uniform(lo, hi, 300):
            want = tower_eval(g, (x,), S).value
            got = sepfn_eval(f, ((x,), (x,)), S).value
            assert got == want  # identical code path, bit-exact


def test_constant_tower_constant_everywhere():
    t = constant_tower(interval(-1, 1), 2.5, rank=1)
    f = build_diagonal_2(t, depth=8)
    rng = np.random.default_rng(1)
    for x, y in rng.uniform(-1, 1, (200, 2)):
        assert sepfn_eval(f, ((x,), (y,)), S).value == 2.5


def test_off_diagonal_touches_two_adjacent_indices():
    g = gallery("sign")
    f = build_diagonal_2(g, depth=12)
    rng = np.random.default_rng(2)
    for x, y in rng.uniform(-1, 1, (500, 2)):
        if x == y:
            continue
        out = sepfn_eval(f, ((x,), (y,)), S)
        assert 1 <= len(out.indices) <= 2
        if len(out.indices) == 2:
            assert out.indices[1] == out.indices[0] + 1


def test_which_indices_is_a_function_of_rho():
    g = gallery("sign")
    f = build_diagonal_2(g, depth=12)
    rho = 0.0123
    a = sepfn_eval(f, ((0.4,), (0.4 - rho,)), S).indices
    b = sepfn_eval(f, ((-0.7,), (-0.7 + rho,)), S).indices
    assert a == b


def test_blend_coherence_at_region_boundaries():
    g = gallery("sign")
    f = build_diagonal_2(g, depth=12)
    sch = f.plan.schedule
    x = 0.4
    for rk in sch.radii[:6]:
        at = sepfn_eval(f, ((x,), (x - rk,)), S).value
        just_above = sepfn_eval(f, ((x,), (x - rk * (1 + 1e-9),)), S).value
        just_below = sepfn_eval(f, ((x,), (x - rk * (1 - 1e-9),)), S).value
        assert abs(at - just_above) < 1e-6
        assert abs(at - just_below) < 1e-6


def test_depth_exhaustion_below_deepest_radius():
    g = gallery("sign")
    f = build_diagonal_2(g, depth=5)
    deepest = f.plan.schedule.radii[-1]
    out = sepfn_eval(f, ((0.4,), (0.4 + deepest / 8.0,)), S)
    assert out.depth_exhausted
    assert out.value == g.level(5).base.eval((0.4,))


def test_scaling_sanity_dyadic_factor():
    # halving each level halves every off-diagonal value exactly (the halved
    # tower has smaller Lipschitz constants, so the schedule stays sound)
    g = gallery("sign")
    halved = g.map_bases(lambda b: ContFn(b.model, mul(const(0.5), b.expr)))
    f1 = build_diagonal_2(g, depth=10)
    f2 = build_diagonal_2(halved, schedule=f1.plan.schedule)
    rng = np.random.default_rng(3)
    for x, y in rng.uniform(-1, 1, (300, 2)):
        if x == y:
            continue
        a = sepfn_eval(f1, ((x,), (y,)), S).value
        b = sepfn_eval(f2, ((x,), (y,)), S).value
        assert b == 0.5 * a


def test_section_bound_on_annulus_with_certificate():
    # |blend - limit at y| <= 2^-k + tau_k(y) on the k-th annulus
    g = gallery("sign")
    f = build_diagonal_2(g, depth=14)
    sch = f.plan.schedule
    deep = IndexSchedule((4096,))
    rng = np.random.default_rng(4)
    for _ in range(300):
        y = float(rng.uniform(-1, 1))
        k = int(rng.integers(1, 13))
        hi = sch.radii[k - 1]
        lo = sch.radii[k]
        rho = float(rng.uniform(lo, hi))
        x = y + rho if y + rho <= 1.0 else y - rho
        blend = sepfn_eval(f, ((x,), (y,)), S).value
        limit = tower_eval(g, (y,), deep).value
        tau = g.certificate.envelope(k).eval((y,))
        assert abs(blend - limit) <= 2.0**-k + tau + 1e-9


def test_recursive_blend_constant_n3():
    t = constant_tower(interval(-1, 1), 1.25, rank=2)
    f = build_diagonal_n(t, 3, depth=5, inner_depth=6)
    rng = np.random.default_rng(5)
    for x, y, z in rng.uniform(-1, 1, (100, 3)):
        assert sepfn_eval(f, ((x,), (y,), (z,)), S2).value == 1.25


def test_recursive_blend_shared_subtower_matches_2d():
    # all level-2 sub-towers equal one rank-1 tower h: when the pairwise
    # spread is driven past R_1 by x3, the value is u_1(x1, x2)
    h = gallery("sign")
    m = h.model
    t = BaireTower(2, m, family=lambda k: h)
    f3 = build_diagonal_n(t, 3, depth=6, inner_depth=10)
    u1 = f3.plan.subs[0]
    f2 = build_diagonal_2(h, depth=10)
    x, y, z = (0.1,), (0.2,), (-0.9,)  # rho = 1.1 >= R_1, driven by x3
    got = sepfn_eval(f3, (x, y, z), S2).value
    assert got == sepfn_eval(u1, (x, y), S2).value
    assert got == sepfn_eval(f2, (x, y), S2).value


def test_recursive_blend_diagonal_bit_exact():
    g = gallery("two-limit-indicator")
    f = build_diagonal_n(g, 3, depth=6, inner_depth=8)
    for x in np.linspace(0.0, 1.0, 20):
        want = tower_eval(g, (x,), S2).value
        got = sepfn_eval(f, ((x,), (x,), (x,)), S2).value
        assert got == want


def test_certificate_free_towers_flagged():
    m = interval(-1, 1)
    h = gallery("sign")
    bare = BaireTower(2, m, family=lambda k: h)  # no top-level certificate
    f = build_diagonal_n(bare, 3, depth=4, inner_depth=6)
    assert f.empirically_validated
    # a certified but discontinuous limit keeps stubborn envelope bumps, so
    # index thinning caps out and the flag stays honest
    f2 = build_diagonal_n(gallery("two-limit-indicator"), 3, depth=4, inner_depth=6)
    assert f2.empirically_validated


def test_uniformly_convergent_certificate_unflagged():
    # outer family converging uniformly: thinning succeeds, no flag
    from sepcon.expr import vabs
    from sepcon.tower import RateCertificate

    m = interval(-1, 1)

    def inner(j):
        b = ContFn(m, mul(const(1.0 - 1.0 / j), coord(0)))
        return BaireTower(1, m, family=lambda k, _b=b: BaireTower(0, m, base=_b))

    cert = RateCertificate(
        lambda j: ContFn(m, mul(const(1.0 / j), vabs(coord(0)))), monotone=True
    )
    g = BaireTower(2, m, family=inner, certificate=cert)
    f = build_diagonal_n(g, 3, depth=4, inner_depth=6)
    assert not f.empirically_validated
    # thinned indices engage deeper sub-towers per annulus
    assert len(f.plan.subs) == 4
    for x in (0.25, -0.8):
        want = tower_eval(g, (x,), S2).value
        assert sepfn_eval(f, ((x,), (x,), (x,)), S2).value == want


def test_plan_serialization_roundtrip():
    g = gallery("sign")
    f = build_diagonal_2(g, depth=10)
    back = sepfn_from_json(sepfn_to_json(f))
    assert isinstance(back.plan, BaseBlend)
    assert back.plan.schedule == f.plan.schedule
    rng = np.random.default_rng(6)
    for x, y in rng.uniform(-1, 1, (100, 2)):
        assert (
            sepfn_eval(back, ((x,), (y,)), S).value
            == sepfn_eval(f, ((x,), (y,)), S).value
        )


def test_plan_serialization_roundtrip_n3():
    g = gallery("two-limit-indicator")
    f = build_diagonal_n(g, 3, depth=3, inner_depth=5)
    back = sepfn_from_json(sepfn_to_json(f, tower_cutoff=8))
    rng = np.random.default_rng(7)
    for x, y, z in rng.uniform(0, 1, (40, 3)):
        a = sepfn_eval(back, ((x,), (y,), (z,)), IndexSchedule((5, 5))).value
        b = sepfn_eval(f, ((x,), (y,), (z,)), IndexSchedule((5, 5))).value
        assert a == b
