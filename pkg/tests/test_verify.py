import numpy as np
import pytest

from sepcon.diagonal import build_diagonal_2, sepfn_eval
from sepcon.errors import BudgetExceeded
from sepcon.space import BoxDomain
from sepcon.tower import IndexSchedule, gallery, tower_eval
from sepcon.verify import (
    check_diagonal_agreement,
    check_joint_oscillation,
    check_section_continuity,
    pp_structure,
    reports_to_csv,
    tower_from_sepfn,
)

S = IndexSchedule((64,))
UNIT = BoxDomain((0.0,), (1.0,))


# -- dyadic marked covers ---------------------------------------------------------------

def test_pp_mesh_halves_per_level():
    pp = pp_structure(UNIT, 6)
    for n in range(1, 6):
        assert pp.mesh(n + 1) == pytest.approx(pp.mesh(n) / 2.0)


def test_pp_level_one_covers_domain():
    pp = pp_structure(UNIT, 3)
    for x in np.linspace(0, 1, 101):
        cov = pp.covering(1, (x,))
        assert cov
        assert sum(w for _, w, _ in cov) == pytest.approx(1.0, abs=1e-15)
        for multi, _, _ in cov:
            box = pp.box(1, multi)
            assert box.contains((x,), tol=1e-12)


def test_pp_marked_points_within_mesh():
    pp = pp_structure(UNIT, 7)
    rng = np.random.default_rng(0)
    for n in (1, 3, 7):
        for x in rng.uniform(0, 1, 300):
            for multi, _, center in pp.covering(n, (x,)):
                assert abs(center[0] - x) <= pp.mesh(n)
                assert pp.marked(n, multi) == (center[0],)


def test_pp_hat_fn_matches_fast_path():
    pp = pp_structure(UNIT, 4)
    for level in (1, 2, 4):
        for j in (0, 1, pp.count_1d(level) - 1):
            h = pp.hat_fn(level, (j,))
            for x in np.linspace(0, 1, 53):
                assert h.eval((x,)) == pp.hat_value_1d(level, 0, j, x)


def test_pp_weight_exact_one_at_marked_points():
    pp = pp_structure(UNIT, 5)
    for j in (1, 7, 20):
        c = pp.center_1d(5, 0, j)
        cov = pp.covering(5, (c,))
        weights = {multi: w for multi, w, _ in cov}
        assert weights[(j,)] == 1.0


def test_pp_2d_tensor():
    pp = pp_structure(BoxDomain((0.0, 0.0), (1.0, 2.0)), 3)
    cov = pp.covering(2, (0.3, 1.7))
    assert sum(w for _, w, _ in cov) == pytest.approx(1.0, abs=1e-14)
    assert pp.mesh(2) == pytest.approx(np.hypot(0.25, 0.5))


def test_pp_budget_exceeded():
    pp = pp_structure(UNIT, 3)
    with pytest.raises(BudgetExceeded):
        pp.covering(4, (0.5,))


# -- tower recovery -----------------------------------------------------------------------

def test_roundtrip_product_function():
    pp = pp_structure(UNIT, 7)
    f = lambda pts: pts[0][0] * pts[1][0]
    tw = tower_from_sepfn(f, pp, arity=2)
    assert tw.rank == 1
    rng = np.random.default_rng(1)
    bound = 1.0 * pp.mesh(7)  # Lipschitz-in-x bound times the mesh
    for x, y in rng.uniform(0, 1, (300, 2)):
        got = tower_eval(tw, (x, y), IndexSchedule((7,))).value
        assert abs(got - x * y) <= bound + 1e-12


def test_roundtrip_diagonal_of_product():
    pp = pp_structure(UNIT, 7)
    tw = tower_from_sepfn(lambda pts: pts[0][0] * pts[1][0], pp, arity=2)
    for x in np.linspace(0.05, 0.95, 19):
        got = tower_eval(tw, (x, x), IndexSchedule((7,))).value
        assert abs(got - x * x) <= 1e-2


def test_roundtrip_constant_is_exact_at_every_level():
    pp = pp_structure(UNIT, 5)
    tw = tower_from_sepfn(lambda pts: 3.25, pp, arity=2)
    rng = np.random.default_rng(2)
    for k in (1, 3, 5):
        for x, y in rng.uniform(0, 1, (50, 2)):
            assert tw.level(k).base.eval((x, y)) == 3.25


def test_roundtrip_sign_construction_at_continuity_point():
    g = gallery("sign")
    f = build_diagonal_2(g, depth=12)
    pp = pp_structure(BoxDomain((-1.0,), (1.0,)), 7)
    tw = tower_from_sepfn(f, pp, eval_schedule=IndexSchedule((1024,)))
    got = tower_eval(tw, (0.4, 0.4), IndexSchedule((7,))).value
    assert abs(got - 1.0) <= 1e-2


def test_roundtrip_three_variables():
    pp = pp_structure(UNIT, 4)
    f = lambda pts: pts[0][0] + pts[1][0] * pts[2][0]
    tw = tower_from_sepfn(f, pp, arity=3)
    assert tw.rank == 2
    got = tower_eval(tw, (0.25, 0.5, 0.75), IndexSchedule((4, 4))).value
    assert abs(got - (0.25 + 0.375)) <= 2.0 * pp.mesh(4) + 1e-12


# -- diagonal agreement ----------------------------------------------------------------------

def test_agreement_exact_for_own_tower():
    g = gallery("sign")
    f = build_diagonal_2(g, depth=10)
    pts = [(x,) for x in np.linspace(-1, 1, 101)]
    rep = check_diagonal_agreement(f, g, pts, S)
    assert rep.passed
    assert rep.max_diff == 0.0
    assert all(d == 0.0 for d in rep.diffs)


def test_agreement_detects_mismatch():
    f = build_diagonal_2(gallery("sign"), depth=10)
    wrong = gallery("point-indicator")
    rep = check_diagonal_agreement(f, wrong, [(0.4,)], S)
    assert not rep.passed
    assert rep.max_diff == 1.0  # sign limit 1 vs indicator 0 at x = 0.4


# -- section continuity ------------------------------------------------------------------------

RADII = [2.0**-k for k in range(5, 21)]


def test_section_continuity_at_diagonal_center():
    f = build_diagonal_2(gallery("sign"), depth=22)
    rep = check_section_continuity(f, ((0.3,), (0.3,)), 0, RADII, S, tolerance=1e-3)
    assert rep.verdict == "decaying"
    assert rep.oscillations[-1] <= 1e-3


def test_section_continuity_constant_construction():
    from sepcon.tower import constant_tower
    from sepcon.space import interval

    f = build_diagonal_2(constant_tower(interval(-1, 1), 2.0, rank=1), depth=10)
    rep = check_section_continuity(f, ((0.1,), (-0.4,)), 1, RADII, S)
    assert rep.verdict == "decaying"
    assert all(o == 0.0 for o in rep.oscillations)


def test_joint_probe_stalls_at_origin():
    f = build_diagonal_2(gallery("sign"), depth=22)
    radii = [2.0**-k for k in range(1, 21)]
    rep = check_joint_oscillation(f, ((0.0,), (0.0,)), radii, S, budget=8)
    assert rep.verdict == "stalled"
    assert all(o >= 1.0 for o in rep.oscillations)


def test_reports_deterministic_given_seed():
    f = build_diagonal_2(gallery("sign"), depth=16)
    a = check_section_continuity(f, ((0.2,), (0.5,)), 0, RADII, S, seed=9)
    b = check_section_continuity(f, ((0.2,), (0.5,)), 0, RADII, S, seed=9)
    assert a.oscillations == b.oscillations


def test_csv_fixed_column_order():
    f = build_diagonal_2(gallery("sign"), depth=12)
    rep = check_section_continuity(f, ((0.2,), (0.5,)), 0, RADII[:3], S)
    text = reports_to_csv([rep])
    lines = text.strip().split("\n")
    assert lines[0] == "x1,x2,section,radius,oscillation,verdict"
    assert len(lines) == 1 + 3
    cells = lines[1].split(",")
    assert cells[0] == "0.2" and cells[1] == "0.5" and cells[2] == "0"
