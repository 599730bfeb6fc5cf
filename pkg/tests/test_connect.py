import numpy as np
import pytest

from nonstop.connect import PlanningFailed, plan_path, segment_clearance
from nonstop.geometry import is_admissible

from constructions import random_admissible, straddling_pair
from oracles import dense_segment_min


def test_degenerate_segment(gm5, w_load, rng):
    lam = random_admissible(gm5, w_load, rng)
    sc = segment_clearance(gm5, w_load, lam, lam)
    assert sc.clearance == pytest.approx(is_admissible(gm5, w_load, lam).min_tension, rel=1e-14)


def test_straddling_segment_hits_zero(gm5, w_load):
    a, b = straddling_pair(gm5, w_load)
    sc = segment_clearance(gm5, w_load, a, b)
    dmin, dt, di = dense_segment_min(gm5.base_forces(w_load), gm5.carrier_nullspace(), a, b, 10_001)
    assert sc.clearance < 1e-12
    assert sc.t == pytest.approx(0.5, abs=1e-9)
    assert sc.carrier == 0 == di
    assert dmin < 1e-3 and dt == pytest.approx(0.5, abs=1e-3)


def test_exact_minimizer_matches_dense_sampling(gm5, gm10, w_load):
    rng = np.random.default_rng(3)
    for gm in (gm5, gm10):
        c = gm.base_forces(w_load)
        PN = gm.carrier_nullspace()
        for _ in range(50):
            a, b = rng.normal(size=(2, gm.k))
            sc = segment_clearance(gm, w_load, a, b)
            dmin, _, _ = dense_segment_min(c, PN, a, b, 10_000)
            # sampling can only overestimate the minimum
            assert sc.clearance <= dmin + 1e-12
            assert dmin - sc.clearance < 1e-6


def test_start_equals_goal(gm5, w_load, rng):
    lam = random_admissible(gm5, w_load, rng)
    path = plan_path(gm5, w_load, lam, lam)
    assert len(path) == 1
    assert path.clearance == pytest.approx(is_admissible(gm5, w_load, lam).min_tension)


def _check_path(gm, w, path, start, goal, min_clearance):
    assert np.array_equal(path.waypoints[0], start)
    assert np.array_equal(path.waypoints[-1], goal)
    c = gm.base_forces(w)
    PN = gm.carrier_nullspace()
    for a, b in zip(path.waypoints[:-1], path.waypoints[1:]):
        assert segment_clearance(gm, w, a, b).clearance > min_clearance
        assert dense_segment_min(c, PN, a, b, 1000)[0] > min_clearance
    assert path.clearance > min_clearance


@pytest.mark.parametrize("which", ["gm5", "gm10"])
def test_random_pairs_connect(which, request, w_load):
    gm = request.getfixturevalue(which)
    rng = np.random.default_rng(17)
    short = 0
    for _ in range(100):
        a = random_admissible(gm, w_load, rng)
        b = random_admissible(gm, w_load, rng)
        path = plan_path(gm, w_load, a, b, 1e-3, seed=1)
        _check_path(gm, w_load, path, a, b, 1e-3)
        short += len(path) <= 3
    assert short >= 95


def test_straddling_pair_needs_detour(gm5, w_load):
    a, b = straddling_pair(gm5, w_load)
    path = plan_path(gm5, w_load, a, b, 1e-3, seed=0)
    assert len(path) >= 3
    _check_path(gm5, w_load, path, a, b, 1e-3)


def test_planner_deterministic(gm5, w_load):
    a, b = straddling_pair(gm5, w_load, seed=4)
    p1 = plan_path(gm5, w_load, a, b, seed=8)
    p2 = plan_path(gm5, w_load, a, b, seed=8)
    assert p1.waypoints.tobytes() == p2.waypoints.tobytes()


def test_inadmissible_endpoint_rejected(gm5, w_load, rng):
    a, b = straddling_pair(gm5, w_load)
    mid = 0.5 * (a + b)
    with pytest.raises(PlanningFailed):
        plan_path(gm5, w_load, mid, b)


def test_retry_budget_surfaces_failure(gm5, w_load):
    a, b = straddling_pair(gm5, w_load)
    with pytest.raises(PlanningFailed):
        plan_path(gm5, w_load, a, b, max_retries=0)
