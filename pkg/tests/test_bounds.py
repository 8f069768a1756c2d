import pytest

from odmts.bounds import (compute_big_m, detect_direct_trips, is_provably_direct, lb_after_shrink,
                          lifting_sets, touches_hub, ub_after_growth, with_route_bounds)
from odmts.follower import Design, solve_follower
from odmts.generator import GenSpec, generate
from odmts.instance import Trip
from odmts.oracle import all_leg_subsets

from conftest import tiny4_instance


def test_tiny4_values(tiny4):
    t = tiny4.trips[0]
    empty = solve_follower(tiny4, t, Design.empty(2))
    # c = (1 - theta)/theta * g = 1 and the nearest hub pair costs 1 + 1
    assert ub_after_growth(tiny4, t, empty) == pytest.approx(16.0)
    assert lb_after_shrink(tiny4, t, empty) == pytest.approx(12.0)
    full = solve_follower(tiny4, t, Design.full(2))
    assert ub_after_growth(tiny4, t, full) == pytest.approx(14.0)
    assert lb_after_shrink(tiny4, t, full) == pytest.approx(4.0)   # 14 + 2 - 12
    b = compute_big_m(tiny4, t)
    assert (b.M_r, b.d_lower) == (pytest.approx(9.0), pytest.approx(8.0))
    assert b.ub_grow is None
    rb = with_route_bounds(tiny4, t, b, empty)
    assert rb.ub_grow == pytest.approx(16.0) and rb.M_r == b.M_r
    assert not is_provably_direct(tiny4, t)


def test_theta_zero_disables_time_bounds():
    inst = tiny4_instance(theta=0.0)
    t = inst.trips[0]
    r = solve_follower(inst, t, Design.empty(2))
    assert ub_after_growth(inst, t, r) is None and lb_after_shrink(inst, t, r) is None


def test_hub_trips_skip_time_bounds():
    inst = tiny4_instance([Trip("h", "A", "D")])
    t = inst.trips[0]
    assert touches_hub(inst, t)
    r = solve_follower(inst, t, Design.empty(2))
    assert ub_after_growth(inst, t, r) is None


def test_direct_detection():
    inst = tiny4_instance([Trip("near", "O", "A"), Trip("far", "O", "D"), Trip("hubs", "A", "B")])
    # O -> A: any hub detour costs at least d[O,A] + d[A,A] = d[O,A]
    assert detect_direct_trips(inst) == {"near"}


def test_lifting_sets_tiny4(tiny4):
    t = tiny4.trips[0]
    ab = Design(2, frozenset({(0, 1)}))
    r = solve_follower(tiny4, t, ab)
    ls = lifting_sets(tiny4, t, ab, r)
    assert ls.active_hubs == {0}
    assert ls.w_out == frozenset() and ls.w_in == {1}   # B is closer to D than active A
    assert ls.route_arcs == {(0, 1)}
    assert ls.closest_active is False
    full = Design.full(2)
    ls = lifting_sets(tiny4, t, full, solve_follower(tiny4, t, full))
    assert ls.closest_active is True and not ls.w_out and not ls.w_in


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_time_bounds_hold_small(seed):
    inst = generate(GenSpec(seed=seed, n_stops=10, n_hubs=3, n_trips=6, box=(8, 8),
                            econ=dict(theta=(0.001, 0.3, 0.7)[seed], bus_wait=2.0)))
    designs = [Design(3, s) for s in all_leg_subsets(3)]
    for t in inst.trips:
        if touches_hub(inst, t):
            continue
        routes = {D: solve_follower(inst, t, D) for D in designs}
        for a in designs:
            ub = ub_after_growth(inst, t, routes[a])
            lb = lb_after_shrink(inst, t, routes[a])
            for b in designs:
                if a <= b:
                    assert routes[b].f_value <= ub + 1e-9
                if b <= a:
                    assert routes[b].f_value >= lb - 1e-9
