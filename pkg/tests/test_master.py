import numpy as np
import pytest

from odmts.bounds import compute_big_m, detect_direct_trips
from odmts.cuts import benders_cut, consistency_cuts, nogood_force_zero
from odmts.follower import ChoiceOutcome, Design, evaluate_choice, extract_duals, solve_follower
from odmts.generator import generate
from odmts.master import (MasterError, balanced_designs, build_master, builtin_exact_solve,
                          resolve_backend, solve_master)
from odmts.oracle import all_leg_subsets, is_degree_balanced

from conftest import oracle_family_spec


def _model(inst, direct=frozenset()):
    bounds = {t.id: compute_big_m(inst, t) for t in inst.trips if t.id not in direct}
    return build_master(inst, bounds, direct)


def _feed(model, inst, designs):
    """Cuts a decomposition would add after visiting ``designs``."""
    for D in designs:
        for t in model.trips:
            r = solve_follower(inst, t, D)
            model.add_cut(benders_cut(t, D, extract_duals(inst, t, D, r)))
            if t.has_choice:
                a = evaluate_choice(t, r).adopts
                for c in consistency_cuts(inst, t, D, not a, ChoiceOutcome(a), None, None):
                    model.add_cut(c)


@pytest.mark.parametrize("n, count", [(2, 2), (3, 10), (4, 152)])
def test_balanced_design_counts(n, count):
    z = balanced_designs(n)
    assert len(z) == count
    brute = sum(1 for s in all_leg_subsets(n) if is_degree_balanced(s, n))
    assert brute == count
    assert not z.flags.writeable


def test_row_counts(small3):
    m = _model(small3)
    n_choice = len(small3.choice_trips)
    assert len(m.balance_rows()) == 3
    assert len(m.mccormick_rows()) == 4 * n_choice
    keys = [v[0] for v in m.variables()]
    assert len(keys) == len(set(keys)) == 6 + 2 * n_choice + len(small3.trips)


def test_fixed_direct_trips_become_constants(small3):
    direct = detect_direct_trips(small3)
    assert direct
    m = _model(small3, direct)
    assert {t.id for t in m.trips} == {t.id for t in small3.trips} - direct
    rev = small3.econ.fare_revenue
    expect = 0.0
    for tid in direct:
        t = small3.trip(tid)
        r = solve_follower(small3, t, Design.empty(3))
        if not t.has_choice:
            expect += t.riders * r.d_value
        elif evaluate_choice(t, r).adopts:
            expect += t.riders * (r.d_value - rev)
    assert m.constant == pytest.approx(expect)


def test_add_cut_dedupes(small3):
    m = _model(small3)
    t = small3.trips[0]
    c = nogood_force_zero(t, Design.full(3), small3.legs)
    assert m.add_cut(c) and not m.add_cut(c)
    assert len(m.cut_rows()) == 1


@pytest.mark.parametrize("seed", range(6))
def test_builtin_matches_highs(seed):
    inst = generate(oracle_family_spec(seed))
    n = len(inst.network.hubs)
    designs = [Design.from_vector(n, inst.legs, z) for z in balanced_designs(n)]
    rng = np.random.default_rng(seed)
    m = _model(inst)
    for step in range(3):
        picks = [designs[k] for k in rng.choice(len(designs), size=2)]
        _feed(m, inst, picks)
        a = builtin_exact_solve(m)
        b = solve_master(m, "external:highs")
        assert a.objective_value == pytest.approx(b.objective_value, abs=1e-6)
        for sol in (a, b):
            assert sol.design.is_balanced()
            for tid, nu in sol.nu.items():
                assert abs(nu - sol.adopt[tid] * sol.d_bar[tid]) <= 1e-6


def test_limit_and_backend_names(small3):
    m = _model(small3)
    with pytest.raises(MasterError):
        builtin_exact_solve(m, limit=2)
    assert resolve_backend("auto", 5) == "builtin"
    assert resolve_backend("auto", 6) == "external:highs"
    with pytest.raises(ValueError):
        resolve_backend("gurobi", 3)
    with pytest.raises(MasterError):
        solve_master(m, "external:cplex")


def test_empty_pool_picks_cheapest_lower_bound(small3):
    m = _model(small3)
    sol = solve_master(m)
    # with no cuts every trip sits at its static lower bound
    for t in m.trips:
        assert sol.d_bar[t.id] == pytest.approx(m.bounds[t.id].d_lower)
