import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lbfl.flow import (
    FlowInfeasible,
    FlowNetwork,
    assign_lower_bounded,
    cdufl_best_assignment,
    lower_bounded_transport,
    min_cost_flow,
)
from lbfl.gallery import gen_cdufl_gap
from lbfl.model import CduflInstance, InfeasibleError, LbflInstance, euclidean, nearest_assignment, evaluate

from conftest import planar_instance


def test_single_arc():
    net = FlowNetwork(2, 0, 1, 3)
    net.add_arc(0, 1, 5, 2.0)
    res = min_cost_flow(net)
    assert res.flow == [3] and res.cost == 6.0


def test_forced_split():
    net = FlowNetwork(2, 0, 1, 2)
    net.add_arc(0, 1, 1, 1.0)
    net.add_arc(0, 1, 1, 3.0)
    assert min_cost_flow(net).cost == 4.0


def test_infeasible_value_reports_max_flow():
    net = FlowNetwork(2, 0, 1, 4)
    net.add_arc(0, 1, 3, 1.0)
    with pytest.raises(FlowInfeasible) as exc:
        min_cost_flow(net)
    assert exc.value.max_flow == 3


def test_lower_bound_forces_expensive_arc():
    net = FlowNetwork(2, 0, 1, 2)
    net.add_arc(0, 1, 2, 1.0)
    net.add_arc(0, 1, 2, 5.0, lower=1)
    assert min_cost_flow(net).cost == 6.0


def _brute_force_flow(n, arcs, value):
    best = np.inf
    for flows in itertools.product(*[range(a[2] + 1) for a in arcs]):
        bal = [0] * n
        for (t, h, _, _), f in zip(arcs, flows):
            bal[t] -= f
            bal[h] += f
        if bal[0] == -value and bal[n - 1] == value and all(b == 0 for b in bal[1:-1]):
            best = min(best, sum(f * a[3] for a, f in zip(arcs, flows)))
    return best


@given(st.integers(0, 100_000))
def test_random_six_node_network_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    arcs = []
    for _ in range(7):
        t, h = rng.choice(6, 2, replace=False)
        arcs.append((int(t), int(h), int(rng.integers(0, 3)), float(rng.integers(0, 6))))
    net = FlowNetwork(6, 0, 5, 2)
    for a in arcs:
        net.add_arc(*a)
    want = _brute_force_flow(6, arcs, 2)
    if np.isinf(want):
        with pytest.raises(FlowInfeasible):
            min_cost_flow(net)
    else:
        res = min_cost_flow(net)
        assert res.cost == pytest.approx(want)
        assert all(isinstance(f, int) for f in res.flow)


def test_m1_reduces_to_nearest_assignment(small_instance):
    inst = LbflInstance(small_instance.opening_costs, small_instance.dist, small_instance.n_clients, M=1)
    _, cost = assign_lower_bounded(inst, [0, 1, 3])
    assert cost == pytest.approx(evaluate(inst, nearest_assignment(inst, [0, 1, 3])).assignment_cost)


def test_colocated_pairs_split_evenly():
    pts = np.array([[0, 0], [10, 0], [0, 0], [0, 0], [10, 0], [10, 0]], float)
    inst = LbflInstance(np.zeros(2), euclidean(pts), 4, M=2)
    sol, cost = assign_lower_bounded(inst, [0, 1])
    assert cost == 0.0 and sol.assign == (0, 0, 1, 1)


def _brute_force_assignment(conn, open_set, M):
    best = np.inf
    for choice in itertools.product(open_set, repeat=conn.shape[1]):
        if all(choice.count(i) >= M for i in open_set):
            best = min(best, sum(conn[i, j] for j, i in enumerate(choice)))
    return best


@pytest.mark.parametrize("seed", range(5))
def test_lower_bounded_assignment_matches_enumeration(seed):
    inst = planar_instance(seed, 3, 9, 3)
    sol, cost = assign_lower_bounded(inst, [0, 1, 2])
    assert cost == pytest.approx(_brute_force_assignment(inst.conn, (0, 1, 2), 3))
    assert evaluate(inst, sol).assignment_cost == pytest.approx(cost)
    assert min(sol.served_counts().values()) >= 3


def test_lower_bounded_assignment_infeasible():
    inst = planar_instance(0, 3, 5, 2)
    with pytest.raises(InfeasibleError):
        assign_lower_bounded(inst, [0, 1, 2])


@given(st.integers(0, 10_000), st.integers(0, 5), st.floats(0.1, 1.0))
def test_moving_client_closer_never_raises_cost(seed, j, shrink):
    inst = planar_instance(seed, 3, 6, 2)
    _, before = assign_lower_bounded(inst, [0, 1])
    d = np.array(inst.dist)
    col = 3 + j
    d[:3, col] *= shrink
    d[col, :3] *= shrink
    # only facility-to-client entries matter to the assignment
    moved = LbflInstance(inst.opening_costs, d, inst.n_clients, M=2)
    _, after = assign_lower_bounded(moved, [0, 1])
    assert after <= before + 1e-9


def test_transport_rejects_closed_receivers():
    with pytest.raises(InfeasibleError):
        lower_bounded_transport(np.zeros((1, 2)), [3], [], 1)


def test_cdufl_gap_instance_assignment_is_free():
    g = gen_cdufl_gap(10, 4)
    _, cost = cdufl_best_assignment(g.instance, [0])
    assert cost == 0.0


def test_cdufl_uncapacitated_at_distance_two():
    d = np.array([[0, 2.0], [2.0, 0]])
    inst = CduflInstance(np.array([1.0]), np.array([], dtype=np.int64), np.array([3]), d)
    plan, cost = cdufl_best_assignment(inst, [0])
    assert cost == 6.0 and plan.units == {(0, 0): 3}


def test_cdufl_infeasible_without_uncapacitated():
    g = gen_cdufl_gap(10, 4)
    with pytest.raises(InfeasibleError):
        cdufl_best_assignment(g.instance, [])


def _brute_force_cdufl(inst, open_uncap):
    units = [d for d in range(inst.n_demand) for _ in range(int(inst.demand[d]))]
    suppliers = list(open_uncap) + [inst.n_uncap + c for c in range(inst.n_cap)]
    sd = inst.supply_demand_dist
    best = np.inf
    for choice in itertools.product(suppliers, repeat=len(units)):
        load = {}
        for s in choice:
            load[s] = load.get(s, 0) + 1
        if any(s >= inst.n_uncap and x > inst.capacity[s - inst.n_uncap] for s, x in load.items()):
            continue
        best = min(best, sum(sd[s, d] for s, d in zip(choice, units)))
    return best


@pytest.mark.parametrize("seed", range(4))
def test_cdufl_assignment_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    inst = CduflInstance(
        rng.random(2), np.array([1, 2]), np.array([2, 1, 2]), euclidean(rng.random((7, 2)))
    )
    _, cost = cdufl_best_assignment(inst, [1])
    assert cost == pytest.approx(_brute_force_cdufl(inst, [1]))


@given(st.integers(0, 10_000))
def test_cdufl_without_capacities_is_nearest_assignment(seed):
    rng = np.random.default_rng(seed)
    inst = CduflInstance(rng.random(3), np.array([], dtype=np.int64), rng.integers(1, 4, 4), euclidean(rng.random((7, 2))))
    _, cost = cdufl_best_assignment(inst, [0, 2])
    sd = inst.supply_demand_dist
    assert cost == pytest.approx(float((sd[[0, 2]].min(axis=0) * inst.demand).sum()))
