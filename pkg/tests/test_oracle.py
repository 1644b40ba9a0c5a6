import itertools

import numpy as np
import pytest

from lbfl.gallery import gen_cdufl_gap, gen_locality_cycle, gen_locality_star, gen_random_cdufl
from lbfl.model import CduflInstance, InfeasibleError, LbflInstance, UflInstance, check_feasible, evaluate
from lbfl.oracle import OracleSizeError, exact_cdufl, exact_lbfl, exact_ufl, lsa_cdufl
from lbfl.flow import assign_lower_bounded, cdufl_best_assignment

from conftest import planar_instance


def test_star_optimum():
    g = gen_locality_star(4)
    res = exact_lbfl(g.instance)
    assert res.open == {0}
    assert res.total == pytest.approx(2 * 16 + 1e-3)


def test_cycle_optimum():
    res = exact_lbfl(gen_locality_cycle(3).instance)
    assert res.open == {0, 1, 2} and res.total == pytest.approx(6.0)


def test_single_facility():
    inst = LbflInstance(np.array([5.0]), np.zeros((4, 4)), 3, M=3)
    assert exact_lbfl(inst).total == 5.0


def test_size_cap():
    inst = planar_instance(0, 5, 6, 1)
    with pytest.raises(OracleSizeError):
        exact_lbfl(inst, max_facilities=4)


def test_too_few_clients():
    with pytest.raises(InfeasibleError):
        exact_lbfl(planar_instance(0, 2, 2, 3))


def test_ufl_one_facility_and_twins():
    assert exact_ufl(planar_instance(0, 1, 3, 1).as_ufl()).open == {0}
    twins = UflInstance(np.array([1.0, 1.0]), np.zeros((4, 4)), 2)
    assert exact_ufl(twins).open == {0}


def _direct_sum_ufl(inst):
    best = np.inf
    for r in range(1, inst.n_facilities + 1):
        for S in itertools.combinations(range(inst.n_facilities), r):
            cost = sum(inst.opening_costs[i] for i in S)
            cost += sum(min(inst.conn[i, j] for i in S) for j in range(inst.n_clients))
            best = min(best, cost)
    return best


@pytest.mark.parametrize("seed", range(5))
def test_ufl_matches_direct_sum(seed):
    inst = planar_instance(seed, 6, 8, 1).as_ufl()
    assert exact_ufl(inst).total == pytest.approx(_direct_sum_ufl(inst))


@pytest.mark.parametrize("seed", range(5))
def test_lbfl_matches_flow_priced_enumeration(seed):
    inst = planar_instance(seed, 5, 10, 3, cost_scale=0.3)
    res = exact_lbfl(inst)
    assert check_feasible(inst, res.solution)[0]
    assert evaluate(inst, res.solution).total == pytest.approx(res.total)
    best = np.inf
    for r in range(1, 4):
        for S in itertools.combinations(range(5), r):
            _, a = assign_lower_bounded(inst, S)
            best = min(best, a + inst.opening_costs[list(S)].sum())
    assert res.total == pytest.approx(best)


@pytest.mark.parametrize("seed", range(5))
def test_m1_lbfl_equals_ufl(seed):
    inst = planar_instance(seed, 5, 7, 1)
    assert exact_lbfl(inst).total == pytest.approx(exact_ufl(inst.as_ufl()).total)


def test_cdufl_gap_and_zero_demand():
    assert exact_cdufl(gen_cdufl_gap(10, 4).instance).total == 10.0
    zero = CduflInstance(np.array([1.0]), np.array([], dtype=np.int64), np.array([0]), np.zeros((2, 2)))
    res = exact_cdufl(zero)
    assert res.total == 0.0 and res.open == frozenset()


@pytest.mark.parametrize("seed", range(5))
def test_cdufl_matches_flow_priced_enumeration(seed):
    inst = gen_random_cdufl(seed)
    best = np.inf
    for r in range(inst.n_uncap + 1):
        for S in itertools.combinations(range(inst.n_uncap), r):
            try:
                _, a = cdufl_best_assignment(inst, S)
            except InfeasibleError:
                continue
            best = min(best, a + sum(inst.uncap_cost[i] for i in S))
    assert exact_cdufl(inst).total == pytest.approx(best)


def test_cdufl_flows_cover_demand():
    inst = gen_random_cdufl(11)
    res = exact_cdufl(inst)
    got = {}
    for (_, d), x in res.flows.items():
        got[d] = got.get(d, 0) + x
    assert [got.get(d, 0) for d in range(inst.n_demand)] == list(inst.demand)
    cost, _ = lsa_cdufl(inst, res.open)
    assert cost + sum(inst.uncap_cost[i] for i in res.open) == pytest.approx(res.total)
