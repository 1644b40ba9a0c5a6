import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lbfl.bicriteria import (
    RadiusTable,
    breakpoint,
    build_bicriteria_ufl,
    scaled_search_bounds,
    radius,
    solve_bicriteria,
)
from lbfl.gallery import gen_locality_star
from lbfl.model import InfeasibleError, LbflInstance
from lbfl.oracle import exact_lbfl

from conftest import planar_instance


def line_instance(client_dists, M, f=0.0):
    """One facility at the origin and clients on a ray."""
    pts = [0.0] + list(client_dists)
    d = np.abs(np.subtract.outer(pts, pts))
    return LbflInstance(np.array([f]), d, len(client_dists), M=M)


def test_radius_examples():
    inst = line_instance([1, 2, 3, 4], 4)
    assert radius(inst, 0, 0.5) == 2
    assert radius(inst, 0, 1.0) == 4
    assert radius(inst, 0, 0.26) == 2


def test_breakpoint_at_exact_multiples():
    assert breakpoint(0.7, 10) == 7
    # 0.1 * 3 * 10 evaluates to 3.0000000000000004
    assert breakpoint(0.1 * 3, 10) == 3
    with pytest.raises(ValueError):
        breakpoint(0.0, 3)


def test_modified_opening_cost():
    inst = line_instance([3, 5], 2)
    assert build_bicriteria_ufl(inst, 1.0).opening_costs[0] == 20.0


def test_colocated_clients_keep_original_costs():
    inst = LbflInstance(np.array([2.0, 3.0]), np.zeros((5, 5)), 3, M=2)
    np.testing.assert_array_equal(build_bicriteria_ufl(inst, 0.75).opening_costs, [2.0, 3.0])


def test_too_few_clients():
    with pytest.raises(InfeasibleError):
        RadiusTable(line_instance([1.0], 2))


@given(st.integers(0, 10_000), st.integers(1, 6))
def test_radius_table_identities(seed, M):
    inst = planar_instance(seed, 3, 8, M)
    t = RadiusTable(inst)
    alphas = [k / M for k in range(1, M + 1)]
    for i in range(3):
        radii = [t.radius(i, a) for a in alphas]
        assert radii == sorted(radii)
        # step integral of R_i over (0, 1] equals the mean near distance
        assert sum(radii) / M == pytest.approx(t.near_sum(i) / M, abs=1e-12)
        for a in np.linspace(0.05, 0.95, 7):
            assert t.radius(i, a) <= t.near_sum(i) / (M * (1 - a)) + 1e-12
    assert t.total([0, 2], 0.5) <= t.total([0, 2], 1.0)


def test_single_facility_serves_everyone():
    b = solve_bicriteria(line_instance([1, 2, 3], 2), 0.75, 1.0)
    assert b.open == {0} and b.counts == {0: 3}


@pytest.mark.parametrize("alpha", [0.75, 1.0])
def test_star_instance_minimum_service(alpha):
    g = gen_locality_star(4)
    b = solve_bicriteria(g.instance, alpha, 1.0)
    assert min(b.counts.values()) >= breakpoint(alpha, 4)


@given(st.integers(0, 10_000), st.sampled_from([0.6, 0.75, 0.9, 1.0]), st.floats(0.05, 2.0))
def test_minimum_service_on_random_instances(seed, alpha, gamma):
    inst = planar_instance(seed, 5, 12, 3, cost_scale=0.2)
    b = solve_bicriteria(inst, alpha, gamma)
    assert min(b.counts.values()) >= b.k
    assert sum(b.counts.values()) == inst.n_clients


@pytest.mark.parametrize("seed", range(8))
def test_scaled_search_bounds_against_oracle(seed):
    inst = planar_instance(seed, 6, 14, 3, cost_scale=0.5)
    opt = exact_lbfl(inst)
    alpha, gamma = 0.75, 0.3
    b = solve_bicriteria(inst, alpha, gamma, epsilon_ls=1e-9)
    R = RadiusTable(inst).total(opt.open, alpha)
    fmax, cmax = scaled_search_bounds(opt.costs.facility_cost, opt.costs.assignment_cost, R, alpha, gamma, 3)
    assert b.ls_facility_cost <= fmax * (1 + 1e-3)
    assert b.ls_assignment_cost <= cmax * (1 + 1e-3)
