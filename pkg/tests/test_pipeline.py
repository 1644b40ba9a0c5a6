import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from lbfl.gallery import gen_locality_star
from lbfl.model import check_feasible
from lbfl.pipeline import (
    BoundViolation,
    PipelineConfig,
    alpha_from_uniform,
    enumerate_alphas,
    eval_delta,
    eval_g,
    eval_h,
    eval_schedule_constants,
    evaluate_bound,
    fixed_alpha_coefficients,
    gamma_for,
    guarantee_bound,
    sample_alpha,
    schedule_coefficients,
    solve,
)

from conftest import planar_instance


def test_constant_values():
    assert eval_h(1.0) == pytest.approx(1 + 4 + 4 + 4 * math.sqrt(6))
    assert eval_h(0.75) == pytest.approx(26.18974, abs=1e-5)
    assert eval_g(1.0) == pytest.approx(4 + 2 * math.sqrt(6))
    assert eval_g(0.75) == pytest.approx(12.4654, abs=1e-4)
    assert eval_delta(1.0) == pytest.approx(math.sqrt(2 / 3))
    assert eval_delta(0.75) == pytest.approx(0.784465, abs=1e-6)


@pytest.mark.parametrize("bad", [0.5, 0.3, 0.0])
def test_constants_need_alpha_above_half(bad):
    with pytest.raises(ValueError):
        eval_h(bad)


@given(st.floats(0.51, 1.0))
def test_g_is_dominated_by_h(alpha):
    assert 2 * eval_g(alpha) + 1 <= eval_h(alpha) + 1e-9
    assert 0 < eval_delta(alpha) < 1


@pytest.mark.parametrize("beta", [0.6, 0.67, 0.8])
def test_closed_forms_match_quadrature(beta):
    c2, c3, k_hat = eval_schedule_constants(beta)
    lb = math.log(1 / beta)
    c2_num = quad(lambda x: eval_h(x) / (x * lb), beta, 1, epsabs=1e-12, epsrel=1e-12)[0]
    c3_num = quad(eval_h, beta, 1, epsabs=1e-12, epsrel=1e-12)[0] / (1 - beta)
    assert c2 == pytest.approx(c2_num, abs=1e-6)
    assert c3 == pytest.approx(c3_num, abs=1e-6)
    assert k_hat == pytest.approx((lb**2 * c2 / c3) ** 0.25)


def test_schedule_constants_frozen():
    c2, c3, k_hat = eval_schedule_constants(0.67)
    assert c2 == pytest.approx(23.907013916747175, rel=1e-12)
    assert c3 == pytest.approx(23.50162471532989, rel=1e-12)
    assert k_hat == pytest.approx(0.6355444910003732, rel=1e-12)


def test_published_coefficients():
    f, c = fixed_alpha_coefficients(0.75)
    assert f == pytest.approx(4.0)
    assert max(f, c) == pytest.approx(92.84, abs=0.005)
    f, c = schedule_coefficients(0.67)
    assert max(f, c) < 82.59
    assert c == pytest.approx(82.58155167739933, rel=1e-12)


def test_evaluate_bound_with_and_without_optimum():
    g = gamma_for(0.75, mode="fixed")
    short = evaluate_bound(0.75, g)
    assert "bound" not in short and short["max_coeff"] == pytest.approx(92.839306, abs=1e-6)
    full = evaluate_bound(0.75, g, M=3, F_opt=1.0, C_opt=2.0, R_opt=0.5)
    assert full["bound"] == pytest.approx(guarantee_bound(1.0, 2.0, 0.5, 0.75, g, 3))


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0.51, 0.99), st.integers(1, 6))
def test_worst_case_radius_reproduces_coefficients(F, C, alpha, M):
    g = gamma_for(alpha, mode="fixed")
    fc, cc = fixed_alpha_coefficients(alpha, g)
    R = C / (M * (1 - alpha))
    assert guarantee_bound(F, C, R, alpha, g, M) == pytest.approx(fc * F + cc * C, rel=1e-9, abs=1e-9)


def test_gamma_modes():
    assert gamma_for(0.75, mode="fixed") == pytest.approx(0.114549, abs=1e-6)
    assert gamma_for(0.75) == pytest.approx(0.124188, abs=1e-6)
    with pytest.raises(ValueError):
        gamma_for(0.75, mode="other")


def test_alpha_distribution():
    assert alpha_from_uniform(0.0) == pytest.approx(0.67)
    assert alpha_from_uniform(1.0) == 1.0
    u = np.random.default_rng(7).random(100_000)
    mean = float(np.mean([alpha_from_uniform(x) for x in u]))
    assert mean == pytest.approx((1 - 0.67) / math.log(1 / 0.67), abs=0.003)
    assert sample_alpha(3) == sample_alpha(3)
    assert 0.67 <= sample_alpha(11) <= 1


@pytest.mark.parametrize("M,expected", [(10, [0.7, 0.8, 0.9, 1.0]), (1, [1.0]), (3, [1.0]), (4, [0.75, 1.0])])
def test_enumerated_alphas(M, expected):
    assert enumerate_alphas(M) == pytest.approx(expected)


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(alpha_mode="bogus")
    with pytest.raises(ValueError):
        PipelineConfig(alpha_mode="fixed", alpha=0.5)
    with pytest.raises(ValueError):
        PipelineConfig(beta=0.4)
    assert PipelineConfig(alpha_mode="fixed").gamma_at(0.75) == pytest.approx(3 / eval_h(0.75))


def test_m_equal_one_behaves_like_ufl():
    inst = planar_instance(5, 5, 8, 1, cost_scale=0.5)
    sol, rep = solve(inst, oracle=True)
    assert check_feasible(inst, sol)[0]
    assert rep.all_hold
    assert [b["alpha"] for b in rep.branches] == [1.0]


@pytest.mark.parametrize("seed", range(6))
def test_derandomised_run_takes_best_branch(seed):
    inst = planar_instance(seed, 6, 16, 4, cost_scale=0.4)
    sol, rep = solve(inst, oracle=True)
    assert rep.final.total == min(b["total"] for b in rep.branches)
    assert rep.all_hold
    assert rep.oracle["ratio"] <= 82.6


def test_star_family_within_guarantee():
    g = gen_locality_star(4)
    _, rep = solve(g.instance, oracle=True)
    assert rep.final.total <= 82.6 * (2 * 16 + 1e-3)
    assert rep.oracle["opt"] == pytest.approx(2 * 16 + 1e-3)


def test_fixed_and_random_modes_run_one_branch():
    inst = planar_instance(1, 5, 12, 3, cost_scale=0.3)
    for mode in ("fixed", "random"):
        _, rep = solve(inst, PipelineConfig(alpha_mode=mode, seed=4))
        assert len(rep.branches) == 1 and rep.mode == mode
        assert ("note" in rep.to_dict()) == (mode == "random")


def test_report_serialises():
    inst = planar_instance(3, 4, 10, 2)
    _, rep = solve(inst)
    d = rep.to_dict()
    assert d["all_hold"] is True and set(d["checks"]) >= {"min_served", "mapped_cost"}


def test_strict_mode_raises_on_impossible_check(monkeypatch):
    import lbfl.pipeline as pl

    monkeypatch.setattr(pl, "guarantee_bound", lambda *a: -1.0)
    inst = planar_instance(3, 4, 10, 2, cost_scale=0.5)
    with pytest.raises(BoundViolation):
        solve(inst, oracle=True)
    _, rep = solve(inst, oracle=True, strict=False)
    assert not rep.checks["guarantee"].holds
