"""Bicriteria step: UFL with radius-inflated opening costs, solved by scaled
local search and pruned to delete-optimality, so every open facility
serves at least ceil(alpha*M) clients."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .local_search import LocalSearchConfig, make_delete_optimal, ufl_cost, ufl_local_search
from .model import InfeasibleError, LbflInstance, LbflSolution, UflInstance


def breakpoint(alpha: float, M: int) -> int:
    """ceil(alpha * M), robust to float noise at exact multiples of 1/M."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    k = math.ceil(alpha * M - 1e-9)
    return min(max(k, 1), M)


class RadiusTable:
    """Sorted distances from each facility to its M nearest clients.

    Equidistant clients are ordered by id, which fixes the set D(i).
    """

    def __init__(self, inst: LbflInstance):
        if inst.n_clients < inst.M:
            raise InfeasibleError(f"{inst.n_clients} clients < M={inst.M}")
        self.M = inst.M
        order = np.argsort(inst.conn, axis=1, kind="stable")[:, : inst.M]
        self.nearest = order
        self.sorted = np.take_along_axis(inst.conn, order, axis=1)
        self.sorted.setflags(write=False)

    def radius(self, i: int, alpha: float) -> float:
        return float(self.sorted[i, breakpoint(alpha, self.M) - 1])

    def radii(self, alpha: float) -> np.ndarray:
        return self.sorted[:, breakpoint(alpha, self.M) - 1].copy()

    def total(self, open_set: Iterable[int], alpha: float) -> float:
        """Sum of radii over a facility set (R* when given an optimal set)."""
        r = self.radii(alpha)
        return float(sum(r[i] for i in open_set))

    def near_sum(self, i: int) -> float:
        return float(self.sorted[i].sum())


def radius(inst: LbflInstance, i: int, alpha: float) -> float:
    return RadiusTable(inst).radius(i, alpha)


def build_bicriteria_ufl(inst: LbflInstance, alpha: float, table: RadiusTable | None = None) -> UflInstance:
    """Same points, opening cost of i raised to f_i + 2 alpha M R_i(alpha)."""
    table = table or RadiusTable(inst)
    costs = inst.opening_costs + 2.0 * alpha * inst.M * table.radii(alpha)
    return inst.as_ufl(costs)


class LowServiceViolation(AssertionError):
    pass


@dataclass
class BicriteriaSolution:
    alpha: float
    gamma: float
    k: int  # ceil(alpha * M)
    solution: LbflSolution
    counts: dict[int, int]
    facility_cost: float  # F_b, modified opening costs
    assignment_cost: float  # C_b
    ls_facility_cost: float  # local-search output before delete pruning
    ls_assignment_cost: float
    ufl: UflInstance

    @property
    def open(self) -> frozenset:
        return self.solution.open


def solve_bicriteria(
    inst: LbflInstance, alpha: float, gamma: float, epsilon_ls: float = 1e-6
) -> BicriteriaSolution:
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if inst.n_clients < inst.M:
        raise InfeasibleError(f"{inst.n_clients} clients < M={inst.M}")
    table = RadiusTable(inst)
    ufl = build_bicriteria_ufl(inst, alpha, table)
    ls = ufl_local_search(ufl, LocalSearchConfig(epsilon_ls=epsilon_ls, sigma=gamma))
    ls_f = float(ufl.opening_costs[sorted(ls.open)].sum())
    ls_c = ufl_cost(ufl, ls.open) - ls_f
    sol = make_delete_optimal(ufl, ls)
    counts = sol.served_counts()
    k = breakpoint(alpha, inst.M)
    low = {i: n for i, n in counts.items() if n < k}
    if low:
        raise LowServiceViolation(f"delete-optimal facilities serving < {k} clients: {low}")
    fb = float(ufl.opening_costs[sorted(sol.open)].sum())
    cb = ufl_cost(ufl, sol.open) - fb
    return BicriteriaSolution(alpha, gamma, k, sol, counts, fb, cb, ls_f, ls_c, ufl)


def scaled_search_bounds(F_opt: float, C_opt: float, R_opt: float, alpha: float, gamma: float, M: int):
    """Upper bounds on (facility, assignment) cost of the scaled local optimum."""
    inflated = F_opt + 2.0 * alpha * M * R_opt
    return inflated + 2.0 * C_opt / gamma, gamma * inflated + C_opt
