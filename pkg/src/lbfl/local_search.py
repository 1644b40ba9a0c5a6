"""Add/drop/swap local search for UFL and for capacity-discounted UFL."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator


from .flow import Assignment, cdufl_best_assignment
from .model import (
    CduflInstance,
    CostBreakdown,
    InfeasibleError,
    LbflSolution,
    UflInstance,
    nearest_assignment,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Move:
    kind: str
    out: int | None = None  # facility closed by the move
    into: int | None = None  # facility opened by the move

    def __post_init__(self):
        ok = {
            "add": self.out is None and self.into is not None,
            "drop": self.out is not None and self.into is None,
            "swap": self.out is not None and self.into is not None,
        }
        if not ok.get(self.kind, False):
            raise ValueError(f"malformed move {self}")

    def apply(self, open_set: frozenset) -> frozenset:
        s = set(open_set)
        if self.out is not None:
            if self.out not in s:
                raise ValueError(f"{self}: facility {self.out} is not open")
            s.discard(self.out)
        if self.into is not None:
            if self.into in open_set:
                raise ValueError(f"{self}: facility {self.into} is already open")
            s.add(self.into)
        return frozenset(s)


def neighborhood(open_set: frozenset, candidates: Iterable[int]) -> Iterator[Move]:
    """All add, then drop, then swap moves, each in lowest-id order."""
    cand = sorted(candidates)
    closed = [i for i in cand if i not in open_set]
    opened = [i for i in cand if i in open_set]
    for i in closed:
        yield Move("add", into=i)
    for i in opened:
        yield Move("drop", out=i)
    for i in opened:
        for k in closed:
            yield Move("swap", out=i, into=k)


@dataclass
class LocalSearchConfig:
    epsilon_ls: float = 1e-6
    sigma: float = 1.0
    max_iterations: int = 10_000

    def __post_init__(self):
        if not self.epsilon_ls > 0:
            raise ValueError("epsilon_ls must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class SearchTrace:
    moves: list[Move] = field(default_factory=list)
    costs: list[float] = field(default_factory=list)
    evaluations: int = 0


def _descend(
    start: frozenset,
    candidates: list[int],
    price: Callable[[frozenset], float],
    cfg: LocalSearchConfig,
) -> tuple[frozenset, float, SearchTrace]:
    """Best-improvement descent; a move is taken only if it lowers the
    (scaled) cost by more than ``epsilon_ls * cost / len(candidates)``."""
    cache: dict[frozenset, float] = {}

    def cost_of(s: frozenset) -> float:
        if s not in cache:
            cache[s] = price(s)
        return cache[s]

    cur = start
    cur_cost = cost_of(cur)
    trace = SearchTrace(costs=[cur_cost])
    n = max(1, len(candidates))
    for _ in range(cfg.max_iterations):
        best_move, best_cost = None, cur_cost
        for mv in neighborhood(cur, candidates):
            c = cost_of(mv.apply(cur))
            if c < best_cost:
                best_move, best_cost = mv, c
        gain = cur_cost - best_cost
        if best_move is None or not gain > max(cfg.epsilon_ls * cur_cost / n, 1e-12):
            break
        cur, cur_cost = best_move.apply(cur), best_cost
        trace.moves.append(best_move)
        trace.costs.append(cur_cost)
    else:
        log.warning("local search hit the iteration cap (%d)", cfg.max_iterations)
    trace.evaluations = len(cache)
    return cur, cur_cost, trace


def improving_moves(
    open_set: frozenset,
    candidates: Iterable[int],
    price: Callable[[frozenset], float],
    threshold: float = 0.0,
) -> list[tuple[Move, float]]:
    """Exhaustive scan: every move whose cost beats the current one by more
    than ``threshold``.  Empty list is the local-optimality certificate."""
    base = price(open_set)
    out = []
    for mv in neighborhood(open_set, candidates):
        c = price(mv.apply(open_set))
        if base - c > threshold:
            out.append((mv, base - c))
    return out


# ---------------------------------------------------------------------------
# UFL


def ufl_cost(inst: UflInstance, open_set: Iterable[int], scale: float = 1.0) -> float:
    idx = sorted(open_set)
    if not idx:
        return 0.0 if inst.n_clients == 0 else math.inf
    f = inst.opening_costs[idx].sum()
    a = inst.conn[idx].min(axis=0).sum() if inst.n_clients else 0.0
    return float(scale * f + a)


def ufl_local_search(
    inst: UflInstance, config: LocalSearchConfig | None = None, start: Iterable[int] | None = None
) -> LbflSolution:
    """Local optimum for UFL with facility costs scaled by ``config.sigma``.

    The search starts from all facilities open unless ``start`` is given.
    The returned solution assigns clients to their nearest open facility.
    """
    cfg = config or LocalSearchConfig()
    nf = inst.n_facilities
    if nf == 0:
        raise ValueError("UFL instance has no facilities")
    s0 = frozenset(range(nf) if start is None else start)
    best, _, _ = _descend(s0, list(range(nf)), lambda s: ufl_cost(inst, s, cfg.sigma), cfg)
    return nearest_assignment(inst, best)


def make_delete_optimal(inst: UflInstance, sol: LbflSolution, rel_tol: float = 1e-12) -> LbflSolution:
    """Close facilities while doing so does not raise the true UFL cost.

    Closures are taken greedily, largest saving first (lowest id on ties).
    A closure with zero change is also taken: a facility whose removal
    costs nothing is exactly the degenerate case that would otherwise keep
    an under-served facility open.  The last open facility is never closed.
    """
    cur = frozenset(sol.open)
    cur_cost = ufl_cost(inst, cur)
    while len(cur) > 1:
        best_i, best_cost = None, None
        for i in sorted(cur):
            c = ufl_cost(inst, cur - {i})
            if best_cost is None or c < best_cost:
                best_i, best_cost = i, c
        if best_cost > cur_cost + rel_tol * max(1.0, abs(cur_cost)):
            break
        cur, cur_cost = cur - {best_i}, best_cost
    return nearest_assignment(inst, cur)


def is_delete_optimal(inst: UflInstance, sol: LbflSolution, rel_tol: float = 1e-12) -> bool:
    cur = frozenset(sol.open)
    if len(cur) <= 1:
        return True
    base = ufl_cost(inst, cur)
    return all(
        ufl_cost(inst, cur - {i}) > base + rel_tol * max(1.0, abs(base)) for i in cur
    )


# ---------------------------------------------------------------------------
# CDUFL


@dataclass
class CduflSolution:
    """Open uncapacitated supply points and a demand-serving flow.

    ``supply_cost[s]`` is the assignment cost carried by supply point ``s``
    (combined indexing: uncapacitated first, then capacitated).
    """

    open_uncap: frozenset
    assignment: Assignment
    facility_cost: float
    assignment_cost: float
    supply_cost: dict[int, float] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.facility_cost + self.assignment_cost

    @property
    def costs(self) -> CostBreakdown:
        return CostBreakdown(self.facility_cost, self.assignment_cost)


def cdufl_solution(inst: CduflInstance, open_uncap: Iterable[int], assignment: Assignment) -> CduflSolution:
    """Wrap a plan with its costs, checking demand coverage and capacities."""
    opened = frozenset(int(i) for i in open_uncap)
    sd = inst.supply_demand_dist
    nu = inst.n_uncap
    per: dict[int, float] = {}
    got = assignment.receiver_totals()
    for d in range(inst.n_demand):
        if got.get(d, 0) != int(inst.demand[d]):
            raise ValueError(f"demand point {d} receives {got.get(d, 0)} of {int(inst.demand[d])}")
    for s, tot in assignment.supplier_totals().items():
        if s < nu and s not in opened:
            raise ValueError(f"closed uncapacitated point {s} ships {tot} units")
        if s >= nu and tot > int(inst.capacity[s - nu]):
            raise ValueError(f"capacitated point {s} ships {tot} > capacity")
    for (s, d), x in assignment.items():
        per[s] = per.get(s, 0.0) + x * float(sd[s, d])
    fc = float(sum(inst.uncap_cost[i] for i in sorted(opened)))
    return CduflSolution(opened, assignment, fc, float(sum(per.values())), per)


def cdufl_price(inst: CduflInstance, open_uncap: frozenset, sigma: float = 1.0) -> float:
    """Scaled cost of the best assignment for an open set (inf if infeasible)."""
    try:
        _, ac = cdufl_best_assignment(inst, open_uncap)
    except InfeasibleError:
        return math.inf
    return float(sigma * sum(inst.uncap_cost[i] for i in sorted(open_uncap)) + ac)


def cdufl_local_search(
    inst: CduflInstance, config: LocalSearchConfig | None = None, start: Iterable[int] | None = None
) -> CduflSolution:
    """Local optimum over the open set of uncapacitated supply points.

    Capacitated points are always usable and never appear in moves.  Each
    candidate open set is priced by a fresh min-cost flow; facility costs are
    multiplied by ``config.sigma`` while searching and reported unscaled.
    """
    cfg = config or LocalSearchConfig()
    if not inst.is_feasible():
        raise InfeasibleError("CDUFL instance has no feasible solution")
    s0 = frozenset(range(inst.n_uncap) if start is None else start)
    price = lambda s: cdufl_price(inst, s, cfg.sigma)  # noqa: E731
    best, _, _ = _descend(s0, list(range(inst.n_uncap)), price, cfg)
    plan, _ = cdufl_best_assignment(inst, best)
    return cdufl_solution(inst, best, plan)


def cdufl_sqrt2(inst: CduflInstance, epsilon_ls: float = 1e-6) -> CduflSolution:
    return cdufl_local_search(inst, LocalSearchConfig(epsilon_ls=epsilon_ls, sigma=math.sqrt(2.0)))
