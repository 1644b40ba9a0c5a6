"""Instances, solutions and cost evaluation shared by every solver.

Point layout: an instance with ``nf`` facilities and ``nc`` clients carries a
dense ``(nf + nc) x (nf + nc)`` distance matrix with facilities first.  Ids
are dense integers per point class: facility ``i`` is row ``i``, client ``j``
is row ``nf + j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse.csgraph import csgraph_from_dense, shortest_path

TOL = 1e-9


class InfeasibleError(ValueError):
    """The instance admits no feasible solution (e.g. fewer clients than M)."""


class DanglingIdError(KeyError):
    """A solution refers to an id the instance does not have."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# metric utilities


@dataclass(frozen=True)
class MetricReport:
    symmetry: list[tuple[int, int]] = field(default_factory=list)
    diagonal: list[int] = field(default_factory=list)
    triangle: list[tuple[int, int]] = field(default_factory=list)
    negative: list[tuple[int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.symmetry or self.diagonal or self.triangle or self.negative)

    def __bool__(self) -> bool:  # truthy iff there is something to report
        return not self.ok


def validate_metric(dist, tol: float = TOL) -> MetricReport:
    """Check symmetry, zero diagonal and the triangle inequality.

    Triangle violations are reported once per unordered pair ``(p, q)`` with
    ``p < q`` whose direct distance exceeds some two-hop path by more than
    ``tol``.
    """
    d = np.asarray(dist, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {d.shape}")
    n = d.shape[0]
    neg = [tuple(map(int, x)) for x in np.argwhere(d < -tol)]
    diag = [int(i) for i in np.flatnonzero(np.abs(np.diag(d)) > tol)]
    asym = [(int(p), int(q)) for p, q in np.argwhere(np.abs(d - d.T) > tol) if p < q]
    tri = []
    if n:
        # best two-hop distance p -> k -> q for every pair
        two_hop = np.min(d[:, :, None] + d[None, :, :], axis=1)
        bad = d - two_hop > tol
        tri = [(int(p), int(q)) for p, q in np.argwhere(bad) if p < q]
    return MetricReport(symmetry=asym, diagonal=diag, triangle=tri, negative=neg)


def metric_completion(n_points: int, edges: Iterable[tuple[int, int, float]]) -> np.ndarray:
    """All-pairs shortest-path distances of an undirected weighted graph."""
    dense = np.full((n_points, n_points), np.inf)
    for p, q, c in edges:
        if c < 0:
            raise ValueError(f"negative edge weight on ({p}, {q})")
        c = float(c)
        if c < dense[p, q]:
            dense[p, q] = dense[q, p] = c
    # null_value=inf keeps zero-weight edges as real edges
    g = csgraph_from_dense(dense, null_value=np.inf)
    d = shortest_path(g, method="FW", directed=False)
    if np.isinf(d).any():
        p, q = np.argwhere(np.isinf(d))[0]
        raise ValueError(f"graph is disconnected: no path between {p} and {q}")
    return d


def euclidean(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


# ---------------------------------------------------------------------------
# instances and solutions


@dataclass(frozen=True)
class UflInstance:
    opening_costs: np.ndarray
    dist: np.ndarray
    n_clients: int

    def __post_init__(self):
        f = _frozen(self.opening_costs)
        d = _frozen(self.dist)
        object.__setattr__(self, "opening_costs", f)
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "n_clients", int(self.n_clients))
        n = f.shape[0] + self.n_clients
        if d.shape != (n, n):
            raise ValueError(f"dist must be {n}x{n} (facilities then clients), got {d.shape}")
        if (f < 0).any():
            raise ValueError("opening costs must be nonnegative")

    @property
    def n_facilities(self) -> int:
        return int(self.opening_costs.shape[0])

    @property
    def conn(self) -> np.ndarray:
        """Facility-by-client connection costs ``c[i, j]``."""
        nf = self.n_facilities
        return self.dist[:nf, nf:]

    def check_metric(self, tol: float = TOL) -> None:
        rep = validate_metric(self.dist, tol)
        if rep:
            raise ValueError(f"distances are not a metric: {rep}")

    def with_opening_costs(self, costs) -> "UflInstance":
        return UflInstance(np.asarray(costs, dtype=float), self.dist, self.n_clients)


@dataclass(frozen=True)
class LbflInstance(UflInstance):
    M: int = 1

    def __post_init__(self):
        super().__post_init__()
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"lower bound M must be a positive integer, got {self.M}")
        object.__setattr__(self, "M", int(self.M))

    def as_ufl(self, opening_costs=None) -> UflInstance:
        f = self.opening_costs if opening_costs is None else opening_costs
        return UflInstance(f, self.dist, self.n_clients)

    @classmethod
    def from_points(cls, opening_costs, facility_xy, client_xy, M: int) -> "LbflInstance":
        pts = np.vstack([np.asarray(facility_xy, float), np.asarray(client_xy, float)])
        return cls(np.asarray(opening_costs, float), euclidean(pts), len(client_xy), M=M)


@dataclass(frozen=True)
class CostBreakdown:
    facility_cost: float
    assignment_cost: float

    @property
    def total(self) -> float:
        return self.facility_cost + self.assignment_cost

    def as_dict(self) -> dict:
        return {
            "facility_cost": self.facility_cost,
            "assignment_cost": self.assignment_cost,
            "total": self.total,
        }


@dataclass(frozen=True)
class LbflSolution:
    """``assign[j]`` is the facility serving client ``j``."""

    open: frozenset
    assign: tuple

    def __init__(self, open: Iterable[int], assign: Sequence[int] | Mapping[int, int]):
        if isinstance(assign, Mapping):
            assign = [assign[j] for j in range(len(assign))]
        object.__setattr__(self, "open", frozenset(int(i) for i in open))
        object.__setattr__(self, "assign", tuple(int(i) for i in assign))

    def served_counts(self) -> dict[int, int]:
        counts = {i: 0 for i in self.open}
        for i in self.assign:
            counts[i] = counts.get(i, 0) + 1
        return counts


UflSolution = LbflSolution


def nearest_assignment(inst: UflInstance, open_set: Iterable[int]) -> LbflSolution:
    """Assign each client to its nearest open facility (lowest id on ties)."""
    idx = np.array(sorted(open_set), dtype=int)
    if idx.size == 0:
        if inst.n_clients:
            raise InfeasibleError("no open facility to serve clients")
        return LbflSolution([], [])
    sub = inst.conn[idx]
    best = idx[np.argmin(sub, axis=0)]
    return LbflSolution(idx.tolist(), best.tolist())


def _check_refs(inst: UflInstance, sol: LbflSolution) -> None:
    nf = inst.n_facilities
    for i in sol.open:
        if not 0 <= i < nf:
            raise DanglingIdError(f"open facility id {i} out of range 0..{nf - 1}")
    if len(sol.assign) != inst.n_clients:
        raise DanglingIdError(
            f"assignment covers {len(sol.assign)} clients, instance has {inst.n_clients}"
        )
    for i in sol.assign:
        if not 0 <= i < nf:
            raise DanglingIdError(f"assigned facility id {i} out of range 0..{nf - 1}")


def evaluate(inst: UflInstance, sol: LbflSolution) -> CostBreakdown:
    """Opening cost of ``sol.open`` plus connection cost of ``sol.assign``.

    Feasibility is not checked here; see :func:`check_feasible`.
    """
    _check_refs(inst, sol)
    fc = float(sum(inst.opening_costs[i] for i in sorted(sol.open)))
    conn = inst.conn
    ac = float(sum(conn[i, j] for j, i in enumerate(sol.assign)))
    return CostBreakdown(fc, ac)


evaluate_lbfl = evaluate


def check_feasible(inst: LbflInstance, sol: LbflSolution) -> tuple[bool, list[str]]:
    """True iff every client is served by an open facility serving >= M clients."""
    problems = []
    nf = inst.n_facilities
    if len(sol.assign) != inst.n_clients:
        problems.append(f"{inst.n_clients - len(sol.assign)} clients unassigned")
    for j, i in enumerate(sol.assign):
        if i not in sol.open:
            problems.append(f"client {j} assigned to closed facility {i}")
    if inst.n_clients and not sol.open:
        problems.append("no facility open")
    counts = sol.served_counts()
    for i in sorted(sol.open):
        if not 0 <= i < nf:
            problems.append(f"open facility {i} does not exist")
        elif counts.get(i, 0) < inst.M:
            problems.append(f"facility {i} serves {counts.get(i, 0)} < M={inst.M} clients")
    return (not problems, problems)


@dataclass(frozen=True)
class CduflInstance:
    """Capacity-discounted UFL: every supply point is either uncapacitated
    with an opening cost, or capacitated with zero opening cost.

    ``dist`` covers all points ordered uncapacitated, capacitated, demand.
    ``location`` optionally tags each point with the aggregated-instance
    location it was built from.
    """

    uncap_cost: np.ndarray
    capacity: np.ndarray
    demand: np.ndarray
    dist: np.ndarray
    location: np.ndarray | None = None

    def __post_init__(self):
        f = _frozen(self.uncap_cost)
        u = _frozen(self.capacity, dtype=np.int64)
        dm = _frozen(self.demand, dtype=np.int64)
        object.__setattr__(self, "uncap_cost", f)
        object.__setattr__(self, "capacity", u)
        object.__setattr__(self, "demand", dm)
        object.__setattr__(self, "dist", _frozen(self.dist))
        if self.location is not None:
            object.__setattr__(self, "location", _frozen(self.location, dtype=np.int64))
        n = f.size + u.size + dm.size
        if self.dist.shape != (n, n):
            raise ValueError(f"dist must be {n}x{n}, got {self.dist.shape}")
        if (f < 0).any() or (u < 0).any() or (dm < 0).any():
            raise ValueError("costs, capacities and demands must be nonnegative")

    @property
    def n_uncap(self) -> int:
        return int(self.uncap_cost.size)

    @property
    def n_cap(self) -> int:
        return int(self.capacity.size)

    @property
    def n_supply(self) -> int:
        return self.n_uncap + self.n_cap

    @property
    def n_demand(self) -> int:
        return int(self.demand.size)

    @property
    def total_demand(self) -> int:
        return int(self.demand.sum())

    @property
    def supply_demand_dist(self) -> np.ndarray:
        ns = self.n_supply
        return self.dist[:ns, ns:]

    def is_feasible(self) -> bool:
        return self.n_uncap > 0 or int(self.capacity.sum()) >= self.total_demand

    def scaled(self, sigma: float) -> "CduflInstance":
        return CduflInstance(self.uncap_cost * sigma, self.capacity, self.demand, self.dist, self.location)
