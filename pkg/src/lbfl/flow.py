"""Min-cost flow (successive shortest paths with potentials) and the
assignment subroutines built on it.

``min_cost_flow`` accepts arc lower bounds; they are removed with the usual
node-imbalance transformation and a super source/sink pair, so the
augmenting-path core only ever sees plain capacities.
"""

from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .model import TOL, InfeasibleError, LbflSolution, UflInstance

INF = None  # marker for uncapacitated arcs


class FlowInfeasible(InfeasibleError):
    def __init__(self, msg: str, max_flow: int):
        super().__init__(msg)
        self.max_flow = max_flow


@dataclass
class Arc:
    tail: int
    head: int
    cap: int | None
    cost: float
    lower: int = 0


@dataclass
class FlowNetwork:
    n_nodes: int
    source: int
    sink: int
    value: int
    arcs: list[Arc] = field(default_factory=list)

    def add_arc(self, tail: int, head: int, cap: int | None, cost: float, lower: int = 0) -> int:
        if cap is not None and (int(cap) != cap or cap < 0):
            raise ValueError(f"capacity must be a nonnegative integer, got {cap}")
        if int(lower) != lower or lower < 0 or (cap is not None and lower > cap):
            raise ValueError(f"bad lower bound {lower} for capacity {cap}")
        self.arcs.append(Arc(tail, head, None if cap is None else int(cap), float(cost), int(lower)))
        return len(self.arcs) - 1


@dataclass
class FlowResult:
    flow: list[int]
    cost: float


class _Residual:
    """Adjacency-list residual graph; arc ``e`` and ``e ^ 1`` are twins."""

    def __init__(self, n: int):
        self.n = n
        self.adj: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[float] = []

    def add(self, u: int, v: int, cap: int, cost: float) -> int:
        e = len(self.to)
        self.to += [v, u]
        self.cap += [cap, 0]
        self.cost += [cost, -cost]
        self.adj[u].append(e)
        self.adj[v].append(e + 1)
        return e

    def initial_potentials(self, s: int) -> list[float]:
        if all(c >= 0 for c, k in zip(self.cost, self.cap) if k > 0):
            return [0.0] * self.n
        # Bellman-Ford from s; unreachable nodes keep 0
        pot = [float("inf")] * self.n
        pot[s] = 0.0
        for _ in range(self.n):
            changed = False
            for u in range(self.n):
                if pot[u] == float("inf"):
                    continue
                for e in self.adj[u]:
                    if self.cap[e] > 0 and pot[u] + self.cost[e] < pot[self.to[e]] - 1e-12:
                        pot[self.to[e]] = pot[u] + self.cost[e]
                        changed = True
            if not changed:
                break
        else:
            raise ValueError("network has a negative-cost cycle")
        return [0.0 if p == float("inf") else p for p in pot]

    def ssp(self, s: int, t: int, need: int) -> tuple[int, float, list[float]]:
        pot = self.initial_potentials(s)
        sent, total = 0, 0.0
        while sent < need:
            dist = [float("inf")] * self.n
            prev = [-1] * self.n
            dist[s] = 0.0
            heap = [(0.0, s)]
            done = [False] * self.n
            while heap:
                d, u = heapq.heappop(heap)
                if done[u]:
                    continue
                done[u] = True
                pu = pot[u]
                for e in self.adj[u]:
                    if self.cap[e] <= 0:
                        continue
                    v = self.to[e]
                    if done[v]:
                        continue
                    rc = self.cost[e] + pu - pot[v]
                    if rc < 0.0:
                        rc = 0.0  # float noise only; potentials keep rc >= 0
                    nd = d + rc
                    if nd < dist[v]:
                        dist[v] = nd
                        prev[v] = e
                        heapq.heappush(heap, (nd, v))
            if not done[t]:
                break
            # unreached nodes shift by the largest label so that reduced
            # costs stay nonnegative on every residual arc
            dmax = max(dist[v] for v in range(self.n) if done[v])
            for v in range(self.n):
                pot[v] += dist[v] if done[v] else dmax
            push = need - sent
            v = t
            while v != s:
                e = prev[v]
                push = min(push, self.cap[e])
                v = self.to[e ^ 1]
            v = t
            while v != s:
                e = prev[v]
                self.cap[e] -= push
                self.cap[e ^ 1] += push
                total += push * self.cost[e]
                v = self.to[e ^ 1]
            sent += push
        return sent, total, pot

    def certify(self, pot: list[float], tol: float = TOL) -> None:
        """Nonnegative reduced costs on all residual arcs: no negative cycle."""
        for u in range(self.n):
            for e in self.adj[u]:
                if self.cap[e] <= 0:
                    continue
                v = self.to[e]
                scale = 1.0 + abs(self.cost[e]) + abs(pot[u]) + abs(pot[v])
                if self.cost[e] + pot[u] - pot[v] < -tol * scale:
                    raise AssertionError(f"negative reduced cost on residual arc {u}->{v}")


def min_cost_flow(net: FlowNetwork) -> FlowResult:
    """Integral min-cost flow of value ``net.value`` from source to sink.

    Raises ``FlowInfeasible`` (carrying the largest achievable value) when the
    required value or the arc lower bounds cannot be met.
    """
    n = net.n_nodes
    big = net.value + sum(a.lower for a in net.arcs) + sum(
        a.cap for a in net.arcs if a.cap is not None
    )
    excess = [0] * n
    excess[net.source] += net.value
    excess[net.sink] -= net.value
    base_cost = 0.0
    g = _Residual(n + 2)
    ss, tt = n, n + 1
    ids = []
    for a in net.arcs:
        cap = big if a.cap is None else a.cap
        ids.append(g.add(a.tail, a.head, cap - a.lower, a.cost))
        if a.lower:
            excess[a.tail] -= a.lower
            excess[a.head] += a.lower
            base_cost += a.lower * a.cost
    need = 0
    for v in range(n):
        if excess[v] > 0:
            g.add(ss, v, excess[v], 0.0)
            need += excess[v]
        elif excess[v] < 0:
            g.add(v, tt, -excess[v], 0.0)
    sent, cost, pot = g.ssp(ss, tt, need)
    if sent < need:
        # report the portion of the requested value that could be routed
        raise FlowInfeasible(
            f"required flow {net.value} infeasible: only {net.value - (need - sent)} routable",
            max(0, net.value - (need - sent)),
        )
    g.certify(pot)
    flow = []
    for a, e in zip(net.arcs, ids):
        cap = big if a.cap is None else a.cap
        f = a.lower + (cap - a.lower - g.cap[e])
        assert isinstance(f, int) and f >= 0
        flow.append(f)
    return FlowResult(flow=flow, cost=base_cost + cost)


# ---------------------------------------------------------------------------
# assignments


@dataclass
class Assignment:
    """Integral shipment plan ``units[(supplier, receiver)]``."""

    units: dict[tuple[int, int], int] = field(default_factory=dict)

    def add(self, s: int, r: int, x: int) -> None:
        if x:
            self.units[(s, r)] = self.units.get((s, r), 0) + int(x)

    def supplier_totals(self) -> dict[int, int]:
        out: dict[int, int] = defaultdict(int)
        for (s, _), x in self.units.items():
            out[s] += x
        return dict(out)

    def receiver_totals(self) -> dict[int, int]:
        out: dict[int, int] = defaultdict(int)
        for (_, r), x in self.units.items():
            out[r] += x
        return dict(out)

    def items(self):
        return sorted(self.units.items())


def lower_bounded_transport(
    cost: np.ndarray, supply: Iterable[int], open_set: Iterable[int], M: int
) -> tuple[Assignment, float]:
    """Ship every unit of ``supply[k]`` to some open receiver, each open
    receiver getting at least ``M`` units, at minimum total cost.

    ``cost[k, i]`` is the per-unit cost from source group ``k`` to receiver
    ``i``.  The receiver-to-sink arc is split into a mandatory ``M``-unit arc
    (lower bound = capacity = M) and an optional uncapacitated arc.
    """
    supply = [int(x) for x in supply]
    opened = sorted(set(int(i) for i in open_set))
    total = sum(supply)
    if not opened:
        if total:
            raise InfeasibleError("clients present but no facility open")
        return Assignment(), 0.0
    if total < M * len(opened):
        raise InfeasibleError(
            f"{total} clients cannot give {len(opened)} open facilities at least M={M} each"
        )
    K = len(supply)
    src, snk = 0, 1 + K + len(opened)
    net = FlowNetwork(n_nodes=snk + 1, source=src, sink=snk, value=total)
    arc_of = {}
    for k, s in enumerate(supply):
        if s == 0:
            continue
        net.add_arc(src, 1 + k, s, 0.0)
        for r, i in enumerate(opened):
            arc_of[net.add_arc(1 + k, 1 + K + r, s, float(cost[k, i]))] = (k, i)
    for r in range(len(opened)):
        net.add_arc(1 + K + r, snk, M, 0.0, lower=M)
        net.add_arc(1 + K + r, snk, INF, 0.0)
    res = min_cost_flow(net)
    plan = Assignment()
    for e, (k, i) in arc_of.items():
        plan.add(k, i, res.flow[e])
    return plan, res.cost


def assign_lower_bounded(inst: UflInstance, open_set: Iterable[int], M: int | None = None):
    """Cheapest assignment of all clients to ``open_set`` with >= M per facility.

    Returns ``(LbflSolution, cost)``; clients with identical cost columns are
    pooled into one flow source and handed out again in id order.
    """
    M = getattr(inst, "M", 1) if M is None else M
    opened = sorted(set(int(i) for i in open_set))
    conn = inst.conn
    groups: dict[bytes, list[int]] = {}
    for j in range(inst.n_clients):
        groups.setdefault(conn[:, j].tobytes(), []).append(j)
    members = list(groups.values())
    cost = np.stack([conn[:, js[0]] for js in members]) if members else np.zeros((0, inst.n_facilities))
    plan, total = lower_bounded_transport(cost, [len(js) for js in members], opened, M)
    assign = [-1] * inst.n_clients
    for k, js in enumerate(members):
        it = iter(js)
        for i in opened:
            for _ in range(plan.units.get((k, i), 0)):
                assign[next(it)] = i
    return LbflSolution(opened, assign), total


def cdufl_best_assignment(inst, open_uncap: Iterable[int]) -> tuple[Assignment, float]:
    """Cheapest way to serve all demand from the open uncapacitated points plus
    every capacitated point (those are always usable).

    Assignment keys are ``(supply point, demand point)`` in the instance's
    combined supply indexing (uncapacitated first, then capacitated).
    """
    opened = sorted(set(int(i) for i in open_uncap))
    nu, nc, nd = inst.n_uncap, inst.n_cap, inst.n_demand
    demand = [int(x) for x in inst.demand]
    total = sum(demand)
    if total == 0:
        return Assignment(), 0.0
    if not opened and sum(int(u) for u in inst.capacity) < total:
        raise InfeasibleError(
            f"no uncapacitated point open and capacities {int(sum(inst.capacity))} < demand {total}"
        )
    suppliers = opened + [nu + c for c in range(nc)]
    src = 0
    d0 = 1
    s0 = 1 + nd
    snk = s0 + len(suppliers)
    net = FlowNetwork(n_nodes=snk + 1, source=src, sink=snk, value=total)
    sd = inst.supply_demand_dist
    arc_of = {}
    for d in range(nd):
        if demand[d] == 0:
            continue
        net.add_arc(src, d0 + d, demand[d], 0.0)
        for r, s in enumerate(suppliers):
            arc_of[net.add_arc(d0 + d, s0 + r, demand[d], float(sd[s, d]))] = (s, d)
    for r, s in enumerate(suppliers):
        net.add_arc(s0 + r, snk, INF if s < nu else int(inst.capacity[s - nu]), 0.0)
    res = min_cost_flow(net)
    plan = Assignment()
    for e, (s, d) in arc_of.items():
        plan.add(s, d, res.flow[e])
    return plan, res.cost
