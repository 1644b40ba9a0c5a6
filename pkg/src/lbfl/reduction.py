"""Aggregated instance I2, its CDUFL encoding, and the three-phase mapping of
a CDUFL solution back to a client-transfer plan in which every location ends
with zero or at least M clients.

Terminology used below: a *location* is an open facility of the bicriteria
solution; ``n[i]`` clients sit there initially and ``N[i]`` tracks the
current count while transfers are applied.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .bicriteria import BicriteriaSolution, breakpoint
from .flow import lower_bounded_transport
from .local_search import (
    CduflSolution,
    LocalSearchConfig,
    cdufl_local_search,
    cdufl_solution,
)
from .flow import Assignment
from .model import TOL, CduflInstance, InfeasibleError, LbflInstance, LbflSolution

log = logging.getLogger(__name__)


class StructuralError(RuntimeError):
    """A phase met a configuration its construction does not cover."""


class PhaseInvariantError(AssertionError):
    pass


# ---------------------------------------------------------------------------
# aggregated instance


@dataclass(frozen=True)
class AggregatedInstance:
    locations: tuple[int, ...]  # original facility ids
    n: tuple[int, ...]
    dist: np.ndarray  # location x location
    M: int
    back_map: tuple[tuple[int, ...], ...]  # original client ids per location

    @property
    def size(self) -> int:
        return len(self.locations)

    @property
    def n_clients(self) -> int:
        return int(sum(self.n))

    def nearest_other(self, i: int) -> int:
        """Closest other location, lowest id on ties."""
        d = self.dist[i].copy()
        d[i] = np.inf
        return int(np.argmin(d))

    def l(self, i: int) -> float:
        return float(self.dist[i, self.nearest_other(i)])

    def as_lbfl(self) -> LbflInstance:
        """Zero-cost LBFL view with each location's clients co-located there."""
        idx = list(range(self.size)) + [a for a in range(self.size) for _ in range(self.n[a])]
        return LbflInstance(np.zeros(self.size), self.dist[np.ix_(idx, idx)], self.n_clients, M=self.M)


def build_i2(inst: LbflInstance, b: BicriteriaSolution) -> AggregatedInstance:
    locs = tuple(sorted(b.solution.open))
    pos = {f: a for a, f in enumerate(locs)}
    members: list[list[int]] = [[] for _ in locs]
    for j, i in enumerate(b.solution.assign):
        members[pos[i]].append(j)
    d = inst.dist[np.ix_(locs, locs)].copy()
    d.setflags(write=False)
    return AggregatedInstance(
        locations=locs,
        n=tuple(len(m) for m in members),
        dist=d,
        M=inst.M,
        back_map=tuple(tuple(m) for m in members),
    )


def build_cdufl(i2: AggregatedInstance, delta: float) -> CduflInstance:
    """One uncapacitated point per location costing delta*min(n, M)*l(i);
    a zero-cost point of capacity n - M where n > M; a demand point of
    M - n where n < M.  Every point inherits its location's distances."""
    if i2.size < 2:
        raise StructuralError("single-location instance has no nearest neighbour; open it directly")
    if delta <= 0:
        raise ValueError("delta must be positive")
    M = i2.M
    L = i2.size
    cost = [delta * min(i2.n[i], M) * i2.l(i) for i in range(L)]
    cap_loc = [i for i in range(L) if i2.n[i] > M]
    dem_loc = [i for i in range(L) if i2.n[i] < M]
    loc = list(range(L)) + cap_loc + dem_loc
    return CduflInstance(
        uncap_cost=np.array(cost),
        capacity=np.array([i2.n[i] - M for i in cap_loc], dtype=np.int64),
        demand=np.array([M - i2.n[i] for i in dem_loc], dtype=np.int64),
        dist=i2.dist[np.ix_(loc, loc)],
        location=np.array(loc),
    )


# ---------------------------------------------------------------------------
# I2 solutions


@dataclass
class I2Solution:
    """``transfer[a, b]``: clients originally at location a that end at b."""

    transfer: np.ndarray

    @property
    def counts(self) -> np.ndarray:
        return self.transfer.sum(axis=0)

    @property
    def open(self) -> frozenset:
        return frozenset(int(i) for i in np.flatnonzero(self.counts > 0))

    def cost(self, i2: AggregatedInstance) -> float:
        return float((self.transfer * i2.dist).sum())

    def validate(self, i2: AggregatedInstance) -> None:
        if not np.array_equal(self.transfer.sum(axis=1), np.array(i2.n)):
            raise PhaseInvariantError("transfer plan does not conserve clients")
        bad = [i for i, c in enumerate(self.counts) if 0 < c < i2.M]
        if bad:
            raise PhaseInvariantError(f"locations left with 0 < N < M: {bad}")


def identity_plan(i2: AggregatedInstance) -> I2Solution:
    return I2Solution(np.diag(np.array(i2.n, dtype=np.int64)))


# ---------------------------------------------------------------------------
# normalisation of a CDUFL solution built from I2


def _loc(inst: CduflInstance) -> np.ndarray:
    if inst.location is None:
        raise ValueError("normalisation needs location tags (build the instance with build_cdufl)")
    return inst.location


def normalize_cdufl_solution(inst: CduflInstance, s: CduflSolution) -> CduflSolution:
    """Reroute a feasible solution, never raising its cost, so that

    * a demand point whose co-located supply point is open is served by it
      entirely;
    * every demand point draws its uncapacitated supply from one point, the
      nearest open one;
    * a capacitated point is saturated whenever the co-located uncapacitated
      point is open;
    * open uncapacitated points that ship nothing are closed.
    """
    loc = _loc(inst)
    nu, ns = inst.n_uncap, inst.n_supply
    sd = inst.supply_demand_dist
    units = {k: v for k, v in s.assignment.units.items() if v}
    opened = set(s.open_uncap)
    uncap_at = {int(loc[i]): i for i in range(nu)}

    for d in range(inst.n_demand):
        dl = int(loc[ns + d])
        own = uncap_at.get(dl)
        incoming = {sp: x for (sp, dd), x in units.items() if dd == d}
        if own is not None and own in opened:
            target, movable = own, incoming
        else:
            movable = {sp: x for sp, x in incoming.items() if sp < nu}
            if not movable:
                continue
            target = min(sorted(opened), key=lambda i: (sd[i, d], i))
        moved = 0
        for sp, x in movable.items():
            if sp == target:
                continue
            units.pop((sp, d))
            moved += x
        if moved:
            units[(target, d)] = units.get((target, d), 0) + moved

    for c in range(inst.n_cap):
        cp = nu + c
        u = uncap_at.get(int(loc[cp]))
        if u is None or u not in opened:
            continue
        room = int(inst.capacity[c]) - sum(x for (sp, _), x in units.items() if sp == cp)
        for (sp, d) in sorted(k for k in units if k[0] == u):
            if room <= 0:
                break
            x = min(room, units[(sp, d)])
            units[(sp, d)] -= x
            if not units[(sp, d)]:
                del units[(sp, d)]
            units[(cp, d)] = units.get((cp, d), 0) + x
            room -= x

    shipping = {sp for (sp, _), x in units.items() if x}
    opened = {i for i in opened if i in shipping}
    out = cdufl_solution(inst, opened, Assignment(dict(sorted(units.items()))))
    if out.total > s.total + TOL * max(1.0, abs(s.total)):
        raise PhaseInvariantError(f"normalisation raised cost {s.total} -> {out.total}")
    return out


# ---------------------------------------------------------------------------
# phases


@dataclass
class PhaseState:
    i2: AggregatedInstance
    alpha: float
    N: np.ndarray
    comp: np.ndarray  # comp[b, a]: clients originally from a now at b
    ship: np.ndarray  # uncapacitated shipments, location -> location
    capship: np.ndarray  # capacitated shipments, location -> location
    open_loc: frozenset
    hop_cost: float = 0.0
    X: np.ndarray | None = None
    classes: dict[int, str] = field(default_factory=dict)
    components: list[dict] = field(default_factory=list)
    events: list[str] = field(default_factory=list)
    moves: list[tuple[int, int, int, str]] = field(default_factory=list)

    @property
    def M(self) -> int:
        return self.i2.M

    def move(self, a: int, b: int, x: int, why: str) -> None:
        x = int(x)
        if x == 0 or a == b:
            return
        if not 0 < x <= self.N[a]:
            raise PhaseInvariantError(f"{why}: cannot move {x} clients from {a} holding {self.N[a]}")
        left = x
        for origin in range(self.i2.size):
            take = min(left, int(self.comp[a, origin]))
            if take:
                self.comp[a, origin] -= take
                self.comp[b, origin] += take
                left -= take
            if not left:
                break
        self.N[a] -= x
        self.N[b] += x
        self.hop_cost += x * float(self.i2.dist[a, b])
        self.moves.append((a, b, x, why))

    def members(self, cls: str) -> list[int]:
        return sorted(i for i, c in self.classes.items() if c == cls)

    def plan(self) -> I2Solution:
        return I2Solution(self.comp.T.copy())


def init_state(i2: AggregatedInstance, inst: CduflInstance, s: CduflSolution, alpha: float) -> PhaseState:
    loc = _loc(inst)
    nu, ns = inst.n_uncap, inst.n_supply
    L = i2.size
    ship = np.zeros((L, L), dtype=np.int64)
    capship = np.zeros((L, L), dtype=np.int64)
    for (sp, d), x in s.assignment.units.items():
        a, b = int(loc[sp]), int(loc[ns + d])
        (ship if sp < nu else capship)[a, b] += x
    n = np.array(i2.n, dtype=np.int64)
    return PhaseState(
        i2=i2,
        alpha=alpha,
        N=n.copy(),
        comp=np.diag(n),
        ship=ship,
        capship=capship,
        open_loc=frozenset(int(loc[i]) for i in s.open_uncap),
    )


def phase_a1(st: PhaseState) -> PhaseState:
    """Capacitated shipments become transfers; then classify locations."""
    L = st.i2.size
    for i in range(L):
        for j in range(L):
            if st.capship[i, j]:
                st.move(i, j, st.capship[i, j], "A1 capacitated")
    st.X = np.array([st.ship[i].sum() - st.ship[i, i] for i in range(L)], dtype=np.int64)
    for i in range(L):
        if i not in st.open_loc:
            st.classes[i] = "B"
        elif st.N[i] < st.X[i]:
            st.classes[i] = "G"
        else:
            # includes open points that only serve their own demand (X = 0)
            st.classes[i] = "R"
    return st


def _analyze(nodes: set[int], parent: dict[int, int | None]) -> dict:
    """Root structure, children and depth of one forest component."""
    cycle = []
    roots = []
    for u in nodes:
        p = parent.get(u)
        if p is None:
            roots.append(u)
        elif parent.get(p) == u:
            cycle.append(u)
    if roots and cycle or len(roots) > 1 or (not roots and len(cycle) != 2):
        raise PhaseInvariantError(f"component {sorted(nodes)} is not a tree or 2-cycle rooted tree")
    tops = sorted(roots or cycle)
    children: dict[int, list[int]] = {u: [] for u in nodes}
    for u in nodes:
        p = parent.get(u)
        if p is not None and u not in cycle:
            children[p].append(u)
    depth, order = {}, []
    stack = [(t, 0) for t in tops]
    while stack:
        u, dpt = stack.pop()
        depth[u] = dpt
        order.append(u)
        stack.extend((c, dpt + 1) for c in children[u])
    if len(order) != len(nodes):
        raise PhaseInvariantError("forest component has unreachable nodes")
    return {"type": "tree" if roots else "cycle", "tops": tops, "children": children, "depth": depth, "order": order}


def _subtree_sums(info: dict, N: np.ndarray) -> dict[int, int]:
    sub = {}
    for u in reversed(info["order"]):
        sub[u] = int(N[u]) + sum(sub[c] for c in info["children"][u])
    return sub


def _subtree_nodes(info: dict, u: int) -> set[int]:
    out, stack = set(), [u]
    while stack:
        v = stack.pop()
        out.add(v)
        stack.extend(info["children"][v])
    return out


def forest_components(st: PhaseState) -> list[dict]:
    """Nearest-neighbour forest over F^R, cut so that each final component
    is a tree whose non-root subtrees hold fewer than M residual clients,
    or a 2-cycle-rooted tree holding fewer than M in total."""
    M = st.M
    R = st.members("R")
    parent: dict[int, int | None] = {i: st.i2.nearest_other(i) for i in R}
    nodes_all = set(R) | set(parent.values())
    # connected components through arcs
    adj: dict[int, set[int]] = {u: set() for u in nodes_all}
    for u, p in parent.items():
        adj[u].add(p)
        adj[p].add(u)
    seen: set[int] = set()
    work = []
    for u in sorted(nodes_all):
        if u in seen:
            continue
        comp, stack = set(), [u]
        while stack:
            v = stack.pop()
            if v in comp:
                continue
            comp.add(v)
            stack.extend(adj[v])
        seen |= comp
        work.append(comp)

    final: list[set[int]] = []
    while work:
        comp = work.pop(0)
        info = _analyze(comp, parent)
        sub = _subtree_sums(info, st.N)
        total = int(sum(st.N[u] for u in comp))
        if total < M:
            final.append(comp)
            continue
        if info["type"] == "tree":
            r = info["tops"][0]
            if all(sub[c] < M for c in info["children"][r]):
                final.append(comp)
                continue
            cand = [u for u in comp if u != r and sub[u] >= M]
        else:
            cand = [u for u in comp if sub[u] >= M]
        if not cand:
            # 2-cycle whose halves each hold < M; converted below
            final.append(comp)
            continue
        u = min(cand, key=lambda v: (-info["depth"][v], v))
        if u not in info["tops"] or info["type"] == "tree":
            parent[u] = None
            piece = _subtree_nodes(info, u)
            final.append(piece)
            rest = comp - piece
            if rest:
                work.insert(0, rest)
        else:
            other = info["tops"][0] if info["tops"][1] == u else info["tops"][1]
            parent[u] = None
            if sub[other] >= M:
                parent[other] = None
                piece = _subtree_nodes(info, other)
                final.append(comp - piece)
                final.append(piece)
            else:
                final.append(comp)

    out = []
    for comp in final:
        info = _analyze(comp, parent)
        total = int(sum(st.N[u] for u in comp))
        if info["type"] == "cycle" and total >= M:
            hi = max(info["tops"])
            parent[hi] = None
            st.events.append(f"A2: 2-cycle {info['tops']} holds {total} >= M, rooted at {hi}")
            info = _analyze(comp, parent)
        out.append({"nodes": sorted(comp), "type": info["type"], "tops": info["tops"]})
    return sorted(out, key=lambda c: c["nodes"])


def phase_a2(st: PhaseState) -> PhaseState:
    """Direct shipments from F^R, then the forest consolidation of the
    residual clients left at F^R locations."""
    L = st.i2.size
    R = st.members("R")
    for i in R:
        for j in range(L):
            if j != i and st.ship[i, j]:
                st.move(i, j, st.ship[i, j], "A2 direct")
    comps = forest_components(st)
    st.components = comps
    B = st.members("B")
    for c in comps:
        if c["type"] == "tree":
            r = c["tops"][0]
            for i in c["nodes"]:
                if i != r and st.N[i]:
                    st.move(i, r, st.N[i], "A2 tree")
        else:
            r, r2 = c["tops"]
            if not B:
                raise StructuralError(f"2-cycle component {c['nodes']} needs a location outside F^R, none exists")
            d = st.i2.dist
            target = min(B, key=lambda b: (min(d[b, r], d[b, r2]), b))
            for i in c["nodes"]:
                if st.N[i]:
                    st.move(i, target, st.N[i], "A2 cycle fallback")
    bad = [i for i in R if 0 < st.N[i] < st.M]
    if bad:
        raise PhaseInvariantError(f"after A2, F^R locations with 0 < N < M: {bad}")
    return st


def a3_case2_plan(N: list[int], M: int):
    """Transfers for one deficient cluster.

    ``N[0]`` is the supplying location, ``N[1:]`` its deficient demand
    locations sorted by distance.  Returns ``(ell, transfers, residual)`` where
    transfers are ``(src, dst, units)`` index triples filling every index above
    ``ell`` to M (sources drained from ``ell`` down to 0), and ``residual``
    moves what is left at indices 0 and 1 to ``ell + 1``.
    """
    t = len(N) - 1
    Y = [0] + [M - x for x in N[1:]]
    ell = t - sum(N) // M
    need = sum(Y[ell + 1 :])
    have = sum(N[: ell + 1])
    if not (1 <= ell < t and need <= have < need + M):
        raise PhaseInvariantError(f"index rule fails: ell={ell}, t={t}, need={need}, have={have}")
    left = list(N)
    transfers = []
    src = ell
    for q in range(ell + 1, t + 1):
        want = Y[q]
        while want:
            while left[src] == 0:
                src -= 1
            x = min(want, left[src])
            transfers.append((src, q, x))
            left[src] -= x
            want -= x
    if any(left[r] for r in range(2, ell + 1)):
        raise PhaseInvariantError(f"residual outside the two nearest locations: {left[: ell + 1]}")
    if left[1] > M - N[0]:
        raise PhaseInvariantError(f"residual {left[1]} at the first demand location exceeds M - N0")
    residual = [(r, ell + 1, left[r]) for r in (0, 1) if left[r]]
    return ell, transfers, residual


def phase_a3(st: PhaseState) -> I2Solution:
    """Resolve each F^G location together with the deficient demand
    locations it satisfies."""
    M, d = st.M, st.i2.dist
    k = breakpoint(st.alpha, M)
    L = st.i2.size
    for i in st.members("G"):
        D = [j for j in range(L) if j != i and st.ship[i, j]]
        Dp = [j for j in D if st.N[j] < M]
        for j in [i] + D:
            if st.N[j] < k:
                raise PhaseInvariantError(f"A3 precondition: N[{j}]={st.N[j]} < ceil(alpha M)={k}")
        Y = {j: M - int(st.N[j]) for j in Dp}
        if sum(Y.values()) <= st.N[i]:
            x = {j: int(st.ship[i, j]) for j in Dp}
            amounts = x if sum(x.values()) <= st.N[i] else Y
            for j in Dp:
                st.move(i, j, amounts[j], "A3 case 1")
            if 0 < st.N[i] < M:
                full = [j for j in D if st.N[j] >= M]
                if not full:
                    st.events.append(f"A3: no member of D({i}) holds M clients; using nearest")
                pool = full or D
                target = min(pool, key=lambda j: (d[i, j], j))
                st.move(i, target, st.N[i], "A3 case 1 residual")
        else:
            seq = [i] + sorted(Dp, key=lambda j: (d[i, j], j))
            ell, transfers, residual = a3_case2_plan([int(st.N[j]) for j in seq], M)
            for a, b, x in transfers + residual:
                st.move(seq[a], seq[b], x, "A3 case 2")
    sol = st.plan()
    sol.validate(st.i2)
    return sol


# ---------------------------------------------------------------------------
# driver


def i2_cost_bound(F_S: float, C_S: float, delta: float, alpha: float) -> float:
    return F_S / (delta * alpha) + C_S * (1.0 / alpha + 2.0 * alpha / (2.0 * alpha - 1.0))


@dataclass
class I2Result:
    solution: I2Solution  # best plan (after flow repair)
    constructive: I2Solution
    cost: float
    constructive_cost: float
    hop_cost: float
    bound: float | None
    cdufl: CduflInstance | None = None
    raw: CduflSolution | None = None
    normalized: CduflSolution | None = None
    state: PhaseState | None = None
    events: list[str] = field(default_factory=list)

    @property
    def bound_holds(self) -> bool:
        return self.bound is None or self.constructive_cost <= self.bound + 1e-6


def repair_plan(i2: AggregatedInstance, open_set) -> I2Solution:
    """Optimal reassignment of all aggregated clients to ``open_set``."""
    plan, _ = lower_bounded_transport(i2.dist, i2.n, open_set, i2.M)
    T = np.zeros((i2.size, i2.size), dtype=np.int64)
    for (a, b), x in plan.units.items():
        T[a, b] += x
    return I2Solution(T)


def solve_i2(
    i2: AggregatedInstance,
    delta: float,
    alpha: float,
    config: LocalSearchConfig | None = None,
) -> I2Result:
    """Solve I2 through CDUFL local search and phases A1-A3, then
    re-optimise the transfers for the chosen open set."""
    if alpha <= 0.5:
        raise ValueError("alpha must exceed 1/2")
    if i2.n_clients < i2.M:
        raise InfeasibleError(f"{i2.n_clients} clients < M={i2.M}")
    if i2.size == 1:
        plan = identity_plan(i2)
        return I2Result(plan, plan, 0.0, 0.0, 0.0, None)
    inst = build_cdufl(i2, delta)
    raw = cdufl_local_search(inst, config)
    norm = normalize_cdufl_solution(inst, raw)
    st = init_state(i2, inst, norm, alpha)
    phase_a1(st)
    try:
        phase_a2(st)
    except StructuralError as exc:
        # no constructive certificate; fall back to the flow repair of the
        # locations already holding M clients
        log.warning("%s", exc)
        opened = [i for i in range(i2.size) if st.N[i] >= i2.M] or [int(np.argmax(st.N))]
        plan = repair_plan(i2, opened)
        c = plan.cost(i2)
        return I2Result(plan, plan, c, c, st.hop_cost, None, inst, raw, norm, st, st.events + [str(exc)])
    cons = phase_a3(st)
    cons_cost = cons.cost(i2)
    bound = i2_cost_bound(norm.facility_cost, norm.assignment_cost, delta, alpha)
    if cons_cost > bound + 1e-6:
        raise PhaseInvariantError(f"constructive I2 cost {cons_cost} exceeds the guarantee {bound}")
    rep = repair_plan(i2, cons.open)
    rep_cost = rep.cost(i2)
    if rep_cost > cons_cost + TOL * max(1.0, cons_cost):
        raise PhaseInvariantError("flow repair is worse than the plan it re-optimises")
    best, best_cost = (rep, rep_cost) if rep_cost < cons_cost else (cons, cons_cost)
    return I2Result(best, cons, best_cost, cons_cost, st.hop_cost, bound, inst, raw, norm, st, st.events)


def map_to_original(inst: LbflInstance, i2: AggregatedInstance, s: I2Solution) -> LbflSolution:
    """Open the I2 locations that keep clients and route every original
    client along its location's transfers (lowest client ids first)."""
    assign = [-1] * inst.n_clients
    for a in range(i2.size):
        clients = iter(i2.back_map[a])
        for b in range(i2.size):
            for _ in range(int(s.transfer[a, b])):
                assign[next(clients)] = i2.locations[b]
    opened = [i2.locations[b] for b in sorted(s.open)]
    return LbflSolution(opened, assign)
