"""Instance generators: random planar instances, the locality-gap families
for add/drop/swap search on LBFL, and the CDUFL integrality-gap instance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .bicriteria import breakpoint
from .flow import assign_lower_bounded
from .local_search import LocalSearchConfig, Move, _descend, improving_moves, neighborhood
from .model import (
    CduflInstance,
    InfeasibleError,
    LbflInstance,
    LbflSolution,
    check_feasible,
    euclidean,
    evaluate,
    metric_completion,
)

DEFAULT_EPS = 1e-3


@dataclass
class GalleryInstance:
    name: str
    instance: LbflInstance | CduflInstance
    local_opt: LbflSolution | None = None
    global_opt: LbflSolution | None = None
    expected_ratio: float | None = None
    lp_value: float | None = None
    integral_value: float | None = None
    params: dict = field(default_factory=dict)

    def ratio(self) -> float:
        """Cost of the designated local optimum over the designated optimum."""
        return evaluate(self.instance, self.local_opt).total / evaluate(self.instance, self.global_opt).total


# ---------------------------------------------------------------------------
# random instances


def gen_random(
    seed: int, n_f: int, n_d: int, M: int, cost_range: tuple[float, float] = (0.0, 1.0)
) -> LbflInstance:
    """Facilities and clients uniform in the unit square, Euclidean metric."""
    if n_d < M:
        raise InfeasibleError(f"{n_d} clients < M={M}")
    if n_f < 1:
        raise ValueError("need at least one facility")
    lo, hi = cost_range
    if not 0 <= lo <= hi:
        raise ValueError("cost_range must satisfy 0 <= low <= high")
    rng = np.random.default_rng(seed)
    fxy = rng.random((n_f, 2))
    cxy = rng.random((n_d, 2))
    costs = rng.uniform(lo, hi, n_f) if hi > lo else np.full(n_f, float(lo))
    return LbflInstance.from_points(costs, fxy, cxy, M)


def gen_random_cdufl(
    seed: int,
    max_uncap: int = 6,
    max_cap: int = 3,
    max_units: int = 12,
    cost_range: tuple[float, float] = (0.0, 1.0),
) -> CduflInstance:
    """Small planar CDUFL instance; always feasible (at least one
    uncapacitated point)."""
    rng = np.random.default_rng(seed)
    nu = int(rng.integers(1, max_uncap + 1))
    nc = int(rng.integers(0, max_cap + 1))
    units = int(rng.integers(1, max_units + 1))
    nd = int(rng.integers(1, min(units, 6) + 1))
    # split the units over the demand points, each getting at least one
    cuts = np.sort(rng.choice(np.arange(1, units), nd - 1, replace=False)) if nd > 1 else np.array([], int)
    demand = np.diff(np.concatenate([[0], cuts, [units]])).astype(np.int64)
    capacity = rng.integers(1, 5, nc).astype(np.int64)
    dist = euclidean(rng.random((nu + nc + nd, 2)))
    return CduflInstance(rng.uniform(*cost_range, nu), capacity, demand, dist)


# ---------------------------------------------------------------------------
# locality-gap families


def gen_locality_star(M: int, eps: float = DEFAULT_EPS, alpha: float | None = None) -> GalleryInstance:
    """Hub o plus spokes s_1..s_M, each spoke owning a group of clients at
    distance M (distance 1 from the hub).  With ``alpha`` each group has
    ceil(alpha*M) clients and that count becomes the lower bound."""
    if M < 2:
        raise ValueError("M must be at least 2")
    if not eps > 0:
        raise ValueError("eps must be positive")
    m = M if alpha is None else breakpoint(alpha, M)
    n_fac = M + 1
    n_cli = M * m
    edges = []
    for g in range(M):
        for t in range(m):
            j = n_fac + g * m + t
            edges.append((0, j, 1.0))
            edges.append((1 + g, j, float(M)))
    dist = metric_completion(n_fac + n_cli, edges)
    costs = np.array([M * M + eps] + [float(M)] * M)
    inst = LbflInstance(costs, dist, n_cli, M=m)
    spokes = LbflSolution(range(1, n_fac), [1 + j // m for j in range(n_cli)])
    hub = LbflSolution([0], [0] * n_cli)
    local_cost = M * M + M * M * m
    opt_cost = M * M + eps + M * m
    return GalleryInstance(
        "star",
        inst,
        spokes,
        hub,
        expected_ratio=local_cost / opt_cost,
        params={"M": M, "eps": eps, "alpha": alpha, "group_size": m, "gap_floor": m / 2},
    )


def gen_locality_cycle(k: int, eps: float = DEFAULT_EPS) -> GalleryInstance:
    """Zero-cost facilities on a 4k-cycle o_r, j_2r, s_r, j_2r+1, ...; hub
    edges have length 1 and spoke edges length k - eps; M = 2."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return _bipartite_family(nx.cycle_graph(2 * k), 2, float(k), eps, "cycle", {"k": k, "eps": eps}, sort_clients=False)


def _bipartite_family(
    graph: nx.Graph, M: int, T: float, eps: float, name: str, params: dict, sort_clients: bool = True
) -> GalleryInstance:
    # vertices alternate o, s around the cycle; for general graphs the caller
    # supplies the split through the ``bipartite`` node attribute
    o_side = sorted(v for v, side in graph.nodes(data="bipartite", default=None) if side == 0)
    s_side = sorted(v for v, side in graph.nodes(data="bipartite", default=None) if side == 1)
    if not o_side and not s_side:
        o_side = sorted(v for v in graph if v % 2 == 0)
        s_side = sorted(v for v in graph if v % 2 == 1)
    idx = {v: r for r, v in enumerate(o_side)}
    idx.update({v: len(o_side) + r for r, v in enumerate(s_side)})
    n_fac = len(o_side) + len(s_side)
    clients = []
    for u, v in graph.edges():
        o, s = (u, v) if u in o_side else (v, u)
        clients.append((idx[s], idx[o]))
    if sort_clients:
        clients.sort()
    edges = []
    for c, (s, o) in enumerate(clients):
        edges.append((s, n_fac + c, T - eps))
        edges.append((o, n_fac + c, 1.0))
    dist = metric_completion(n_fac + len(clients), edges)
    inst = LbflInstance(np.zeros(n_fac), dist, len(clients), M=M)
    local = LbflSolution(range(len(o_side), n_fac), [s for s, _ in clients])
    opt = LbflSolution(range(len(o_side)), [o for _, o in clients])
    return GalleryInstance(name, inst, local, opt, expected_ratio=T - eps, params={**params, "M": M, "T": T})


def check_regular_bipartite(graph: nx.Graph, M: int, T: int) -> None:
    """Raise ValueError unless the graph is M-regular, bipartite, with girth >= T."""
    if graph.number_of_nodes() == 0:
        raise ValueError("graph is empty")
    degrees = {d for _, d in graph.degree()}
    if degrees != {M}:
        raise ValueError(f"graph is not {M}-regular (degrees {sorted(degrees)})")
    if not nx.is_bipartite(graph):
        raise ValueError("graph is not bipartite")
    girth = nx.girth(graph)
    if girth < T:
        raise ValueError(f"girth {girth} < required {T}")


def gen_locality_bipartite(graph: nx.Graph, T: int, eps: float = DEFAULT_EPS) -> GalleryInstance:
    """One client per edge (s, o) at distance T - eps from s and 1 from o.

    The graph needs girth at least 2T; with shorter cycles a single swap can
    reroute clients around a cycle more cheaply than T - eps, and the
    s-side solution stops being locally optimal (the Heawood graph, girth 6,
    is certified for T <= 3 and fails from T = 4).

    Node attribute ``bipartite`` (0 for the o side, 1 for the s side) fixes
    the split; without it a connected graph is split by 2-colouring.
    """
    degrees = {d for _, d in graph.degree()}
    if len(degrees) != 1:
        raise ValueError("graph is not regular")
    M = degrees.pop()
    check_regular_bipartite(graph, M, 2 * T)
    g = graph.copy()
    if any(side is None for _, side in g.nodes(data="bipartite", default=None)):
        if not nx.is_connected(g):
            raise ValueError("disconnected graph needs an explicit 'bipartite' node attribute")
        colour = nx.bipartite.color(g)
        first = min(g)
        nx.set_node_attributes(g, {v: 0 if colour[v] == colour[first] else 1 for v in g}, "bipartite")
    return _bipartite_family(g, M, float(T), eps, "bipartite", {"eps": eps, "girth": nx.girth(g)})


# ---------------------------------------------------------------------------
# CDUFL integrality gap


def gen_cdufl_gap(f: float, u: int) -> GalleryInstance:
    """One costed uncapacitated point, one capacity-u free point and u + 1
    unit clients, all at the same location."""
    if not f > 0:
        raise ValueError("f must be positive")
    if u < 1:
        raise ValueError("u must be at least 1")
    inst = CduflInstance(
        uncap_cost=np.array([float(f)]),
        capacity=np.array([u], dtype=np.int64),
        demand=np.array([u + 1], dtype=np.int64),
        dist=np.zeros((3, 3)),
    )
    lp = f / (u + 1)
    return GalleryInstance(
        "cdufl_gap", inst, expected_ratio=u + 1, lp_value=lp, integral_value=float(f), params={"f": f, "u": u}
    )


# ---------------------------------------------------------------------------
# naive local search on LBFL


@dataclass
class NaiveSearchResult:
    solution: LbflSolution
    cost: float
    moves: list[Move]
    improving: list[tuple[Move, float]]  # empty: certified local optimum
    scanned: int

    @property
    def certified(self) -> bool:
        return not self.improving


def lbfl_price(inst: LbflInstance, open_set) -> float:
    """Opening plus best lower-bounded assignment cost; inf when infeasible."""
    opened = sorted(open_set)
    if not opened or inst.M * len(opened) > inst.n_clients:
        return math.inf
    _, cost = assign_lower_bounded(inst, opened)
    return float(inst.opening_costs[opened].sum() + cost)


def naive_lbfl_local_search(
    inst: LbflInstance, initial: LbflSolution, epsilon_ls: float = 1e-12, max_iterations: int = 1000
) -> NaiveSearchResult:
    """Add/drop/swap descent over open sets, each priced by the optimal
    lower-bounded assignment.  Moves that break feasibility are priced at
    infinity and so never taken."""
    ok, problems = check_feasible(inst, initial)
    if not ok:
        raise InfeasibleError(f"initial solution infeasible: {problems}")
    cache: dict[frozenset, float] = {}

    def price(s: frozenset) -> float:
        if s not in cache:
            cache[s] = lbfl_price(inst, s)
        return cache[s]

    cands = list(range(inst.n_facilities))
    cfg = LocalSearchConfig(epsilon_ls=epsilon_ls, max_iterations=max_iterations)
    best, cost, trace = _descend(frozenset(initial.open), cands, price, cfg)
    # certificate threshold matches the descent's acceptance rule
    threshold = max(epsilon_ls * cost / max(1, len(cands)), 1e-12)
    improving = improving_moves(best, cands, price, threshold)
    scanned = sum(1 for _ in neighborhood(best, cands))
    if trace.moves:
        sol, _ = assign_lower_bounded(inst, best)
    else:
        sol = initial
    return NaiveSearchResult(sol, cost, trace.moves, improving, scanned)
