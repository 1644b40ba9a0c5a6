"""Exhaustive solvers for desk-scale LBFL, UFL and CDUFL instances.

Open sets are enumerated in Gray-code order.  Each candidate set is priced by
a rectangular assignment problem (scipy's ``linear_sum_assignment``) rather
than by the flow module, so the oracle and the heuristics share no pricing
code.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import (
    CduflInstance,
    CostBreakdown,
    InfeasibleError,
    LbflInstance,
    LbflSolution,
    UflInstance,
)

DEFAULT_CAP = 16
_TIE = 1e-9


class OracleSizeError(ValueError):
    """Instance exceeds the configured enumeration cap."""


@dataclass
class OracleResult:
    costs: CostBreakdown
    open: frozenset
    solution: LbflSolution | None = None
    flows: dict = field(default_factory=dict)  # CDUFL only: (supply, demand) -> units
    subsets_tried: int = 0
    subsets_priced: int = 0

    @property
    def total(self) -> float:
        return self.costs.total


def _gray_subsets(n: int):
    """Yield (mask, element toggled) for every nonempty subset of range(n)."""
    prev = 0
    for k in range(1, 1 << n):
        g = k ^ (k >> 1)
        bit = (g ^ prev).bit_length() - 1
        prev = g
        yield g, bit


def _members(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def _better(cost, members, best_cost, best_members) -> bool:
    if best_members is None or cost < best_cost - _TIE:
        return True
    return abs(cost - best_cost) <= _TIE and members < best_members


def lsa_lower_bounded(conn: np.ndarray, open_set, M: int) -> tuple[float, list[int]]:
    """Min-cost assignment of every client (column of ``conn``) to an open
    facility with at least ``M`` clients each, as one square assignment:
    ``M`` reserved slots per open facility plus free slots priced at the
    nearest open facility."""
    S = sorted(open_set)
    n = conn.shape[1]
    k = len(S)
    if n < M * k or (n and not k):
        raise InfeasibleError("not enough clients for the lower bounds")
    if n == 0:
        return 0.0, []
    sub = conn[S]  # k x n
    nearest = np.argmin(sub, axis=0)
    free = sub[nearest, np.arange(n)]
    slots = [np.repeat(sub[r][:, None], M, axis=1) for r in range(k)]
    n_free = n - M * k
    cols = np.hstack(slots + [np.repeat(free[:, None], n_free, axis=1)])
    rows, chosen = linear_sum_assignment(cols)
    assign = [0] * n
    for j, c in zip(rows, chosen):
        assign[j] = S[c // M] if c < M * k else S[nearest[j]]
    return float(cols[rows, chosen].sum()), assign


def exact_lbfl(inst: LbflInstance, max_facilities: int = DEFAULT_CAP) -> OracleResult:
    nf, nc, M = inst.n_facilities, inst.n_clients, inst.M
    if nf > max_facilities:
        raise OracleSizeError(f"{nf} facilities exceed the oracle cap of {max_facilities}")
    if nc < M:
        raise InfeasibleError(f"{nc} clients < M={M}")
    if nf == 0:
        raise InfeasibleError("no facilities")
    f = inst.opening_costs
    conn = inst.conn
    best_cost, best_members, best_assign = np.inf, None, None
    tried = priced = 0
    fsum = 0.0
    for mask, bit in _gray_subsets(nf):
        fsum += f[bit] if mask >> bit & 1 else -f[bit]
        tried += 1
        members = _members(mask)
        if M * len(members) > nc:
            continue
        if fsum > best_cost + 1e-6:  # incremental sum; drift far below 1e-6
            continue
        fs = float(f[list(members)].sum())
        # UFL relaxation of the assignment is a valid lower bound
        lb = fs + float(conn[list(members)].min(axis=0).sum())
        if lb > best_cost + _TIE:
            continue
        ac, assign = lsa_lower_bounded(conn, members, M)
        priced += 1
        if _better(fs + ac, members, best_cost, best_members):
            best_cost, best_members, best_assign = fs + ac, members, assign
    sol = LbflSolution(best_members, best_assign)
    fc = float(f[list(best_members)].sum())
    ac = float(sum(conn[i, j] for j, i in enumerate(best_assign)))
    return OracleResult(CostBreakdown(fc, ac), frozenset(best_members), sol, {}, tried, priced)


def exact_ufl(inst: UflInstance, max_facilities: int = DEFAULT_CAP) -> OracleResult:
    nf = inst.n_facilities
    if nf > max_facilities:
        raise OracleSizeError(f"{nf} facilities exceed the oracle cap of {max_facilities}")
    if nf == 0:
        raise InfeasibleError("no facilities")
    f = inst.opening_costs
    conn = inst.conn
    best_cost, best_members = np.inf, None
    tried = 0
    for mask, _ in _gray_subsets(nf):
        tried += 1
        members = _members(mask)
        fs = float(f[list(members)].sum())
        if fs > best_cost + _TIE:
            continue
        c = fs + (float(conn[list(members)].min(axis=0).sum()) if inst.n_clients else 0.0)
        if _better(c, members, best_cost, best_members):
            best_cost, best_members = c, members
    idx = np.array(best_members)
    assign = idx[np.argmin(conn[idx], axis=0)].tolist() if inst.n_clients else []
    sol = LbflSolution(best_members, assign)
    fc = float(f[idx].sum())
    return OracleResult(CostBreakdown(fc, best_cost - fc), frozenset(best_members), sol, {}, tried, tried)


def lsa_cdufl(inst: CduflInstance, open_uncap) -> tuple[float, dict]:
    """Best assignment for a CDUFL open set via unit expansion of demands."""
    nu = inst.n_uncap
    sd = inst.supply_demand_dist
    units = [d for d in range(inst.n_demand) for _ in range(int(inst.demand[d]))]
    D = len(units)
    if D == 0:
        return 0.0, {}
    S = sorted(open_uncap)
    cap_cols = [nu + c for c in range(inst.n_cap) for _ in range(int(inst.capacity[c]))]
    if not S and len(cap_cols) < D:
        raise InfeasibleError("capacities cannot cover demand")
    blocks = [sd[cap_cols][:, units].T] if cap_cols else []
    if S:
        near = np.array(S)[np.argmin(sd[S][:, units], axis=0)]
        free = sd[near, units]
        blocks.append(np.repeat(free[:, None], D, axis=1))
    cols = np.hstack(blocks)
    rows, chosen = linear_sum_assignment(cols)
    flows: dict = {}
    for r, c in zip(rows, chosen):
        s = cap_cols[c] if c < len(cap_cols) else int(near[r])
        key = (s, units[r])
        flows[key] = flows.get(key, 0) + 1
    return float(cols[rows, chosen].sum()), flows


def exact_cdufl(inst: CduflInstance, max_uncap: int = DEFAULT_CAP) -> OracleResult:
    nu = inst.n_uncap
    if nu > max_uncap:
        raise OracleSizeError(f"{nu} uncapacitated points exceed the oracle cap of {max_uncap}")
    if not inst.is_feasible():
        raise InfeasibleError("CDUFL instance has no feasible solution")
    f = inst.uncap_cost
    best_cost, best_members, best_flows = np.inf, None, None
    tried = priced = 0

    def consider(members):
        nonlocal best_cost, best_members, best_flows, priced
        fs = float(f[list(members)].sum()) if members else 0.0
        if fs > best_cost + _TIE:
            return
        try:
            ac, flows = lsa_cdufl(inst, members)
        except InfeasibleError:
            return
        priced += 1
        if _better(fs + ac, members, best_cost, best_members):
            best_cost, best_members, best_flows = fs + ac, members, flows

    tried += 1
    consider(())
    for mask, _ in _gray_subsets(nu):
        tried += 1
        consider(_members(mask))
    fc = float(f[list(best_members)].sum()) if best_members else 0.0
    return OracleResult(
        CostBreakdown(fc, best_cost - fc), frozenset(best_members), None, best_flows, tried, priced
    )
