"""Locality gaps of plain add/drop/swap search on LBFL and the CDUFL
integrality gap, for a range of family sizes."""

import argparse
from dataclasses import dataclass

import networkx as nx

from lbfl.gallery import gen_cdufl_gap, gen_locality_bipartite, gen_locality_cycle, gen_locality_star, naive_lbfl_local_search
from lbfl.local_search import cdufl_local_search
from lbfl.model import evaluate


@dataclass
class GapConfig:
    max_M: int = 8
    max_k: int = 8
    eps: float = 1e-3
    max_u: int = 6


def report(name, g):
    res = naive_lbfl_local_search(g.instance, g.local_opt)
    opt = evaluate(g.instance, g.global_opt).total
    print(f"{name:<14} local {res.cost:>10.4f}  opt {opt:>9.4f}  ratio {res.cost / opt:>8.4f}  certified {res.certified}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-M", type=int, default=GapConfig.max_M)
    ap.add_argument("--max-k", type=int, default=GapConfig.max_k)
    ap.add_argument("--eps", type=float, default=GapConfig.eps)
    ap.add_argument("--max-u", type=int, default=GapConfig.max_u)
    a = ap.parse_args(argv)
    cfg = GapConfig(a.max_M, a.max_k, a.eps, a.max_u)
    for M in range(2, cfg.max_M + 1):
        report(f"star M={M}", gen_locality_star(M, cfg.eps))
    for k in range(2, cfg.max_k + 1):
        report(f"cycle k={k}", gen_locality_cycle(k, cfg.eps))
    report("heawood T=3", gen_locality_bipartite(nx.heawood_graph(), 3, cfg.eps))
    for u in range(1, cfg.max_u + 1):
        g = gen_cdufl_gap(10.0, u)
        s = cdufl_local_search(g.instance)
        print(f"cdufl u={u:<6} integral {s.total:>7.4f}  lp {g.lp_value:>8.4f}  gap {s.total / g.lp_value:>7.4f}")


if __name__ == "__main__":
    main()
