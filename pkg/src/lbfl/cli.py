"""Command-line interface.

Exit codes: 0 success, 1 usage or schema error, 2 infeasible instance,
3 oracle size cap exceeded, 4 a bound check failed (``compare`` only).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .gallery import gen_cdufl_gap, gen_locality_cycle, gen_locality_star, gen_random, naive_lbfl_local_search
from .local_search import cdufl_local_search
from .model import InfeasibleError, LbflInstance, LbflSolution, evaluate, validate_metric
from .oracle import DEFAULT_CAP, OracleSizeError, exact_lbfl
from .pipeline import BoundViolation, PipelineConfig, solve

FORMAT = 1
EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_CAP, EXIT_CHECK = 0, 1, 2, 3, 4

log = logging.getLogger("lbfl")


class SchemaError(ValueError):
    pass


# ---------------------------------------------------------------------------
# instance files


def instance_from_json(doc: dict) -> tuple[LbflInstance, list, list]:
    """Parse an instance document; returns the instance and the external
    facility and client ids (in internal order)."""
    if not isinstance(doc, dict):
        raise SchemaError("instance must be a JSON object")
    if doc.get("format", FORMAT) != FORMAT:
        raise SchemaError(f"unsupported format {doc.get('format')!r}")
    for key in ("facilities", "clients", "M"):
        if key not in doc:
            raise SchemaError(f"missing field {key!r}")
    if ("points" in doc) == ("distances" in doc):
        raise SchemaError("exactly one of 'points' and 'distances' is required")
    try:
        fac_ids = [f["id"] for f in doc["facilities"]]
        costs = np.array([float(f["opening_cost"]) for f in doc["facilities"]])
        cli_ids = [c["id"] for c in doc["clients"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed facility or client record: {exc}") from None
    M = doc["M"]
    if not isinstance(M, int) or isinstance(M, bool) or M < 1:
        raise SchemaError("M must be a positive integer")
    ids = fac_ids + cli_ids
    if len(set(map(str, fac_ids))) != len(fac_ids) or len(set(map(str, cli_ids))) != len(cli_ids):
        raise SchemaError("duplicate ids")
    if not fac_ids:
        raise SchemaError("no facilities")
    if np.any(costs < 0) or not np.all(np.isfinite(costs)):
        raise SchemaError("opening costs must be finite and nonnegative")
    if "points" in doc:
        pts = doc["points"]
        try:
            xy = np.array([[float(v) for v in pts[str(i)]] for i in ids], dtype=float).reshape(len(ids), -1)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad or missing point: {exc}") from None
        diff = xy[:, None, :] - xy[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=-1))
    else:
        try:
            dist = np.array(doc["distances"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad distance matrix: {exc}") from None
        if dist.shape != (len(ids), len(ids)):
            raise SchemaError(f"distance matrix must be {len(ids)}x{len(ids)}, got {dist.shape}")
    report = validate_metric(dist)
    if report:
        raise SchemaError(f"distances are not a metric: {report}")
    return LbflInstance(costs, dist, len(cli_ids), M=M), fac_ids, cli_ids


def instance_to_json(inst: LbflInstance, fac_ids=None, cli_ids=None) -> dict:
    fac_ids = list(range(inst.n_facilities)) if fac_ids is None else fac_ids
    cli_ids = list(range(inst.n_facilities, inst.n_facilities + inst.n_clients)) if cli_ids is None else cli_ids
    return {
        "format": FORMAT,
        "M": int(inst.M),
        "facilities": [{"id": i, "opening_cost": float(c)} for i, c in zip(fac_ids, inst.opening_costs)],
        "clients": [{"id": j} for j in cli_ids],
        "distances": [[float(x) for x in row] for row in inst.dist],
    }


def read_instance(path: str):
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from None
    return instance_from_json(doc)


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def emit(doc, out: str | None) -> None:
    text = dumps(doc)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def digest(inst: LbflInstance) -> str:
    return hashlib.sha256(dumps(instance_to_json(inst)).encode()).hexdigest()


# ---------------------------------------------------------------------------
# reports


def solution_block(sol: LbflSolution, fac_ids, cli_ids) -> dict:
    return {
        "open": [fac_ids[i] for i in sorted(sol.open)],
        "assign": [[cli_ids[j], fac_ids[i]] for j, i in enumerate(sol.assign)],
    }


def solution_from_block(block: dict, fac_ids, cli_ids) -> LbflSolution:
    fpos = {str(f): i for i, f in enumerate(fac_ids)}
    cpos = {str(c): j for j, c in enumerate(cli_ids)}
    assign = [-1] * len(cli_ids)
    for c, f in block["assign"]:
        assign[cpos[str(c)]] = fpos[str(f)]
    return LbflSolution([fpos[str(f)] for f in block["open"]], assign)


def verify_report(report: dict, inst: LbflInstance, fac_ids, cli_ids, tol: float = 1e-9) -> bool:
    """Re-evaluate the embedded solution; True iff it reproduces the costs."""
    sol = solution_from_block(report["solution"], fac_ids, cli_ids)
    got = evaluate(inst, sol)
    want = report["costs"]
    return all(
        abs(getattr(got, k) - want[k]) <= tol * max(1.0, abs(want[k]))
        for k in ("facility_cost", "assignment_cost", "total")
    )


def _envelope(command: str, inst: LbflInstance, seed) -> dict:
    return {"format": FORMAT, "tool": "lbfl", "version": __version__, "command": command, "seed": seed,
            "instance_sha256": digest(inst)}


# ---------------------------------------------------------------------------
# commands


def _config(args) -> PipelineConfig:
    kw = dict(alpha_mode=args.mode, beta=args.beta, gamma=args.gamma, delta=args.delta,
              epsilon_ls=args.epsilon_ls, seed=args.seed, cdufl_sigma=args.cdufl_sigma)
    if args.alpha is not None:
        kw["alpha"] = args.alpha
    return PipelineConfig(**kw)


def cmd_solve(args) -> int:
    inst, fids, cids = read_instance(args.instance)
    sol, rep = solve(inst, _config(args))
    doc = _envelope("solve", inst, args.seed)
    doc.update(report=rep.to_dict(), solution=solution_block(sol, fids, cids), costs=rep.final.as_dict())
    emit(doc, args.out)
    return EXIT_OK


def cmd_exact(args) -> int:
    inst, fids, cids = read_instance(args.instance)
    res = exact_lbfl(inst, args.cap)
    doc = _envelope("exact", inst, None)
    doc.update(
        solution=solution_block(res.solution, fids, cids),
        costs=res.costs.as_dict(),
        subsets_tried=res.subsets_tried,
        subsets_priced=res.subsets_priced,
    )
    emit(doc, args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    inst, _, _ = read_instance(args.instance)
    cfg = _config(args)
    cfg.oracle_cap = args.cap
    sol, rep = solve(inst, cfg, oracle=True, strict=False)
    opt = rep.oracle["opt"]
    print(f"cost      {rep.final.total:.9g}")
    print(f"optimum   {opt:.9g}")
    print(f"ratio     {rep.oracle['ratio']:.6f}" + ("  (single alpha sample)" if rep.mode == "random" else ""))
    print(f"alpha     {rep.alpha:.6g}  gamma {rep.gamma:.6g}  delta {rep.delta:.6g}")
    print(f"bicrit    F_b {rep.bicriteria_facility_cost:.9g}  C_b {rep.bicriteria_assignment_cost:.9g}")
    if rep.cdufl_facility_cost is not None:
        print(f"cdufl     F_S {rep.cdufl_facility_cost:.9g}  C_S {rep.cdufl_assignment_cost:.9g}")
    print(f"i2        constructive {rep.i2_constructive_cost:.9g}  repaired {rep.i2_cost:.9g}")
    for name, c in sorted(rep.checks.items()):
        print(f"check     {name:<22} {'holds' if c.holds else 'FAILS'}  {c.lhs:.9g} <= {c.rhs:.9g}")
    return EXIT_OK if rep.all_hold else EXIT_CHECK


def _generate(args):
    fam = args.family
    if fam == "random":
        return gen_random(args.seed, args.n_facilities, args.n_clients, args.M, (args.cost_low, args.cost_high)), None
    if fam == "star":
        g = gen_locality_star(args.M, args.eps, args.alpha)
        return g.instance, g
    if fam == "cycle":
        g = gen_locality_cycle(args.k, args.eps)
        return g.instance, g
    raise SchemaError(f"gen does not support family {fam!r}")


def cmd_gen(args) -> int:
    inst, _ = _generate(args)
    emit(instance_to_json(inst), args.out)
    return EXIT_OK


def cmd_gapdemo(args) -> int:
    fam = args.family
    if fam == "cdufl":
        g = gen_cdufl_gap(args.f, args.u)
        s = cdufl_local_search(g.instance)
        gap = s.total / g.lp_value
        ok = abs(gap - (args.u + 1)) <= 1e-9 * (args.u + 1)
        print(f"integral {s.total:.9g}  lp {g.lp_value:.9g}  gap {gap:.9g}  (u+1 = {args.u + 1}): {'PASS' if ok else 'FAIL'}")
        return EXIT_OK if ok else EXIT_CHECK
    _, g = _generate(args)
    res = naive_lbfl_local_search(g.instance, g.local_opt)
    opt = evaluate(g.instance, g.global_opt).total
    ratio = res.cost / opt
    print(f"local optimum {res.cost:.9g}  certified {res.certified}  moves {len(res.moves)}")
    print(f"optimum       {opt:.9g}")
    if fam == "star":
        floor = g.params["gap_floor"]
        ok = res.certified and ratio >= floor
        print(f"ratio {ratio:.9g} >= M/2 = {floor:g}: {'PASS' if ok else 'FAIL'}")
    else:
        ok = res.certified and abs(ratio - g.expected_ratio) <= 1e-9 * g.expected_ratio
        print(f"ratio {ratio:.9g} vs k - eps = {g.expected_ratio:.9g}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _solver_flags(p):
    p.add_argument("--mode", choices=["fixed", "random", "derand"], default="derand")
    p.add_argument("--alpha", type=float, default=None, help="alpha for --mode fixed (default 0.75)")
    p.add_argument("--beta", type=float, default=0.67)
    p.add_argument("--gamma", type=float, default=None, help="override the gamma schedule")
    p.add_argument("--delta", type=float, default=None, help="override delta(alpha)")
    p.add_argument("--epsilon-ls", type=float, default=1e-6)
    p.add_argument("--cdufl-sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)


def _family_flags(p, with_cdufl: bool):
    fams = ["random", "star", "cycle"] + (["cdufl"] if with_cdufl else [])
    p.add_argument("family", choices=fams)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-facilities", type=int, default=6)
    p.add_argument("--n-clients", type=int, default=18)
    p.add_argument("--M", type=int, default=3)
    p.add_argument("--cost-low", type=float, default=0.0)
    p.add_argument("--cost-high", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--alpha", type=float, default=None, help="star: bicriteria group size ceil(alpha*M)")
    p.add_argument("--k", type=int, default=3)
    if with_cdufl:
        p.add_argument("--f", type=float, default=10.0)
        p.add_argument("--u", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="lbfl", description="Lower-bounded facility location toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run the approximation pipeline")
    p.add_argument("instance")
    _solver_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("exact", help="brute-force optimum")
    p.add_argument("instance")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--out")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("compare", help="pipeline vs optimum with all bound checks")
    p.add_argument("instance")
    _solver_flags(p)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen", help="write a generated instance")
    _family_flags(p, with_cdufl=False)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("gapdemo", help="locality and integrality gap demonstrations")
    _family_flags(p, with_cdufl=True)
    p.set_defaults(func=cmd_gapdemo)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OracleSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BoundViolation as exc:
        print(f"bound check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
