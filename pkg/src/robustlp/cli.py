"""Command-line entry points: robustlp {mincost,maxflow,lp,l1,mdp} ..."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import Infeasible, ParseError, SolverError

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    mode: str = "practical"
    C: float = 4.0
    seed: int = 0
    delta: float = 1e-6
    trace: Path | None = None
    retries: int = 64
    jobs: int = 1
    oracle_check: bool = False
    check_invariants: bool = False

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("--delta must be positive")
        if self.C < 2:
            raise ValueError("--C must be at least 2")
        if self.retries < 1:
            raise ValueError("--retries must be at least 1")

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        return cls(args.mode, args.C, args.seed, args.delta,
                   Path(args.trace) if args.trace else None, args.retries, args.jobs,
                   args.oracle_check, args.check_invariants)


class TraceWriter:
    """JSON-lines sink for step records; a no-op without a path."""

    def __init__(self, path: Path | None):
        self.fh = open(path, "w") if path is not None else None

    def __call__(self, rec: dict) -> None:
        self.fh.write(json.dumps(rec) + "\n")

    @property
    def callback(self):
        return self if self.fh is not None else None

    def close(self):
        if self.fh is not None:
            self.fh.close()


def _fmt(v: float) -> str:
    return repr(float(v))


def _summary(out, records, reports, checked: bool) -> None:
    if records:
        ymax = max(r.yinf for r in records)
        pmax = max(r.psi for r in records)
        out.append(f"c trajectory: {len(records)} steps, max ||y||_inf {ymax:.3e}, max Psi {pmax:.3e}")
    if checked:
        bad = sum(not r.ok for r in reports)
        status = "ok" if bad == 0 else "FAILED"
        out.append(f"c invariants: {len(reports) - bad}/{len(reports)} steps pass "
                   f"(centering, invariant, Psi <= m^2): {status}")
    else:
        out.append("c invariants: not checked (use --check-invariants)")


def _write(path, text: str) -> None:
    if path:
        Path(path).write_text(text)


# ------------------------------------------------------------------ commands

def cmd_mincost(args, cfg: RunConfig, trace) -> tuple[int, list[str]]:
    from .flow import parse_dimacs_min, reduce_to_st, solve_network, write_flow_solution

    net = parse_dimacs_min(Path(args.input).read_text())
    res = solve_network(net, cfg.seed, C=cfg.C, mode=cfg.mode, retries=cfg.retries,
                        check_invariants=cfg.check_invariants, trace=trace, jobs=cfg.jobs)
    sol = write_flow_solution(res.cost, net.tails, net.heads, res.flow)
    out = sol.rstrip("\n").split("\n")
    out.append("c verified: optimal (integral, feasible, no negative residual cycle)")
    out.append(f"c attempts {res.attempts}, ipm steps {res.ipm_steps}")
    code = EXIT_OK
    if cfg.oracle_check:
        from .oracles import ssp_mincost

        inst, offset = reduce_to_st(net)
        ref = int(round(ssp_mincost(inst).value)) + offset
        match = ref == res.cost
        out.append(f"c oracle ssp_mincost: {ref} ({'match' if match else 'MISMATCH'})")
        code = EXIT_OK if match else EXIT_ERROR
    _summary(out, res.records, res.reports, cfg.check_invariants)
    _write(args.out, sol)
    return code, out


def cmd_maxflow(args, cfg: RunConfig, trace) -> tuple[int, list[str]]:
    from .flow import parse_dimacs_max, solve_maxflow, write_flow_solution

    inst = parse_dimacs_max(Path(args.input).read_text())
    records, reports = [], []
    res = solve_maxflow(inst, cfg.seed, C=cfg.C, mode=cfg.mode, retries=cfg.retries,
                        check_invariants=cfg.check_invariants, trace=trace, jobs=cfg.jobs,
                        reports=reports, records=records)
    sol = write_flow_solution(res.value, inst.tails, inst.heads, res.flow)
    out = sol.rstrip("\n").split("\n")
    out.append(f"c capacity scales {res.scales}")
    code = EXIT_OK
    if cfg.oracle_check:
        from .oracles import dinic_maxflow

        ref = int(round(dinic_maxflow(inst.n, inst.tails, inst.heads, inst.cap, inst.s,
                                      inst.t).value))
        match = ref == res.value
        out.append(f"c oracle dinic_maxflow: {ref} ({'match' if match else 'MISMATCH'})")
        code = EXIT_OK if match else EXIT_ERROR
    _summary(out, records, reports, cfg.check_invariants)
    _write(args.out, sol)
    return code, out


def cmd_lp(args, cfg: RunConfig, trace) -> tuple[int, list[str]]:
    from .lpapps import read_lp, solve_lp

    inst = read_lp(args.matrix, args.sidecar)
    res = solve_lp(inst, cfg.delta, cfg.seed, C=cfg.C, mode=cfg.mode,
                   check_invariants=cfg.check_invariants, trace=trace)
    out = [f"objective {_fmt(res.objective)}", f"residual {_fmt(res.residual)}",
           f"gap {_fmt(res.gap)}"]
    out += [f"x {i + 1} {_fmt(v)}" for i, v in enumerate(res.x)]
    code = EXIT_OK
    if cfg.oracle_check:
        from .oracles import enumerate_lp

        ref = enumerate_lp(inst).value
        match = abs(ref - res.objective) <= cfg.delta and res.residual <= cfg.delta
        out.append(f"c oracle enumerate_lp: {_fmt(ref)} ({'match' if match else 'MISMATCH'})")
        code = EXIT_OK if match else EXIT_ERROR
    _summary(out, res.records, res.reports, cfg.check_invariants)
    if args.out:
        _write(args.out, json.dumps({"objective": res.objective, "residual": res.residual,
                                     "x": res.x.tolist()}) + "\n")
    return code, out


def read_l1(path):
    """JSON {"A": [[...], ...], "c": [...]}."""
    d = json.loads(Path(path).read_text())
    missing = [k for k in ("A", "c") if k not in d]
    if missing:
        raise ValueError(f"l1 file is missing {', '.join(missing)}")
    A = np.asarray(d["A"], dtype=float)
    return (A[:, None] if A.ndim == 1 else A), np.asarray(d["c"], dtype=float)


def cmd_l1(args, cfg: RunConfig, trace) -> tuple[int, list[str]]:
    from .lpapps import solve_l1_regression

    A, c = read_l1(args.input)
    res = solve_l1_regression(A, c, cfg.delta, cfg.seed, C=cfg.C, mode=cfg.mode,
                              check_invariants=cfg.check_invariants, trace=trace)
    out = [f"value {_fmt(res.value)}", f"lower_bound {_fmt(res.dual_bound)}"]
    out += [f"z {j + 1} {_fmt(v)}" for j, v in enumerate(res.z)]
    code = EXIT_OK
    if cfg.oracle_check:
        from .oracles import enumerate_l1

        ref = enumerate_l1(A, c).value
        match = res.value <= ref + cfg.delta
        out.append(f"c oracle enumerate_l1: {_fmt(ref)} ({'match' if match else 'MISMATCH'})")
        code = EXIT_OK if match else EXIT_ERROR
    _summary(out, res.records, res.reports, cfg.check_invariants)
    if args.out:
        _write(args.out, json.dumps({"value": res.value, "z": res.z.tolist()}) + "\n")
    return code, out


def cmd_mdp(args, cfg: RunConfig, trace) -> tuple[int, list[str]]:
    from .lpapps import read_mdp, solve_mdp

    mdp = read_mdp(args.input)
    res = solve_mdp(mdp, cfg.delta, cfg.seed, C=cfg.C, mode=cfg.mode,
                    check_invariants=cfg.check_invariants, trace=trace)
    policy = [int(a) + 1 for a in res.policy]
    out = ["policy " + " ".join(str(a) for a in policy)]
    out += [f"v {i + 1} {_fmt(v)}" for i, v in enumerate(res.values)]
    code = EXIT_OK
    if cfg.oracle_check:
        from .oracles import value_iteration

        vstar = value_iteration(mdp).witness
        err = float(np.max(np.abs(vstar - res.values)))
        match = err <= cfg.delta
        out.append(f"c oracle value_iteration: max gap {err:.3e} ({'match' if match else 'MISMATCH'})")
        code = EXIT_OK if match else EXIT_ERROR
    _summary(out, res.l1.records, res.l1.reports, cfg.check_invariants)
    if args.out:
        _write(args.out, json.dumps({"policy": policy, "values": res.values.tolist()}) + "\n")
    return code, out


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=("practical", "theory"), default="practical",
                        help="step schedule (default: practical)")
    common.add_argument("--C", type=float, default=4.0, help="accuracy constant, at least 2")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--delta", type=float, default=1e-6,
                        help="additive tolerance (eps for mdp)")
    common.add_argument("--trace", metavar="PATH", help="write step records as JSON lines")
    common.add_argument("--retries", type=int, default=64, help="perturbation retries for flows")
    common.add_argument("--jobs", type=int, default=1, help="parallel flow attempts")
    common.add_argument("--oracle-check", action="store_true",
                        help="run the brute-force oracle and compare")
    common.add_argument("--check-invariants", action="store_true",
                        help="verify centering and potential at every step (slow)")
    common.add_argument("--out", metavar="PATH", help="write the solution file here")

    p = argparse.ArgumentParser(prog="robustlp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    q = sub.add_parser("mincost", parents=[common], help="min-cost flow, DIMACS 'p min' input")
    q.add_argument("input")
    q.set_defaults(func=cmd_mincost)
    q = sub.add_parser("maxflow", parents=[common], help="max flow, DIMACS 'p max' input")
    q.add_argument("input")
    q.set_defaults(func=cmd_maxflow)
    q = sub.add_parser("lp", parents=[common], help="two-sided LP, Matrix Market + JSON sidecar")
    q.add_argument("matrix")
    q.add_argument("sidecar")
    q.set_defaults(func=cmd_lp)
    q = sub.add_parser("l1", parents=[common], help="l1 regression, JSON {A, c}")
    q.add_argument("input")
    q.set_defaults(func=cmd_l1)
    q = sub.add_parser("mdp", parents=[common], help="discounted MDP, JSON input")
    q.add_argument("input")
    q.set_defaults(func=cmd_mdp)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_args(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    trace = TraceWriter(cfg.trace)
    try:
        code, lines = args.func(args, cfg, trace.callback)
    except Infeasible as exc:
        print("s INFEASIBLE")
        print(f"error: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ParseError as exc:
        print(f"error: parse error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (SolverError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    finally:
        trace.close()
    print("\n".join(lines))
    return code


if __name__ == "__main__":
    sys.exit(main())
