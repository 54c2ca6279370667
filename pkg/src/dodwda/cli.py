"""Command-line entry point.

Exit codes: 0 success, 1 validation failure or bad usage, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .demand_response import Building, DualDomain, centralized_oracle
from .errors import ContractViolation, DodwdaError, InfeasibleSetpoint
from .harness.config import load_buildings_file, load_config
from .harness.io import write_csv
from .harness.plots import render_plots
from .harness.scenario import build_network, prepare, problem_bound_inputs, run_scenario
from .regret import theorem1_terms
from .topology import validate

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dodwda", description="Distributed online demand response with regret bounds.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="simulate a scenario; write CSV trace and charts")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("validate-network", help="check the configured network against the assumptions")
    p.add_argument("config")

    p = sub.add_parser("bound", help="print the regret bound and its three terms")
    p.add_argument("config")
    p.add_argument("--vt", type=float, help="path length to use instead of the realised one")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("oracle", help="solve one dispatch round centrally")
    p.add_argument("--setpoint", type=float, required=True)
    p.add_argument("--buildings", required=True)
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    result = run_scenario(cfg, args.seed)
    out = Path(args.out or result.problem.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = write_csv(result.trace, out / "trace.csv")
    charts = render_plots(result.trace, out)
    trace = result.trace
    summary = {
        "seed": result.problem.config.seed,
        "T": trace.T,
        "n": trace.n,
        "relative_dual_gap_T": trace.relative_dual_gap().tolist(),
        "cumulative_regret_T": float(trace.cum_regret[-1]),
        "average_absolute_regret_T": float(trace.avg_abs_regret[-1]),
        "theorem1_bound": result.theorem1_bound,
        "bound_inputs": result.report.inputs.__dict__,
        "lemma_violations": result.report.lemma_violations,
        "saturated_rounds": int(trace.saturated.sum()),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"wrote {csv_path}")
    for c in charts:
        print(f"wrote {c}")
    print(f"relative dual gap at T: " + ", ".join(f"{100 * g:.2f}%" for g in summary["relative_dual_gap_T"]))
    print(f"cumulative regret at T: {summary['cumulative_regret_T']!r}  bound: {result.theorem1_bound!r}")
    return EXIT_OK


def _cmd_validate_network(args) -> int:
    cfg = load_config(args.config)
    report = validate(build_network(cfg))
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_INVALID


def _cmd_bound(args) -> int:
    cfg = load_config(args.config)
    problem = prepare(cfg, args.seed)
    inputs = problem_bound_inputs(problem, args.vt)
    terms = theorem1_terms(inputs)
    print(f"theorem1_bound {terms.total!r}")
    print(f"  consensus_term {terms.consensus!r}")
    print(f"  dual_norm_term {terms.dual_norm!r}")
    print(f"  path_term {terms.path!r}")
    print("inputs " + " ".join(f"{k}={v!r}" for k, v in inputs.__dict__.items()))
    return EXIT_OK


def _cmd_oracle(args) -> int:
    specs = load_buildings_file(args.buildings)
    buildings = [Building(b.a_lo, b.a_hi, b.c) for b in specs]
    try:
        sol = centralized_oracle(args.setpoint, buildings, DualDomain.for_buildings(buildings))
    except InfeasibleSetpoint as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    a = np.asarray(sol.a)
    print("a* = (" + ", ".join(f"{v:.10g}" for v in a) + ")")
    print(f"nu* = {sol.nu:.10g}")
    return EXIT_OK


COMMANDS = {
    "run": _cmd_run,
    "validate-network": _cmd_validate_network,
    "bound": _cmd_bound,
    "oracle": _cmd_oracle,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ContractViolation as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except (DodwdaError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
