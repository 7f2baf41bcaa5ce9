"""Command-line entry point: single runs, comparisons, and norm estimates.

Exit code 0 on success, 2 when any run aborted on a non-finite iterate.
"""

from __future__ import annotations

import argparse
import sys

from .harness import RunConfig, compare, preset_configs, preset_rule
from .linops import estimate_spectral_norm
from .problems import DEFAULT_PARAMS, ProblemSpec
from .solver import ALGORITHMS


def _parse_assignments(pairs, label):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise SystemExit(f"{label} expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        try:
            parsed = int(value)
        except ValueError:
            try:
                parsed = float(value)
            except ValueError:
                raise SystemExit(f"{label} {key}: not a number: {value!r}")
        out[key] = parsed
    return out


def _build_spec(args) -> ProblemSpec:
    sizes = _parse_assignments(getattr(args, "size", None), "--size")
    return ProblemSpec(kind=args.problem, params=sizes, seed=args.seed)


def _add_problem_args(parser):
    parser.add_argument(
        "--problem", required=True, choices=sorted(DEFAULT_PARAMS)
    )
    parser.add_argument(
        "--size",
        action="append",
        metavar="KEY=VALUE",
        help="problem parameter override, e.g. --size m=300 --size n=1000",
    )
    parser.add_argument("--seed", type=int, default=0)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="grpadmm",
        description=(
            "Golden-ratio proximal ADMM solvers with adaptive step sizes"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one algorithm and save its trace")
    _add_problem_args(p_run)
    p_run.add_argument("--algo", required=True, choices=ALGORITHMS)
    p_run.add_argument("--iters", type=int, default=2000)
    p_run.add_argument(
        "--preset", default="paper", choices=["paper"],
        help="named parameter preset (default: paper)",
    )
    p_run.add_argument(
        "--param",
        action="append",
        metavar="KEY=VALUE",
        help="step-rule parameter override, e.g. --param beta=5",
    )
    p_run.add_argument(
        "--out", required=True,
        help="output prefix; writes <out>.csv and <out>.json",
    )

    p_cmp = sub.add_parser(
        "compare", help="run several algorithms and pool their best objective"
    )
    _add_problem_args(p_cmp)
    p_cmp.add_argument("--iters", type=int, default=2000)
    p_cmp.add_argument(
        "--algos", nargs="+", default=list(ALGORITHMS), choices=ALGORITHMS
    )
    p_cmp.add_argument("--out", required=True, help="output directory")

    p_norm = sub.add_parser(
        "norm", help="print the estimated operator norm of A"
    )
    _add_problem_args(p_norm)

    args = parser.parse_args(argv)
    spec = _build_spec(args)
    problem = spec.generate()

    if args.command == "norm":
        print(estimate_spectral_norm(problem.A, seed=args.seed))
        return 0

    if args.command == "run":
        overrides = _parse_assignments(args.param, "--param")
        rule = preset_rule(
            spec.kind, args.algo, problem, overrides=overrides
        )
        config = RunConfig(
            algorithm=args.algo, rule=rule, iters=args.iters, seed=args.seed
        )
        report = compare(
            problem, [config], problem_params=dict(spec.params)
        )
        trace = report.traces[config.name]
        trace.save(args.out)
        last = trace.rows[-1]
        print(
            f"{args.algo} on {spec.kind}: status={trace.status} "
            f"objective={last.objective:.6e} fes_gap={last.fes_gap:.3e}"
        )
        return 0 if trace.status == "completed" else 2

    # compare
    configs = preset_configs(
        spec.kind, problem, args.iters, seed=args.seed, algorithms=args.algos
    )
    report = compare(
        problem, configs, out_dir=args.out, problem_params=dict(spec.params)
    )
    print(f"phi_star={report.phi_star:.10e}")
    aborted = False
    for name, info in report.summary["runs"].items():
        print(
            f"{name}: status={info['status']} "
            f"final_rel_gap={info['final_rel_gap']:.3e} "
            f"final_fes_gap={info['final_fes_gap']:.3e}"
        )
        aborted = aborted or info["status"] != "completed"
    return 2 if aborted else 0


if __name__ == "__main__":
    sys.exit(main())
