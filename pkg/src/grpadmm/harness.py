"""Run configuration, parameter presets, comparisons, and reference solves.

``compare`` executes several configured runs on one problem, pools the
best objective value seen by any of them, back-fills the relative
objective gap into every trace, and writes per-run CSVs plus a summary
JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linops import estimate_spectral_norm
from .metrics import RunTrace, fes_gap, objective, psnr
from .problems import save_problem
from .solver import (
    ALGORITHMS,
    GOLDEN_RATIO,
    DecreasingStep,
    FixedStep,
    IncreasingStep,
    SplitProblem,
    StepRule,
    initial_state,
    rule_to_dict,
    run,
    step,
)

__all__ = [
    "RunConfig",
    "ComparisonReport",
    "ReferenceSolution",
    "preset_rule",
    "preset_configs",
    "compare",
    "reference_solve",
    "objective",
    "fes_gap",
    "psnr",
]

# Per-problem parameter choices used in the source experiments. Fixed-step
# baselines derive tau from the estimated operator norm at config time.
_PRESETS = {
    "lasso": {
        "alg2": dict(psi=1.60, beta=7.0, r=0.50, r1=0.45, tau0=1.0),
        "alg1": dict(psi=1.60, beta=7.0, mu=0.7, tau0=1.0),
        "grp-fixed": dict(psi=GOLDEN_RATIO, sigma=2.0),
        "padmm": dict(sigma=2.0),
    },
    "rof": {
        "alg2": dict(psi=1.60, beta=8.0, r=0.48, r1=0.42, tau0=1.0),
        "alg1": dict(psi=GOLDEN_RATIO, beta=20.0, mu=0.8, tau0=1.0),
        "grp-fixed": dict(psi=GOLDEN_RATIO, sigma=10.0),
        "padmm": dict(sigma=15.0),
    },
    "deblur": {
        "alg2": dict(psi=1.60, beta=10.0, r=0.50, r1=0.45, tau0=10.0),
        "alg1": dict(psi=GOLDEN_RATIO, beta=20.0, mu=0.8, tau0=10.0),
        "grp-fixed": dict(psi=GOLDEN_RATIO, sigma=10.0),
        "padmm": dict(sigma=15.0),
    },
    "uot": {
        "alg2": dict(psi=1.60, beta=1.0, r=0.48, r1=0.45, tau0=1.0),
        "alg1": dict(psi=GOLDEN_RATIO, beta=0.5, mu=0.7, tau0=1.0),
        "grp-fixed": dict(psi=GOLDEN_RATIO, sigma=1.0),
        "padmm": dict(sigma=1.0),
    },
}


@dataclass
class RunConfig:
    """One configured run inside a comparison."""

    algorithm: str
    rule: StepRule
    iters: int
    seed: int = 0
    name: str | None = None
    metric_every: int | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.iters < 1:
            raise ValueError("iters must be at least 1")
        if self.name is None:
            self.name = self.algorithm


def preset_rule(
    problem_kind: str,
    algorithm: str,
    problem: SplitProblem | None = None,
    *,
    overrides: dict | None = None,
    norm_seed: int = 0,
) -> StepRule:
    """Build the preset step rule for a problem kind and algorithm.

    Fixed-step baselines need the problem to estimate ``||A||`` for
    ``tau = psi / (sigma ||A||^2)`` (plain ``1 / (sigma ||A||^2)`` for
    padmm). ``overrides`` replaces individual preset parameters.
    """
    if problem_kind not in _PRESETS:
        raise ValueError(f"no presets for problem kind {problem_kind!r}")
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    params = dict(_PRESETS[problem_kind][algorithm])
    if overrides:
        params.update(overrides)
    if algorithm == "alg1":
        return DecreasingStep(**params)
    if algorithm == "alg2":
        return IncreasingStep(**params)
    if "tau" not in params:
        if problem is None:
            raise ValueError(
                f"{algorithm} presets need the problem to estimate ||A||"
            )
        norm = estimate_spectral_norm(problem.A, seed=norm_seed)
        numer = params.get("psi", GOLDEN_RATIO) if algorithm == "grp-fixed" else 1.0
        params["tau"] = numer / (params["sigma"] * norm**2)
    return FixedStep(**params)


def preset_configs(
    problem_kind: str,
    problem: SplitProblem,
    iters: int,
    seed: int = 0,
    algorithms=ALGORITHMS,
) -> list[RunConfig]:
    """Preset configurations for the requested algorithms on one problem."""
    return [
        RunConfig(
            algorithm=algo,
            rule=preset_rule(problem_kind, algo, problem),
            iters=iters,
            seed=seed,
        )
        for algo in algorithms
    ]


@dataclass
class ComparisonReport:
    """Pooled results of several runs on one problem."""

    phi_star: float
    rel_gap_is_absolute: bool
    traces: dict[str, RunTrace]
    summary: dict
    out_dir: Path | None = None


# Problem kinds whose serialized data stays small enough to drop next to
# the traces for post-hoc figure generation.
_DUMPABLE_KINDS = ("rof", "deblur", "uot")


def compare(
    problem: SplitProblem,
    configs: list[RunConfig],
    out_dir=None,
    problem_params: dict | None = None,
) -> ComparisonReport:
    """Run every config, pool the best objective, back-fill relative gaps.

    The pooled value is the minimum objective over all iterations of all
    runs. Each trace row then gets ``rel_gap = |obj - phi*| / phi*``; if
    the pooled value is exactly zero the column holds the absolute gap and
    the summary carries a flag. Aborted runs are reported in the summary
    but do not abort the comparison.
    """
    names = [cfg.name for cfg in configs]
    if len(set(names)) != len(names):
        raise ValueError("run names must be unique")
    traces: dict[str, RunTrace] = {}
    for cfg in configs:
        extra = {"name": cfg.name}
        if problem_params:
            extra["problem"] = {"kind": problem.kind, **problem_params}
        traces[cfg.name] = run(
            problem,
            cfg.algorithm,
            cfg.rule,
            cfg.iters,
            seed=cfg.seed,
            metric_every=cfg.metric_every,
            config_extra=extra,
        )

    pooled = [
        row.objective
        for trace in traces.values()
        for row in trace.rows
        if math.isfinite(row.objective)
    ]
    if not pooled:
        raise ValueError("no finite objective values to pool")
    phi_star = min(pooled)
    absolute = phi_star == 0.0
    for trace in traces.values():
        for row in trace.rows:
            gap = abs(row.objective - phi_star)
            row.rel_gap = gap if absolute else gap / phi_star

    summary = {
        "phi_star": phi_star,
        "rel_gap_is_absolute": absolute,
        "problem": {"kind": problem.kind, **(problem_params or {})},
        "runs": {},
    }
    for cfg in configs:
        trace = traces[cfg.name]
        last = trace.rows[-1] if trace.rows else None
        summary["runs"][cfg.name] = {
            "algorithm": cfg.algorithm,
            "final_rel_gap": None if last is None else last.rel_gap,
            "final_fes_gap": None if last is None else last.fes_gap,
            "final_psnr": None if last is None else last.psnr,
            "status": trace.status,
            "params": {
                **rule_to_dict(cfg.rule),
                "iters": cfg.iters,
                "seed": cfg.seed,
            },
        }

    report = ComparisonReport(
        phi_star=phi_star,
        rel_gap_is_absolute=absolute,
        traces=traces,
        summary=summary,
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, trace in traces.items():
            trace.save(out_dir / name)
        with (out_dir / "summary.json").open("w") as fh:
            json.dump(summary, fh, indent=2)
        if problem.kind in _DUMPABLE_KINDS:
            save_problem(problem, out_dir / "problem.json")
        report.out_dir = out_dir
    return report


@dataclass
class ReferenceSolution:
    """Best pair found by a long conservative fixed-step run."""

    objective: float
    x: np.ndarray
    w: np.ndarray
    fes_gap: float
    converged: bool


_REFERENCE_SIGMA = {"lasso": 2.0, "rof": 10.0, "deblur": 10.0, "uot": 1.0}


def reference_solve(
    problem: SplitProblem,
    iters: int = 20000,
    tol: float = 1e-12,
    sigma: float | None = None,
    norm_seed: int = 0,
) -> ReferenceSolution:
    """High-accuracy oracle run with the fixed-step golden-ratio scheme.

    Uses ``tau = psi / (sigma ||A||^2)`` with the estimated norm and stops
    early once the feasibility gap and the objective change both drop
    below ``tol``. Returns the best (lowest-objective) pair seen, flagged
    with whether the tolerance was reached.
    """
    if sigma is None:
        sigma = _REFERENCE_SIGMA.get(problem.kind, 1.0)
    norm = estimate_spectral_norm(problem.A, seed=norm_seed)
    if norm == 0.0:
        raise ValueError("cannot build reference steps for a zero operator")
    rule = FixedStep(tau=GOLDEN_RATIO / (sigma * norm**2), sigma=sigma)
    state = initial_state(problem, rule)
    best_obj = math.inf
    best_x = state.x.copy()
    best_w = state.w.copy()
    prev_obj = math.inf
    converged = False
    gap = fes_gap(problem, state.x, state.w)
    for _ in range(iters):
        state = step(state, problem, rule, "grp-fixed")
        obj = objective(problem, state.x, state.w)
        gap = float(
            np.linalg.norm(
                state.ax + problem.B.apply(state.w) - problem.b
            )
        )
        if obj < best_obj:
            best_obj = obj
            best_x = state.x.copy()
            best_w = state.w.copy()
        if gap < tol and abs(obj - prev_obj) < tol:
            converged = True
            break
        prev_obj = obj
    return ReferenceSolution(
        objective=best_obj, x=best_x, w=best_w, fes_gap=gap, converged=converged
    )
