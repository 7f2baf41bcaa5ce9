"""Iteration schemes for ``min g(x) + f(w)  s.t.  Ax + Bw = b``.

Four drivers share one state layout:

* ``grp-fixed`` -- golden-ratio proximal ADMM with constant steps. The
  x-step is anchored at a convex combination ``u_k`` of all past x-iterates
  with ratio parameter ``psi``.
* ``alg1`` -- the same scheme with a non-increasing step rule: ``tau_k``
  is clamped by an inverse local curvature estimate, so no operator norm
  is ever computed.
* ``alg2`` -- a variant whose step can also grow. A shrink branch fires
  when the step times the local curvature exceeds a threshold; otherwise
  the step is multiplied by ``rho + xi_{k-1} > 1``. The w-subproblem's
  proximal term is scaled by ``1/sigma_k``.
* ``padmm`` -- linearized proximal ADMM baseline with constant steps.

All updates with ``B`` a (scaled) identity have closed forms built from
the proximal mappings of ``g`` and ``f``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .linops import Image2D, LinearMap, ScaledIdentity
from .metrics import MetricsRow, RunTrace, fes_gap, objective, psnr
from .prox import ProxTerm, QuadData

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0

ALGORITHMS = ("grp-fixed", "alg1", "alg2", "padmm")

__all__ = [
    "GOLDEN_RATIO",
    "ALGORITHMS",
    "SplitProblem",
    "FixedStep",
    "DecreasingStep",
    "IncreasingStep",
    "SolverState",
    "default_xi",
    "golden_combine",
    "x_update",
    "tau_update_alg1",
    "tau_update_alg2",
    "w_update",
    "y_update",
    "initial_state",
    "step",
    "run",
    "rule_to_dict",
    "rule_for",
]


@dataclass
class SplitProblem:
    """The tuple ``(g, f, A, B, b)`` plus optional ground-truth metadata.

    ``B`` must be an identity, negated identity, or scaled identity so the
    w-subproblem has a closed form. ``image_shape`` marks imaging problems
    (enables PSNR tracking against ``x_true``); ``observation`` holds the
    degraded input used as the PSNR baseline.
    """

    g: ProxTerm
    f: ProxTerm
    A: LinearMap
    B: LinearMap
    b: np.ndarray
    x_true: np.ndarray | None = None
    image_shape: tuple[int, int] | None = None
    observation: np.ndarray | None = None
    kind: str = "custom"
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.g.dim != self.A.domain_dim:
            raise ValueError("g dimension must match the domain of A")
        if self.f.dim != self.B.domain_dim:
            raise ValueError("f dimension must match the domain of B")
        if self.A.codomain_dim != self.B.codomain_dim:
            raise ValueError("A and B must share their codomain")
        if self.b.size != self.A.codomain_dim:
            raise ValueError("b length must match the codomain of A")
        if not isinstance(self.B, ScaledIdentity):
            raise ValueError(
                "B must be an identity, negated-identity or scaled-identity; "
                "other couplings need a custom w-subproblem solver"
            )
        if self.x_true is not None:
            self.x_true = np.asarray(self.x_true, dtype=float).ravel()
        if self.observation is not None:
            self.observation = np.asarray(self.observation, dtype=float).ravel()


def default_xi(j: int) -> float:
    """Summable perturbation schedule for the growth factor; xi(0) = 1."""
    return float((j + 1) ** -1.01)


@dataclass(frozen=True)
class FixedStep:
    """Constant primal/dual steps for the fixed-step baselines.

    ``psi`` only matters for ``grp-fixed`` (the combination ratio);
    ``t_weight`` is the proximal weight t in ``T = t * I``.
    """

    tau: float
    sigma: float
    psi: float = GOLDEN_RATIO
    t_weight: float = 0.0
    variant = "fixed"

    def __post_init__(self):
        if self.tau <= 0 or self.sigma <= 0:
            raise ValueError("tau and sigma must be positive")
        if self.psi <= 1:
            raise ValueError("psi must exceed 1")
        if self.t_weight < 0:
            raise ValueError("t_weight must be nonnegative")


@dataclass(frozen=True)
class DecreasingStep:
    """Parameters of the non-increasing adaptive rule (``alg1``).

    Requires ``1 < psi <= golden ratio`` and ``0 < mu < psi / 2``. The dual
    step is always ``sigma_k = beta * tau_k``. ``lam_min_s`` is the smallest
    eigenvalue of the x-proximal weight S (S = I here, so 1).
    """

    tau0: float = 1.0
    beta: float = 1.0
    psi: float = GOLDEN_RATIO
    mu: float = 0.5
    lam_min_s: float = 1.0
    t_weight: float = 0.0
    variant = "alg1"

    def __post_init__(self):
        if self.tau0 <= 0:
            raise ValueError("tau0 must be positive")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if not 1.0 < self.psi <= GOLDEN_RATIO:
            raise ValueError("psi must lie in (1, golden ratio]")
        if not 0.0 < self.mu < self.psi / 2.0:
            raise ValueError("mu must lie in (0, psi / 2)")
        if self.lam_min_s <= 0:
            raise ValueError("lam_min_s must be positive")
        if self.t_weight < 0:
            raise ValueError("t_weight must be nonnegative")


@dataclass(frozen=True)
class IncreasingStep:
    """Parameters of the eventually increasing rule (``alg2``).

    ``psi`` is strictly below the golden ratio so the admissible interval
    for ``rho``, ``(1, 1/psi + 1/psi^2]``, is nonempty; ``rho`` defaults to
    its upper endpoint. Requires ``0 < r1 < r < rho / 2``. ``xi`` maps the
    iteration index to a nonnegative perturbation that must tend to zero;
    ``tau_max`` (default inf) is a plumbing safeguard on the growth.
    """

    tau0: float = 1.0
    beta: float = 1.0
    psi: float = 1.6
    rho: float | None = None
    r: float = 0.5
    r1: float = 0.45
    lam_bar: float = 1.0
    xi: Callable[[int], float] = default_xi
    tau_max: float = math.inf
    t_weight: float = 0.0
    variant = "alg2"

    def __post_init__(self):
        if self.tau0 <= 0:
            raise ValueError("tau0 must be positive")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if not 1.0 < self.psi < GOLDEN_RATIO:
            raise ValueError("psi must lie strictly inside (1, golden ratio)")
        rho_cap = 1.0 / self.psi + 1.0 / self.psi**2
        if self.rho is None:
            object.__setattr__(self, "rho", rho_cap)
        if not 1.0 < self.rho <= rho_cap:
            raise ValueError(f"rho must lie in (1, {rho_cap}]")
        if not 0.0 < self.r1 < self.r < self.rho / 2.0:
            raise ValueError("need 0 < r1 < r < rho / 2")
        if self.lam_bar <= 0:
            raise ValueError("lam_bar must be positive")
        if not callable(self.xi):
            raise ValueError("xi must be callable")
        if self.tau_max <= 0:
            raise ValueError("tau_max must be positive")
        if self.t_weight < 0:
            raise ValueError("t_weight must be nonnegative")


StepRule = FixedStep | DecreasingStep | IncreasingStep

_RULE_FOR_ALGORITHM = {
    "grp-fixed": FixedStep,
    "padmm": FixedStep,
    "alg1": DecreasingStep,
    "alg2": IncreasingStep,
}


def rule_to_dict(rule: StepRule) -> dict:
    """JSON-safe snapshot of a step rule for trace configs."""
    out = {"variant": rule.variant}
    for name in rule.__dataclass_fields__:
        value = getattr(rule, name)
        out[name] = getattr(value, "__name__", value) if callable(value) else value
    return out


def rule_for(algorithm: str):
    """The step-rule class an algorithm expects."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return _RULE_FOR_ALGORITHM[algorithm]


def _check_pairing(algorithm: str, rule: StepRule):
    expected = rule_for(algorithm)
    if not isinstance(rule, expected):
        raise ValueError(
            f"algorithm {algorithm!r} needs a {expected.__name__} rule, "
            f"got {type(rule).__name__}"
        )


@dataclass
class SolverState:
    """Iterates and step-size state after ``k`` iterations.

    ``ax`` caches ``A @ x`` (and ``ax_prev`` the previous one) so local
    curvature and residuals reuse the forward application from the x-step.
    """

    x: np.ndarray
    w: np.ndarray
    y: np.ndarray
    u: np.ndarray
    x_prev: np.ndarray
    ax: np.ndarray
    ax_prev: np.ndarray
    tau_prev: float
    tau: float
    sigma: float
    k: int
    shrink_events: int = 0
    last_branch: str | None = None


def golden_combine(x_prev, u_prev, psi: float) -> np.ndarray:
    """Convex combination ``((psi - 1) / psi) x_prev + (1 / psi) u_prev``."""
    if psi <= 1:
        raise ValueError("psi must exceed 1")
    x_prev = np.asarray(x_prev, dtype=float)
    u_prev = np.asarray(u_prev, dtype=float)
    if x_prev.shape != u_prev.shape:
        raise ValueError("x_prev and u_prev must share their shape")
    return ((psi - 1.0) / psi) * x_prev + (1.0 / psi) * u_prev


def _prox(term: ProxTerm, v, t: float, warm=None) -> np.ndarray:
    """Dispatch a prox call, passing a warm start where it helps."""
    if isinstance(term, QuadData):
        return term.prox(v, t, warm=warm)
    return term.prox(v, t)


def x_update(state: SolverState, problem: SplitProblem, tau: float) -> np.ndarray:
    """Proximal x-step anchored at the combination point ``state.u``.

    With S = I the subproblem ``argmin_x g(x) + <y, Ax> + ||x - u||^2/(2 tau)``
    is exactly ``prox_g(u - tau * A^T y, tau)``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    v = state.u - tau * problem.A.adjoint(state.y)
    return _prox(problem.g, v, tau, warm=state.x)


def tau_update_alg1(
    tau_prev: float,
    dx,
    a_dx,
    mu: float,
    beta: float,
    lam_min_s: float = 1.0,
) -> float:
    """Non-increasing step update clamped by inverse local curvature.

    Returns ``min(tau_prev, (mu sqrt(lam_min_s) / sqrt(beta)) ||dx|| / ||A dx||)``;
    when either displacement vanishes the curvature imposes no constraint
    and ``tau_prev`` is kept.
    """
    n_dx = float(np.linalg.norm(dx))
    n_adx = float(np.linalg.norm(a_dx))
    if n_dx == 0.0 or n_adx == 0.0:
        return tau_prev
    candidate = (
        mu * math.sqrt(lam_min_s) / math.sqrt(beta) * (n_dx / n_adx)
    )
    return min(tau_prev, candidate)


def tau_update_alg2(
    tau_prev: float,
    curvature: float | None,
    k: int,
    rule: IncreasingStep,
) -> tuple[float, str]:
    """Two-branch step update: shrink on high local curvature, else grow.

    The shrink branch fires only when ``tau_prev * L_k`` strictly exceeds
    ``r * lam_bar / sqrt(beta)`` (and the curvature ``L_k`` is defined);
    it resets ``tau = r1 * lam_bar / (sqrt(beta) * L_k)``. Otherwise the
    step grows by ``rho + xi(k - 1)``, capped at ``tau_max``.
    """
    threshold = rule.r * rule.lam_bar / math.sqrt(rule.beta)
    if curvature is not None and tau_prev * curvature > threshold:
        return rule.r1 * rule.lam_bar / (math.sqrt(rule.beta) * curvature), "shrink"
    grown = (rule.rho + rule.xi(k - 1)) * tau_prev
    return min(grown, rule.tau_max), "grow"


def w_update(
    x_k,
    w_prev,
    y_prev,
    sigma: float,
    prox_weight: float,
    problem: SplitProblem,
    *,
    ax=None,
) -> np.ndarray:
    """Closed-form w-step for ``B = s * I``.

    Minimizes ``f(w) + <y, Bw> + (sigma/2)||A x + B w - b||^2
    + (prox_weight/2)||w - w_prev||^2``, which reduces to a single prox of
    ``f`` at the weighted center. ``prox_weight`` is ``t`` for the fixed
    and decreasing schemes and ``t / sigma_k`` for the increasing one.
    """
    B = problem.B
    if not isinstance(B, ScaledIdentity):
        raise ValueError(
            "w_update only supports (scaled) identity B; supply a custom "
            "w-subproblem solver for general couplings"
        )
    s = B.scale
    if ax is None:
        ax = problem.A.apply(x_k)
    denom = sigma * s * s + prox_weight
    center = (
        sigma * s * (problem.b - ax) - s * y_prev + prox_weight * w_prev
    ) / denom
    return _prox(problem.f, center, 1.0 / denom, warm=w_prev)


def y_update(y_prev, sigma: float, residual) -> np.ndarray:
    """Dual ascent ``y_prev + sigma * residual``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return y_prev + sigma * residual


def initial_state(
    problem: SplitProblem,
    rule: StepRule,
    x0=None,
    w0=None,
    y0=None,
) -> SolverState:
    """State before the first iteration; defaults to zeros with ``u0 = x0``."""
    q = problem.A.domain_dim
    p = problem.B.domain_dim
    m = problem.b.size
    x = np.zeros(q) if x0 is None else np.asarray(x0, dtype=float).copy()
    w = np.zeros(p) if w0 is None else np.asarray(w0, dtype=float).copy()
    y = np.zeros(m) if y0 is None else np.asarray(y0, dtype=float).copy()
    if x.shape != (q,) or w.shape != (p,) or y.shape != (m,):
        raise ValueError("initial point dimensions do not match the problem")
    if isinstance(rule, FixedStep):
        tau, sigma = rule.tau, rule.sigma
    else:
        tau = rule.tau0
        sigma = rule.beta * rule.tau0
    ax = problem.A.apply(x)
    return SolverState(
        x=x,
        w=w,
        y=y,
        u=x.copy(),
        x_prev=x.copy(),
        ax=ax,
        ax_prev=ax.copy(),
        tau_prev=tau,
        tau=tau,
        sigma=sigma,
        k=0,
    )


def step(
    state: SolverState,
    problem: SplitProblem,
    rule: StepRule,
    algorithm: str,
) -> SolverState:
    """One full iteration; returns a new state, leaving the input intact."""
    _check_pairing(algorithm, rule)
    A, B, b = problem.A, problem.B, problem.b

    if algorithm == "padmm":
        # Linearized x-step: prox-gradient on the augmented Lagrangian at
        # (x_k, w_k, y_k). Algebraically identical to the proximal step
        # with weight S = (1/tau) I - sigma A^T A.
        tau, sigma = rule.tau, rule.sigma
        r_prev = state.ax + B.apply(state.w) - b
        v = state.x - tau * A.adjoint(state.y + sigma * r_prev)
        x = _prox(problem.g, v, tau, warm=state.x)
        ax = A.apply(x)
        w = w_update(x, state.w, state.y, sigma, rule.t_weight, problem, ax=ax)
        y = y_update(state.y, sigma, ax + B.apply(w) - b)
        return SolverState(
            x=x, w=w, y=y, u=x.copy(),
            x_prev=state.x, ax=ax, ax_prev=state.ax,
            tau_prev=state.tau, tau=tau, sigma=sigma,
            k=state.k + 1, shrink_events=state.shrink_events,
        )

    u = golden_combine(state.x, state.u, rule.psi)
    carrier = replace(state, u=u)
    x = x_update(carrier, problem, state.tau)
    ax = A.apply(x)

    branch = None
    if algorithm == "alg1":
        tau = tau_update_alg1(
            state.tau, x - state.x, ax - state.ax,
            rule.mu, rule.beta, rule.lam_min_s,
        )
        sigma = rule.beta * tau
        prox_weight = rule.t_weight
    elif algorithm == "alg2":
        n_dx = float(np.linalg.norm(x - state.x))
        curvature = (
            float(np.linalg.norm(ax - state.ax)) / n_dx if n_dx != 0.0 else None
        )
        tau, branch = tau_update_alg2(state.tau, curvature, state.k + 1, rule)
        sigma = rule.beta * tau
        prox_weight = rule.t_weight / sigma
    else:  # grp-fixed
        tau, sigma = rule.tau, rule.sigma
        prox_weight = rule.t_weight

    w = w_update(x, state.w, state.y, sigma, prox_weight, problem, ax=ax)
    y = y_update(state.y, sigma, ax + B.apply(w) - b)
    return SolverState(
        x=x, w=w, y=y, u=u,
        x_prev=state.x, ax=ax, ax_prev=state.ax,
        tau_prev=state.tau, tau=tau, sigma=sigma,
        k=state.k + 1,
        shrink_events=state.shrink_events + (1 if branch == "shrink" else 0),
        last_branch=branch,
    )


def run(
    problem: SplitProblem,
    algorithm: str,
    rule: StepRule,
    iters: int,
    seed: int = 0,
    callbacks=None,
    *,
    x0=None,
    w0=None,
    y0=None,
    metric_every: int | None = None,
    record_final: bool = True,
    config_extra: dict | None = None,
) -> RunTrace:
    """Drive ``iters`` iterations and collect per-iteration metrics.

    Ergodic averages of ``x`` and ``w`` (plain running means) are tracked
    every iteration; metric rows are sampled every ``metric_every``
    iterations (default: every iteration up to 1e5 variables, every 10
    beyond) with the final iteration always included. A non-finite iterate
    aborts the run and records the iteration and step where it happened.
    """
    _check_pairing(algorithm, rule)
    if iters < 1:
        raise ValueError("iters must be at least 1")
    n_vars = problem.A.domain_dim + problem.B.domain_dim
    every = metric_every if metric_every else (1 if n_vars <= 100_000 else 10)
    if callbacks is None:
        callbacks = []
    elif callable(callbacks):
        callbacks = [callbacks]

    track_psnr = problem.image_shape is not None and problem.x_true is not None
    truth_image = (
        Image2D(*problem.image_shape, problem.x_true) if track_psnr else None
    )

    config = {
        "problem": {"kind": problem.kind},
        "algorithm": algorithm,
        "rule": rule_to_dict(rule),
        "iters": iters,
        "seed": seed,
        "metric_every": every,
    }
    if config_extra:
        config.update(config_extra)

    state = initial_state(problem, rule, x0=x0, w0=w0, y0=y0)
    trace = RunTrace(config=config)
    x_sum = np.zeros_like(state.x)
    w_sum = np.zeros_like(state.w)
    started = time.perf_counter()

    for k in range(1, iters + 1):
        state = step(state, problem, rule, algorithm)
        if not (
            np.isfinite(state.x).all()
            and np.isfinite(state.w).all()
            and np.isfinite(state.y).all()
        ):
            trace.status = "aborted-nonfinite"
            trace.abort_info = {"k": k, "tau": state.tau}
            break
        if state.last_branch == "shrink":
            trace.shrink_iters.append(k)
        if (
            isinstance(rule, IncreasingStep)
            and math.isfinite(rule.tau_max)
            and state.tau == rule.tau_max
        ):
            trace.tau_max_hit = True
        x_sum += state.x
        w_sum += state.w
        if k % every == 0 or k == iters:
            elapsed_ms = (time.perf_counter() - started) * 1e3
            row_psnr = None
            if track_psnr:
                row_psnr = psnr(
                    Image2D(*problem.image_shape, state.x), truth_image
                )
            trace.rows.append(
                MetricsRow(
                    k=k,
                    tau=state.tau,
                    sigma=state.sigma,
                    objective=objective(problem, state.x, state.w),
                    rel_gap=None,
                    fes_gap=fes_gap(problem, state.x, state.w),
                    ergodic_objective=objective(problem, x_sum / k, w_sum / k),
                    psnr=row_psnr,
                    time_ms=elapsed_ms,
                )
            )
        for callback in callbacks:
            callback(k, state)

    if record_final:
        trace.final_x = state.x.copy()
        trace.final_w = state.w.copy()
    return trace
