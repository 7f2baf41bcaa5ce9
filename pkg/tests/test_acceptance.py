"""Acceptance suite: one test per criterion, one printed line per result.

Run with ``pytest tests/test_acceptance.py -s`` to see the [PASS]/[FAIL]
lines. Three assertions are expected to stay red on calibration grounds
(documented in the failure messages): the 1e-4 relative-gap target at 2000
iterations for the decreasing rule and the fixed-step baseline, the
zero-shrink-events window of the increasing rule, and the +1 dB deblurring
target at the 128x128 scale.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from grpadmm.harness import preset_configs, preset_rule, compare, reference_solve
from grpadmm.linops import (
    Grad2dPeriodic,
    Image2D,
    estimate_spectral_norm,
    local_curvature,
)
from grpadmm.metrics import psnr
from grpadmm.problems import gen_deblur, gen_lasso, gen_rof, gen_uot
from grpadmm.prox import QuadData
from grpadmm.solver import (
    ALGORITHMS,
    DecreasingStep,
    FixedStep,
    IncreasingStep,
    initial_state,
    run,
    step,
)

from conftest import (
    assert_prox_optimal,
    operator_zoo,
    uot_enumeration_oracle,
)


@contextmanager
def criterion(name):
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name} ({time.perf_counter() - started:.1f}s)")
        raise
    print(f"[PASS] {name} ({time.perf_counter() - started:.1f}s)")


# ---------------------------------------------------------------------------
# Shared runs (module scope keeps each expensive run single-shot).

LASSO_SEED = 4  # fixed instance for the desk-scale comparison


@pytest.fixture(scope="module")
def lasso_bundle():
    problem = gen_lasso(200, 1000, 0.1, seed=LASSO_SEED)
    report = compare(
        problem, preset_configs("lasso", problem, iters=2000, seed=LASSO_SEED)
    )
    reference = reference_solve(problem, iters=20000)
    norm = estimate_spectral_norm(problem.A, tol=1e-13, max_iter=20000)
    return problem, report, reference, norm


@pytest.fixture(scope="module")
def uot_bundle():
    problem = gen_uot(30, 30, 1.0, seed=0)
    report = compare(problem, preset_configs("uot", problem, iters=1000))
    reference = reference_solve(problem, iters=30000)
    return problem, report, reference


def test_operator_suite():
    with criterion("operator suite: adjoints + gradient norm sqrt(8)"):
        rng = np.random.default_rng(100)
        for op in operator_zoo():
            for _ in range(100):
                v = rng.standard_normal(op.domain_dim)
                u = rng.standard_normal(op.codomain_dim)
                lhs = op.apply(v) @ u
                assert abs(lhs - v @ op.adjoint(u)) <= 1e-10 * (1 + abs(lhs))
        for size in (16, 64):
            grad = Grad2dPeriodic(size, size)
            est = estimate_spectral_norm(grad, tol=1e-13, max_iter=20000)
            assert abs(est - math.sqrt(8.0)) <= 1e-3, (size, est)


def test_prox_suite():
    with criterion("prox suite: sampled optimality + nonexpansiveness"):
        from conftest import prox_objective
        from test_prox import all_terms, closed_form_terms

        rng = np.random.default_rng(101)
        for term in all_terms():
            assert_prox_optimal(term, rng.standard_normal(term.dim), 0.7)
        for term in closed_form_terms():
            for _ in range(100):
                u = 2.0 * rng.standard_normal(term.dim)
                v = 2.0 * rng.standard_normal(term.dim)
                gap = np.linalg.norm(term.prox(u, 0.9) - term.prox(v, 0.9))
                assert gap <= np.linalg.norm(u - v) + 1e-12
        quad = next(t for t in all_terms() if isinstance(t, QuadData))
        v = rng.standard_normal(quad.dim)
        z = quad.prox(v, 1.3)
        coeff = 1.3 * quad.weight
        rhs = v + coeff * quad.op.adjoint(quad.data)
        lhs = z + coeff * quad.op.adjoint(quad.op.apply(z))
        assert np.linalg.norm(lhs - rhs) <= 1e-9 * np.linalg.norm(rhs)


def test_step_size_invariants(lasso_bundle):
    problem, report, _, norm = lasso_bundle
    with criterion("step-size invariants on the 200x1000 sparse instance"):
        alg1_rows = report.traces["alg1"].rows
        rule1 = preset_rule("lasso", "alg1")
        taus = [row.tau for row in alg1_rows]
        assert all(b <= a for a, b in zip(taus, taus[1:]))
        bound1 = min(
            rule1.tau0,
            rule1.mu * math.sqrt(rule1.lam_min_s) / (math.sqrt(rule1.beta) * norm),
        )
        assert all(t >= bound1 * (1 - 1e-12) for t in taus)

        alg2_trace = report.traces["alg2"]
        rule2 = preset_rule("lasso", "alg2")
        bound2 = min(
            rule2.tau0, rule2.lam_bar * rule2.r1 / (math.sqrt(rule2.beta) * norm)
        )
        shrink_set = set(alg2_trace.shrink_iters)
        prev = rule2.tau0
        for row in alg2_trace.rows:
            assert row.tau >= bound2 * (1 - 1e-12)
            if row.k not in shrink_set:
                assert row.tau == (rule2.rho + rule2.xi(row.k - 1)) * prev
            prev = row.tau

        late_shrinks = [k for k in alg2_trace.shrink_iters if k > 1000]
        assert not late_shrinks, (
            "increasing rule kept shrinking in the last 1000 iterations "
            f"(events at {late_shrinks[:8]}...): the grow branch re-crosses "
            "the curvature threshold every ~log(r/r1)/log(rho) iterations "
            "because the local curvature stays O(1) in floating point"
        )


def test_small_instance_oracles():
    with criterion("small-instance oracles: 1-D closed form + 2x2 transport"):
        problem = gen_lasso(1, 1, 0.1, seed=8)
        a = problem.A.matrix[0, 0]
        d = problem.f.shift[0]
        rhs = problem.b[0]
        r = rhs - d
        x_star = np.sign(r / a) * max(abs(r / a) - 0.1 / a**2, 0.0)
        ref = reference_solve(problem, iters=20000, tol=1e-14)
        assert abs(ref.x[0] - x_star) <= 1e-8

        uot = gen_uot(2, 2, 1.0, seed=9)
        oracle_value, _ = uot_enumeration_oracle(uot)
        uot_ref = reference_solve(uot, iters=20000)
        assert abs(uot_ref.objective - oracle_value) <= 1e-3


def test_desk_scale_lasso_comparison(lasso_bundle):
    problem, report, reference, _ = lasso_bundle
    with criterion("desk-scale sparse-regression comparison (4 algorithms)"):
        # Pooled best objective agrees with the long reference run.
        assert (
            abs(report.phi_star - reference.objective) / reference.objective
            <= 1e-3
        )
        finals = {
            name: trace.rows[-1] for name, trace in report.traces.items()
        }
        for name, row in finals.items():
            assert row.fes_gap <= 1e-3, (name, row.fes_gap)
        # Ordering trend with the stated 10x slack.
        assert finals["alg2"].rel_gap <= finals["alg1"].rel_gap
        assert finals["alg1"].rel_gap <= 10 * finals["grp-fixed"].rel_gap
        for name, row in finals.items():
            assert row.rel_gap <= 1e-4, (
                f"{name} rel_gap {row.rel_gap:.3e} > 1e-4 at 2000 iterations: "
                "the decreasing rule's curvature clamp settles ~2.3x inside "
                "the stability boundary (needs ~6000 iterations) and the "
                "fixed-step baseline ~3000-4000; measured consistently "
                "across seeds"
            )


def test_ergodic_rate(lasso_bundle):
    problem, report, reference, _ = lasso_bundle
    with criterion("ergodic O(1/N) rate trend on the decreasing rule"):
        rows = {row.k: row for row in report.traces["alg1"].rows}
        phi = reference.objective
        for n in (250, 500):
            gap_n = abs(rows[n].ergodic_objective - phi)
            gap_4n = abs(rows[4 * n].ergodic_objective - phi)
            assert gap_4n <= 0.75 * gap_n, (n, gap_n, gap_4n)


def test_rof_denoising():
    with criterion("TV denoising 64x64: +2 dB over the noisy input"):
        problem = gen_rof(64, 64, 0.08, 0.1, seed=0)
        truth = Image2D(64, 64, problem.x_true)
        noisy_psnr = psnr(Image2D(64, 64, problem.observation), truth)
        report = compare(problem, preset_configs("rof", problem, iters=1000))
        for name, trace in report.traces.items():
            last = trace.rows[-1]
            assert last.psnr >= noisy_psnr + 2.0, (name, last.psnr, noisy_psnr)
            assert last.fes_gap <= 1e-2, (name, last.fes_gap)


def test_deblurring():
    with criterion("TV deblurring 128x128: +1 dB over the blurred input"):
        problem = gen_deblur(128, 128, 15, 2.0, 0.02, 0.048, seed=0)
        truth = Image2D(128, 128, problem.x_true)
        blurred_psnr = psnr(Image2D(128, 128, problem.observation), truth)
        rule = preset_rule("deblur", "alg2")
        trace = run(problem, "alg2", rule, 1000)
        last = trace.rows[-1]
        assert last.fes_gap <= 1e-2, last.fes_gap
        assert last.psnr >= blurred_psnr + 1.0, (
            f"reconstruction {last.psnr:.2f} dB vs blurred input "
            f"{blurred_psnr:.2f} dB: at this scale the pinned regularization "
            "weight (carried over from the 512x512 setup with the same "
            "15x15 PSF) over-smooths; the model optimum itself sits below "
            "the +1 dB target (verified by a weight sweep)"
        )


def test_unbalanced_transport(uot_bundle):
    problem, report, reference = uot_bundle
    with criterion("unbalanced transport 30x30: near-diagonal mass"):
        def band_fraction(plan_vec):
            plan = plan_vec.reshape(30, 30)
            i, j = np.ogrid[:30, :30]
            return float(plan[np.abs(i - j) <= 2].sum() / plan.sum())

        assert band_fraction(reference.x) >= 0.6
        best_rel = math.inf
        for name, trace in report.traces.items():
            assert (trace.final_x >= 0.0).all(), name
            assert trace.rows[-1].fes_gap <= 1e-3, (
                name, trace.rows[-1].fes_gap,
            )
            assert band_fraction(trace.final_x) >= 0.6, name
            best_rel = min(
                best_rel,
                abs(trace.rows[-1].objective - reference.objective)
                / reference.objective,
            )
        assert best_rel <= 1e-2


def test_saddle_point_fixedness():
    with criterion("saddle-point fixedness under one step"):
        problem = gen_lasso(1, 1, 0.1, seed=8)
        a = problem.A.matrix[0, 0]
        d = problem.f.shift[0]
        rhs = problem.b[0]
        r = rhs - d
        x_star = np.array(
            [np.sign(r / a) * max(abs(r / a) - 0.1 / a**2, 0.0)]
        )
        w_star = np.array([rhs - a * x_star[0]])
        y_star = np.array([d - w_star[0]])
        rules = {
            "grp-fixed": FixedStep(tau=0.3, sigma=1.5),
            "padmm": FixedStep(tau=0.3, sigma=1.5),
            "alg1": DecreasingStep(psi=1.6, beta=7.0, mu=0.7, tau0=0.5),
            "alg2": IncreasingStep(psi=1.6, beta=7.0, r=0.5, r1=0.45, tau0=0.5),
        }
        for algorithm in ALGORITHMS:
            state = initial_state(
                problem, rules[algorithm], x0=x_star, w0=w_star, y0=y_star
            )
            moved = step(state, problem, rules[algorithm], algorithm)
            drift = math.sqrt(
                (moved.x[0] - x_star[0]) ** 2
                + (moved.w[0] - w_star[0]) ** 2
                + (moved.y[0] - y_star[0]) ** 2
            )
            assert drift <= 1e-6, (algorithm, drift)
