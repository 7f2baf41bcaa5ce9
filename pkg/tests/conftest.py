"""Shared fixtures and independent oracles used across the test suite."""

import numpy as np
import pytest

from grpadmm.linops import (
    BlurPeriodic,
    DenseMap,
    Div2dPeriodic,
    Grad2dPeriodic,
    Identity,
    NegatedIdentity,
    OTMarginal,
    ScaledIdentity,
    gaussian_psf,
)


def operator_zoo():
    """One instance of every operator kind, odd shapes on purpose."""
    rng = np.random.default_rng(42)
    return [
        DenseMap(rng.standard_normal((7, 5))),
        Identity(6),
        NegatedIdentity(6),
        ScaledIdentity(5, -2.75),
        Grad2dPeriodic(8, 6),
        Div2dPeriodic(8, 6),
        BlurPeriodic(16, 12, gaussian_psf(5, 1.3)),
        OTMarginal(4, 3),
    ]


def direct_periodic_convolution(image, kernel):
    """Brute-force periodic convolution, the oracle for the FFT path."""
    h, w = image.shape
    size = kernel.shape[0]
    radius = size // 2
    out = np.zeros_like(image)
    for a in range(size):
        for b in range(size):
            out += kernel[a, b] * np.roll(
                image, (a - radius, b - radius), axis=(0, 1)
            )
    return out


def marginal_matrix(n_source, n_target):
    """Materialized 0/1 marginal-sum matrix (test oracle only)."""
    mat = np.zeros((n_source + n_target, n_source * n_target))
    for i in range(n_source):
        for j in range(n_target):
            col = i * n_target + j
            mat[i, col] = 1.0
            mat[n_source + j, col] = 1.0
    return mat


def prox_objective(term, z, v, t):
    return term.eval(z) + float((z - v) @ (z - v)) / (2.0 * t)


def assert_prox_optimal(term, v, t, n_samples=50, seed=0, slack=1e-9):
    """The prox output must beat random perturbations on the prox objective."""
    rng = np.random.default_rng(seed)
    z_star = term.prox(v, t)
    best = prox_objective(term, z_star, v, t)
    for scale in (1e-4, 1e-2, 1.0):
        for _ in range(n_samples):
            z = z_star + scale * rng.standard_normal(term.dim)
            assert best <= prox_objective(term, z, v, t) + slack


@pytest.fixture(scope="session")
def small_lasso():
    from grpadmm.problems import gen_lasso

    return gen_lasso(20, 50, 0.1, seed=3)


def uot_enumeration_oracle(problem):
    """Brute-force the 2x2 quadratic-penalty transport problem on nested
    grids. Independent of the solver path: evaluates the objective at the
    feasible pair (x, b - Ax) by plain enumeration.
    """
    assert problem.A.domain_dim == 4
    cost = problem.g.cost
    target = problem.b
    gamma = problem.f.weight

    def values(entries):
        x11, x12, x21, x22 = entries
        penalty = (
            (x11 + x12 - target[0]) ** 2
            + (x21 + x22 - target[1]) ** 2
            + (x11 + x21 - target[2]) ** 2
            + (x12 + x22 - target[3]) ** 2
        )
        return (
            cost[0] * x11 + cost[1] * x12 + cost[2] * x21 + cost[3] * x22
            + 0.5 * gamma * penalty
        )

    hi = float(target.max())
    lows = np.zeros(4)
    highs = np.full(4, hi)
    spacing = hi / 35
    best_point = None
    for _ in range(3):
        axes = [
            np.arange(lows[i], highs[i] + spacing / 2, spacing).clip(min=0.0)
            for i in range(4)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        grid_values = values(mesh)
        flat = int(np.argmin(grid_values))
        idx = np.unravel_index(flat, grid_values.shape)
        best_point = np.array([axes[i][idx[i]] for i in range(4)])
        lows = best_point - 2 * spacing
        highs = best_point + 2 * spacing
        spacing /= 10
    return float(values(best_point)), best_point
