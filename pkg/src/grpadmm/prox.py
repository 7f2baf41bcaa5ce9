"""Convex terms with cheap evaluation and proximal mappings.

Every term ``h`` exposes ``eval(v)`` and ``prox(v, t)``, the minimizer of
``h(z) + ||z - v||^2 / (2 t)``. All mappings are closed-form except the
quadratic data-fit term, whose prox is solved matrix-free by conjugate
gradients.
"""

from __future__ import annotations

import math

import numpy as np

from .linops import LinearMap

__all__ = [
    "ProxTerm",
    "ProxSolveError",
    "L1",
    "SquaredL2",
    "GroupL21",
    "LinearNonneg",
    "QuadData",
]


class ProxSolveError(RuntimeError):
    """Raised when an iterative prox solve misses its tolerance.

    Carries the achieved relative residual in ``residual``.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class ProxTerm:
    """Base class for proper closed convex terms."""

    kind = "abstract"

    def __init__(self, dim: int):
        if dim <= 0:
            raise ValueError("dimension must be positive")
        self.dim = int(dim)

    def eval(self, v) -> float:
        raise NotImplementedError

    def prox(self, v, t: float) -> np.ndarray:
        raise NotImplementedError

    def _check_vec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(
                f"{self.kind}: expected shape ({self.dim},), got {v.shape}"
            )
        return v

    @staticmethod
    def _check_t(t: float) -> float:
        t = float(t)
        if t <= 0:
            raise ValueError("prox step t must be positive")
        return t


class L1(ProxTerm):
    """``weight * ||v||_1``; the prox is soft-thresholding at ``weight * t``.

    Entries sitting exactly at the threshold map to 0.
    """

    kind = "l1"

    def __init__(self, weight: float, dim: int):
        super().__init__(dim)
        if weight < 0:
            raise ValueError("weight must be nonnegative")
        self.weight = float(weight)

    def eval(self, v):
        return self.weight * float(np.abs(self._check_vec(v)).sum())

    def prox(self, v, t):
        v = self._check_vec(v)
        t = self._check_t(t)
        return np.sign(v) * np.maximum(np.abs(v) - self.weight * t, 0.0)


class SquaredL2(ProxTerm):
    """``(weight / 2) * ||v - shift||^2``."""

    kind = "sql2-shift"

    def __init__(self, shift, weight: float = 1.0):
        shift = np.asarray(shift, dtype=float).ravel()
        super().__init__(shift.size)
        if weight < 0:
            raise ValueError("weight must be nonnegative")
        self.shift = shift
        self.weight = float(weight)

    def eval(self, v):
        r = self._check_vec(v) - self.shift
        return 0.5 * self.weight * float(r @ r)

    def prox(self, v, t):
        v = self._check_vec(v)
        t = self._check_t(t)
        return (v + t * self.weight * self.shift) / (1.0 + t * self.weight)


class GroupL21(ProxTerm):
    """Isotropic group norm over per-pixel gradient pairs.

    The input stacks two planes of ``n_groups`` entries each; group ``i``
    is the pair ``(v[i], v[n_groups + i])``. Evaluation sums the Euclidean
    norms of the pairs times ``weight``; the prox shrinks each pair by
    ``max(0, 1 - weight * t / ||pair||)``.
    """

    kind = "group-l21"

    def __init__(self, weight: float, n_groups: int):
        super().__init__(2 * n_groups)
        if weight < 0:
            raise ValueError("weight must be nonnegative")
        self.weight = float(weight)
        self.n_groups = int(n_groups)

    def _pairs(self, v):
        return v.reshape(2, self.n_groups)

    def eval(self, v):
        pairs = self._pairs(self._check_vec(v))
        return self.weight * float(np.hypot(pairs[0], pairs[1]).sum())

    def prox(self, v, t):
        v = self._check_vec(v)
        t = self._check_t(t)
        pairs = self._pairs(v)
        norms = np.hypot(pairs[0], pairs[1])
        threshold = self.weight * t
        scale = np.zeros(self.n_groups)
        keep = norms > threshold
        scale[keep] = 1.0 - threshold / norms[keep]
        return (pairs * scale).ravel()


class LinearNonneg(ProxTerm):
    """``<cost, v>`` restricted to the nonnegative orthant.

    Evaluation returns ``inf`` whenever any entry is negative; the prox is
    the shifted projection ``max(v - t * cost, 0)``.
    """

    kind = "linear-plus-nonneg"

    def __init__(self, cost):
        cost = np.asarray(cost, dtype=float).ravel()
        super().__init__(cost.size)
        self.cost = cost

    def eval(self, v):
        v = self._check_vec(v)
        if (v < 0).any():
            return math.inf
        return float(self.cost @ v)

    def prox(self, v, t):
        v = self._check_vec(v)
        t = self._check_t(t)
        return np.maximum(v - t * self.cost, 0.0)


class QuadData(ProxTerm):
    """``(weight / 2) * ||K v - data||^2`` for a matrix-free operator K.

    The prox solves ``(I + t * weight * K^T K) z = v + t * weight * K^T data``
    by conjugate gradients to a relative residual of ``cg_tol``, optionally
    warm-started from a previous solution. Failure to reach the tolerance
    within ``cg_max_iter`` iterations raises :class:`ProxSolveError`.
    """

    kind = "quad-data"

    def __init__(
        self,
        op: LinearMap,
        data,
        weight: float = 1.0,
        cg_tol: float = 1e-10,
        cg_max_iter: int = 500,
    ):
        super().__init__(op.domain_dim)
        data = np.asarray(data, dtype=float).ravel()
        if data.size != op.codomain_dim:
            raise ValueError("data length must match the operator codomain")
        if weight < 0:
            raise ValueError("weight must be nonnegative")
        self.op = op
        self.data = data
        self.weight = float(weight)
        self.cg_tol = float(cg_tol)
        self.cg_max_iter = int(cg_max_iter)

    def eval(self, v):
        r = self.op.apply(self._check_vec(v)) - self.data
        return 0.5 * self.weight * float(r @ r)

    def prox(self, v, t, warm=None):
        v = self._check_vec(v)
        t = self._check_t(t)
        coeff = t * self.weight
        rhs = v + coeff * self.op.adjoint(self.data)

        def matvec(z):
            return z + coeff * self.op.adjoint(self.op.apply(z))

        start = v if warm is None else self._check_vec(warm)
        z, rel_res = _conjugate_gradient(
            matvec, rhs, start, self.cg_tol, self.cg_max_iter
        )
        if rel_res > self.cg_tol:
            raise ProxSolveError(
                "quad-data prox did not reach relative residual "
                f"{self.cg_tol:g} in {self.cg_max_iter} iterations "
                f"(achieved {rel_res:.3e})",
                residual=rel_res,
            )
        return z


def _conjugate_gradient(matvec, rhs, x0, rtol, max_iter):
    """Solve a symmetric positive-definite system; returns (x, rel_residual)."""
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return np.zeros_like(rhs), 0.0
    x = np.asarray(x0, dtype=float).copy()
    r = rhs - matvec(x)
    p = r.copy()
    rs = float(r @ r)
    target = rtol * rhs_norm
    for _ in range(max_iter):
        if math.sqrt(rs) <= target:
            break
        ap = matvec(p)
        alpha = rs / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    # Report the true residual; the recursive one can drift.
    true_res = np.linalg.norm(rhs - matvec(x))
    return x, float(true_res / rhs_norm)
