"""Matrix-free linear operators: forward/adjoint pairs plus norm estimation.

All operators act on flat float64 vectors. Images and transport plans are
vectorized row-major; 2-D gradient fields are stored as two stacked planes,
horizontal differences first, then vertical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Image2D",
    "LinearMap",
    "DenseMap",
    "Identity",
    "NegatedIdentity",
    "ScaledIdentity",
    "Grad2dPeriodic",
    "Div2dPeriodic",
    "BlurPeriodic",
    "OTMarginal",
    "gaussian_psf",
    "estimate_spectral_norm",
    "local_curvature",
]


@dataclass(frozen=True)
class Image2D:
    """A grayscale image stored as a flat row-major pixel vector.

    Pixel values are nominally in [0, 1]; nothing is clipped here.
    """

    height: int
    width: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0:
            raise ValueError("image dimensions must be positive")
        px = np.asarray(self.pixels, dtype=float).ravel()
        if px.size != self.height * self.width:
            raise ValueError(
                f"expected {self.height * self.width} pixels, got {px.size}"
            )
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, arr) -> "Image2D":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(arr.shape[0], arr.shape[1], arr.ravel())

    def as_array(self) -> np.ndarray:
        return self.pixels.reshape(self.height, self.width)


class LinearMap:
    """Base class for linear operators with an explicit adjoint.

    Subclasses implement ``apply`` (forward) and ``adjoint`` (transpose)
    so that ``<apply(v), u> == <v, adjoint(u)>`` for all v, u. Operators
    are immutable after construction and applications are pure.
    """

    kind = "abstract"

    def __init__(self, domain_dim: int, codomain_dim: int):
        if domain_dim <= 0 or codomain_dim <= 0:
            raise ValueError("operator dimensions must be positive")
        self.domain_dim = int(domain_dim)
        self.codomain_dim = int(codomain_dim)

    def apply(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_domain(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.domain_dim,):
            raise ValueError(
                f"{self.kind}: expected input of shape ({self.domain_dim},), "
                f"got {v.shape}"
            )
        return v

    def _check_codomain(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.codomain_dim,):
            raise ValueError(
                f"{self.kind}: expected input of shape ({self.codomain_dim},), "
                f"got {u.shape}"
            )
        return u

    def __repr__(self):
        return (
            f"{type(self).__name__}({self.domain_dim} -> {self.codomain_dim})"
        )


class DenseMap(LinearMap):
    """Explicit matrix operator."""

    kind = "dense"

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise ValueError("matrix must be 2-D")
        super().__init__(matrix.shape[1], matrix.shape[0])
        self.matrix = matrix

    def apply(self, v):
        return self.matrix @ self._check_domain(v)

    def adjoint(self, u):
        return self.matrix.T @ self._check_codomain(u)


class ScaledIdentity(LinearMap):
    """Multiplication by a scalar, ``v -> scale * v``."""

    kind = "scaled-identity"

    def __init__(self, dim: int, scale: float):
        super().__init__(dim, dim)
        self.scale = float(scale)

    def apply(self, v):
        return self.scale * self._check_domain(v)

    def adjoint(self, u):
        return self.scale * self._check_codomain(u)


class Identity(ScaledIdentity):
    kind = "identity"

    def __init__(self, dim: int):
        super().__init__(dim, 1.0)


class NegatedIdentity(ScaledIdentity):
    kind = "negated-identity"

    def __init__(self, dim: int):
        super().__init__(dim, -1.0)


class Grad2dPeriodic(LinearMap):
    """Forward-difference image gradient with periodic wraparound.

    Maps an ``h*w`` image vector to a ``2*h*w`` field. Plane 0 holds the
    horizontal differences ``x[i, j+1] - x[i, j]`` and plane 1 the vertical
    differences ``x[i+1, j] - x[i, j]``, with indices wrapping modulo the
    image size. The adjoint is the negated discrete divergence.
    """

    kind = "grad2d-periodic"

    def __init__(self, height: int, width: int):
        if height <= 0 or width <= 0:
            raise ValueError("image dimensions must be positive")
        super().__init__(height * width, 2 * height * width)
        self.height = int(height)
        self.width = int(width)

    def apply(self, v):
        x = self._check_domain(v).reshape(self.height, self.width)
        d_h = np.roll(x, -1, axis=1) - x
        d_v = np.roll(x, -1, axis=0) - x
        return np.concatenate([d_h.ravel(), d_v.ravel()])

    def adjoint(self, u):
        u = self._check_codomain(u)
        n = self.height * self.width
        p = u[:n].reshape(self.height, self.width)
        q = u[n:].reshape(self.height, self.width)
        out = (np.roll(p, 1, axis=1) - p) + (np.roll(q, 1, axis=0) - q)
        return out.ravel()


class Div2dPeriodic(LinearMap):
    """Discrete divergence of a two-plane field, defined as minus the
    adjoint of :class:`Grad2dPeriodic`."""

    kind = "div2d-periodic"

    def __init__(self, height: int, width: int):
        super().__init__(2 * height * width, height * width)
        self._grad = Grad2dPeriodic(height, width)

    def apply(self, v):
        return -self._grad.adjoint(self._check_domain(v))

    def adjoint(self, u):
        return -self._grad.apply(self._check_codomain(u))


class BlurPeriodic(LinearMap):
    """Periodic 2-D convolution with a fixed odd-sized kernel.

    Internally evaluated in the frequency domain; this matches direct
    periodic convolution to floating-point accuracy and keeps repeated
    applications cheap.
    """

    kind = "blur-periodic"

    def __init__(self, height: int, width: int, kernel):
        kernel = np.asarray(kernel, dtype=float)
        if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
            raise ValueError("kernel must be a square 2-D array")
        size = kernel.shape[0]
        if size % 2 == 0:
            raise ValueError("kernel size must be odd")
        if size > height or size > width:
            raise ValueError("kernel larger than the image")
        super().__init__(height * width, height * width)
        self.height = int(height)
        self.width = int(width)
        self.kernel = kernel
        # Embed the kernel with its center at the origin of the grid.
        radius = size // 2
        padded = np.zeros((height, width))
        padded[:size, :size] = kernel
        padded = np.roll(padded, (-radius, -radius), axis=(0, 1))
        self._khat = np.fft.rfft2(padded)

    def _convolve(self, v, spectrum):
        x = v.reshape(self.height, self.width)
        out = np.fft.irfft2(
            np.fft.rfft2(x) * spectrum, s=(self.height, self.width)
        )
        return out.ravel()

    def apply(self, v):
        return self._convolve(self._check_domain(v), self._khat)

    def adjoint(self, u):
        return self._convolve(self._check_codomain(u), np.conj(self._khat))


class OTMarginal(LinearMap):
    """Marginal-sum operator for transport plans.

    For a row-major vectorized plan of shape ``(n_source, n_target)``,
    returns the row sums followed by the column sums. The 0/1 matrix this
    represents is never materialized.
    """

    kind = "ot-marginal"

    def __init__(self, n_source: int, n_target: int):
        if n_source <= 0 or n_target <= 0:
            raise ValueError("marginal sizes must be positive")
        super().__init__(n_source * n_target, n_source + n_target)
        self.n_source = int(n_source)
        self.n_target = int(n_target)

    def apply(self, v):
        plan = self._check_domain(v).reshape(self.n_source, self.n_target)
        return np.concatenate([plan.sum(axis=1), plan.sum(axis=0)])

    def adjoint(self, u):
        u = self._check_codomain(u)
        row_part = u[: self.n_source]
        col_part = u[self.n_source:]
        return (row_part[:, None] + col_part[None, :]).ravel()


def gaussian_psf(size: int, sigma: float) -> np.ndarray:
    """Normalized ``size x size`` Gaussian kernel.

    ``sigma <= 0`` degenerates to a delta kernel (identity blur).
    """
    if size < 1 or size % 2 == 0:
        raise ValueError("kernel size must be odd and positive")
    radius = size // 2
    if sigma <= 0:
        kernel = np.zeros((size, size))
        kernel[radius, radius] = 1.0
        return kernel
    line = np.exp(-((np.arange(size) - radius) ** 2) / (2.0 * sigma**2))
    kernel = np.outer(line, line)
    return kernel / kernel.sum()


def estimate_spectral_norm(
    op: LinearMap, tol: float = 1e-10, max_iter: int = 5000, seed: int = 0
) -> float:
    """Estimate ``||op||`` by power iteration on ``op^T op``.

    Starts from a seeded random vector and stops once successive Rayleigh
    estimates of the top singular value differ by less than ``tol``, or
    after ``max_iter`` sweeps. A zero operator yields 0.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.domain_dim)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iter):
        av = op.apply(v)
        new_estimate = float(np.linalg.norm(av))
        if new_estimate == 0.0:
            return 0.0
        w = op.adjoint(av)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(new_estimate - estimate) < tol:
            return new_estimate
        estimate = new_estimate
    return estimate


def local_curvature(op: LinearMap, x_new, x_old) -> float | None:
    """Norm-free local estimate ``||op(x_new) - op(x_old)|| / ||x_new - x_old||``.

    Returns ``None`` when the two points coincide exactly, where the ratio
    is undefined. The value never exceeds the operator norm.
    """
    x_new = op._check_domain(x_new)
    x_old = op._check_domain(x_old)
    denom = np.linalg.norm(x_new - x_old)
    if denom == 0.0:
        return None
    return float(np.linalg.norm(op.apply(x_new) - op.apply(x_old)) / denom)
