"""Seeded generators for the four benchmark problems.

Every generator is a pure function of its parameters and seed: the same
inputs reproduce bit-identical problem data. Randomness goes through one
``numpy.random.default_rng(seed)`` generator per problem (PCG64; normal
variates via numpy's ziggurat ``standard_normal``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

import numpy as np

from .linops import (
    BlurPeriodic,
    DenseMap,
    Grad2dPeriodic,
    Identity,
    NegatedIdentity,
    OTMarginal,
    gaussian_psf,
)
from .prox import GroupL21, L1, LinearNonneg, QuadData, SquaredL2
from .solver import SplitProblem

__all__ = [
    "DEFAULT_PARAMS",
    "ProblemSpec",
    "gen_lasso",
    "gen_rof",
    "gen_deblur",
    "gen_uot",
    "generate",
    "piecewise_phantom",
    "shepp_logan",
    "save_problem",
    "load_problem",
]

DEFAULT_PARAMS = MappingProxyType(
    {
        "lasso": MappingProxyType({"m": 200, "n": 1000, "lam": 0.1}),
        "rof": MappingProxyType(
            {"height": 256, "width": 256, "noise": 0.08, "lam": 0.1}
        ),
        "deblur": MappingProxyType(
            {
                "height": 512,
                "width": 512,
                "psf_size": 15,
                "psf_sigma": 2.0,
                "noise": 0.02,
                "lam": 0.048,
            }
        ),
        "uot": MappingProxyType(
            {"n_source": 30, "n_target": 30, "gamma": 1.0}
        ),
    }
)

_SIZE_KEYS = ("m", "n", "height", "width", "psf_size", "n_source", "n_target")


@dataclass(frozen=True)
class ProblemSpec:
    """A problem kind plus its parameters and seed.

    Unspecified parameters fall back to the benchmark-scale defaults in
    ``DEFAULT_PARAMS``.
    """

    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DEFAULT_PARAMS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        merged = dict(DEFAULT_PARAMS[self.kind])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ValueError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        merged.update(self.params)
        for key in _SIZE_KEYS:
            if key in merged and merged[key] < 1:
                raise ValueError(f"{key} must be positive")
        if merged.get("lam", 1.0) <= 0:
            raise ValueError("lam must be positive")
        if merged.get("gamma", 1.0) <= 0:
            raise ValueError("gamma must be positive")
        if merged.get("noise", 0.0) < 0:
            raise ValueError("noise must be nonnegative")
        object.__setattr__(self, "params", merged)

    def generate(self) -> SplitProblem:
        return generate(self)


def generate(spec: ProblemSpec) -> SplitProblem:
    p = spec.params
    if spec.kind == "lasso":
        return gen_lasso(p["m"], p["n"], p["lam"], spec.seed)
    if spec.kind == "rof":
        return gen_rof(p["height"], p["width"], p["noise"], p["lam"], spec.seed)
    if spec.kind == "deblur":
        return gen_deblur(
            p["height"],
            p["width"],
            p["psf_size"],
            p["psf_sigma"],
            p["noise"],
            p["lam"],
            spec.seed,
        )
    if spec.kind == "uot":
        return gen_uot(p["n_source"], p["n_target"], p["gamma"], spec.seed)
    raise ValueError(f"unknown problem kind {spec.kind!r}")


def gen_lasso(m: int, n: int, lam: float, seed: int = 0) -> SplitProblem:
    """Sparse regression split as ``lam ||x||_1 + 0.5 ||w - d||^2, Ax + w = b``.

    Sensing entries are N(0, 1/n); the reference vector d is standard
    normal with entries zeroed independently with probability 0.8; the
    measurements ``b = A x_true + d`` make ``(x_true, d)`` exactly feasible.
    """
    rng = np.random.default_rng(seed)
    sensing = rng.standard_normal((m, n)) / np.sqrt(n)
    x_true = rng.standard_normal(n)
    d = rng.standard_normal(m)
    d[rng.random(m) < 0.8] = 0.0
    b = sensing @ x_true + d
    return SplitProblem(
        g=L1(lam, n),
        f=SquaredL2(d),
        A=DenseMap(sensing),
        B=Identity(m),
        b=b,
        x_true=x_true,
        kind="lasso",
        extras={"m": m, "n": n, "lam": lam, "seed": seed},
    )


def piecewise_phantom(height: int, width: int) -> np.ndarray:
    """Fixed piecewise-constant test image in [0, 1].

    Background 0.2, two axis-aligned rectangles (0.8 and 0.5) and a bright
    centered disk, all at fixed relative positions so metrics are
    reproducible across sizes.
    """
    img = np.full((height, width), 0.2)
    img[
        int(0.15 * height): int(0.45 * height),
        int(0.20 * width): int(0.60 * width),
    ] = 0.8
    img[
        int(0.55 * height): int(0.85 * height),
        int(0.30 * width): int(0.70 * width),
    ] = 0.5
    rows, cols = np.ogrid[:height, :width]
    radius = 0.12 * min(height, width)
    disk = (rows - height / 2.0) ** 2 + (cols - width / 2.0) ** 2 <= radius**2
    img[disk] = 1.0
    return img


def gen_rof(
    height: int, width: int, noise: float, lam: float, seed: int = 0
) -> SplitProblem:
    """TV denoising split as ``0.5 ||x - c||^2 + lam ||w||_{2,1}, grad x - w = 0``."""
    rng = np.random.default_rng(seed)
    x_true = piecewise_phantom(height, width)
    noisy = np.clip(
        x_true + noise * rng.standard_normal((height, width)), 0.0, 1.0
    )
    n_pix = height * width
    return SplitProblem(
        g=SquaredL2(noisy.ravel()),
        f=GroupL21(lam, n_pix),
        A=Grad2dPeriodic(height, width),
        B=NegatedIdentity(2 * n_pix),
        b=np.zeros(2 * n_pix),
        x_true=x_true.ravel(),
        image_shape=(height, width),
        observation=noisy.ravel(),
        kind="rof",
        extras={
            "height": height,
            "width": width,
            "noise": noise,
            "lam": lam,
            "seed": seed,
        },
    )


# Modified Shepp-Logan intensity table (Toft): additive value, semi-axes
# a and b, center (x0, y0), rotation in degrees, on the [-1, 1]^2 square.
_SHEPP_LOGAN_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.10, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.10, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
)


def shepp_logan(height: int, width: int) -> np.ndarray:
    """Modified Shepp-Logan head phantom rendered analytically in [0, 1]."""
    xs = np.linspace(-1.0, 1.0, width)
    ys = np.linspace(1.0, -1.0, height)
    grid_x, grid_y = np.meshgrid(xs, ys)
    img = np.zeros((height, width))
    for value, a, b, x0, y0, phi_deg in _SHEPP_LOGAN_ELLIPSES:
        phi = np.deg2rad(phi_deg)
        dx = grid_x - x0
        dy = grid_y - y0
        rx = dx * np.cos(phi) + dy * np.sin(phi)
        ry = -dx * np.sin(phi) + dy * np.cos(phi)
        img[(rx / a) ** 2 + (ry / b) ** 2 <= 1.0] += value
    return np.clip(img, 0.0, 1.0)


def gen_deblur(
    height: int,
    width: int,
    psf_size: int,
    psf_sigma: float,
    noise: float,
    lam: float,
    seed: int = 0,
) -> SplitProblem:
    """TV deblurring split: ``0.5 ||Kx - obs||^2 + lam ||w||_{2,1}, grad x - w = 0``.

    K is periodic convolution with a normalized Gaussian kernel; the
    observation is the blurred phantom plus Gaussian noise.
    """
    if psf_size % 2 == 0:
        raise ValueError("psf_size must be odd")
    rng = np.random.default_rng(seed)
    x_true = shepp_logan(height, width).ravel()
    blur = BlurPeriodic(height, width, gaussian_psf(psf_size, psf_sigma))
    observed = blur.apply(x_true) + noise * rng.standard_normal(height * width)
    n_pix = height * width
    return SplitProblem(
        g=QuadData(blur, observed),
        f=GroupL21(lam, n_pix),
        A=Grad2dPeriodic(height, width),
        B=NegatedIdentity(2 * n_pix),
        b=np.zeros(2 * n_pix),
        x_true=x_true,
        image_shape=(height, width),
        observation=observed,
        kind="deblur",
        extras={
            "height": height,
            "width": width,
            "psf_size": psf_size,
            "psf_sigma": psf_sigma,
            "noise": noise,
            "lam": lam,
            "seed": seed,
        },
    )


def gen_uot(
    n_source: int, n_target: int, gamma: float, seed: int = 0
) -> SplitProblem:
    """Unbalanced transport split with a squared penalty on the marginals.

    ``<c, x>`` over nonnegative plans plus ``(gamma/2) ||w||^2`` subject to
    ``Ax + w`` matching the stacked histograms. The cost is quadratic,
    ``C_ij = (s_i - t_j)^2`` on uniform grids over [0, 1]; the histograms
    are uniform draws normalized onto the simplex.
    """
    if n_source < 2 or n_target < 2:
        raise ValueError("marginal sizes must be at least 2")
    rng = np.random.default_rng(seed)
    s = np.linspace(0.0, 1.0, n_source)
    t = np.linspace(0.0, 1.0, n_target)
    cost = (s[:, None] - t[None, :]) ** 2
    hist_a = rng.random(n_source)
    hist_a /= hist_a.sum()
    hist_b = rng.random(n_target)
    hist_b /= hist_b.sum()
    stacked = np.concatenate([hist_a, hist_b])
    return SplitProblem(
        g=LinearNonneg(cost.ravel()),
        f=SquaredL2(np.zeros(n_source + n_target), weight=gamma),
        A=OTMarginal(n_source, n_target),
        B=Identity(n_source + n_target),
        b=stacked,
        kind="uot",
        extras={
            "n_source": n_source,
            "n_target": n_target,
            "gamma": gamma,
            "seed": seed,
            "hist_a": hist_a,
            "hist_b": hist_b,
        },
    )


def _pack(arr) -> dict:
    arr = np.asarray(arr, dtype=float)
    return {"shape": list(arr.shape), "data": arr.ravel().tolist()}


def _unpack(blob) -> np.ndarray:
    return np.asarray(blob["data"], dtype=float).reshape(blob["shape"])


def save_problem(problem: SplitProblem, path) -> Path:
    """Serialize a generated problem to a self-describing JSON container.

    Arrays are stored as flat row-major lists with shape headers, enough
    to rebuild the problem without re-running the generator.
    """
    params = {
        k: v for k, v in problem.extras.items() if not isinstance(v, np.ndarray)
    }
    doc = {"kind": problem.kind, "params": params, "arrays": {}}
    arrays = doc["arrays"]
    if problem.kind == "lasso":
        arrays["sensing"] = _pack(problem.A.matrix)
        arrays["d"] = _pack(problem.f.shift)
        arrays["b"] = _pack(problem.b)
        arrays["x_true"] = _pack(problem.x_true)
    elif problem.kind == "rof":
        arrays["noisy"] = _pack(problem.observation)
        arrays["x_true"] = _pack(problem.x_true)
    elif problem.kind == "deblur":
        arrays["kernel"] = _pack(problem.g.op.kernel)
        arrays["observed"] = _pack(problem.observation)
        arrays["x_true"] = _pack(problem.x_true)
    elif problem.kind == "uot":
        arrays["cost"] = _pack(problem.g.cost)
        arrays["hist_a"] = _pack(problem.extras["hist_a"])
        arrays["hist_b"] = _pack(problem.extras["hist_b"])
    else:
        raise ValueError(f"cannot serialize problem kind {problem.kind!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        json.dump(doc, fh)
    return path


def load_problem(path) -> SplitProblem:
    """Rebuild a problem saved by :func:`save_problem`."""
    with Path(path).open() as fh:
        doc = json.load(fh)
    kind = doc["kind"]
    params = doc["params"]
    arrays = {name: _unpack(blob) for name, blob in doc["arrays"].items()}
    if kind == "lasso":
        return SplitProblem(
            g=L1(params["lam"], params["n"]),
            f=SquaredL2(arrays["d"].ravel()),
            A=DenseMap(arrays["sensing"]),
            B=Identity(params["m"]),
            b=arrays["b"].ravel(),
            x_true=arrays["x_true"].ravel(),
            kind="lasso",
            extras=params,
        )
    if kind == "rof":
        h, w = params["height"], params["width"]
        return SplitProblem(
            g=SquaredL2(arrays["noisy"].ravel()),
            f=GroupL21(params["lam"], h * w),
            A=Grad2dPeriodic(h, w),
            B=NegatedIdentity(2 * h * w),
            b=np.zeros(2 * h * w),
            x_true=arrays["x_true"].ravel(),
            image_shape=(h, w),
            observation=arrays["noisy"].ravel(),
            kind="rof",
            extras=params,
        )
    if kind == "deblur":
        h, w = params["height"], params["width"]
        blur = BlurPeriodic(h, w, arrays["kernel"])
        return SplitProblem(
            g=QuadData(blur, arrays["observed"].ravel()),
            f=GroupL21(params["lam"], h * w),
            A=Grad2dPeriodic(h, w),
            B=NegatedIdentity(2 * h * w),
            b=np.zeros(2 * h * w),
            x_true=arrays["x_true"].ravel(),
            image_shape=(h, w),
            observation=arrays["observed"].ravel(),
            kind="deblur",
            extras=params,
        )
    if kind == "uot":
        n_s, n_t = params["n_source"], params["n_target"]
        hist_a = arrays["hist_a"].ravel()
        hist_b = arrays["hist_b"].ravel()
        return SplitProblem(
            g=LinearNonneg(arrays["cost"].ravel()),
            f=SquaredL2(np.zeros(n_s + n_t), weight=params["gamma"]),
            A=OTMarginal(n_s, n_t),
            B=Identity(n_s + n_t),
            b=np.concatenate([hist_a, hist_b]),
            kind="uot",
            extras={**params, "hist_a": hist_a, "hist_b": hist_b},
        )
    raise ValueError(f"cannot load problem kind {kind!r}")
