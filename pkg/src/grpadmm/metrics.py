"""Per-iteration metrics and run traces with CSV/JSON persistence.

The CSV schema is fixed: columns ``k,tau,sigma,objective,rel_gap,fes_gap,
ergodic_objective,psnr,time_ms`` in that order. ``psnr`` stays empty for
non-imaging problems and ``rel_gap`` stays empty until a comparison
back-fills it against the pooled best objective.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linops import Image2D

CSV_COLUMNS = (
    "k",
    "tau",
    "sigma",
    "objective",
    "rel_gap",
    "fes_gap",
    "ergodic_objective",
    "psnr",
    "time_ms",
)

__all__ = [
    "CSV_COLUMNS",
    "MetricsRow",
    "RunTrace",
    "objective",
    "fes_gap",
    "psnr",
]


def objective(problem, x, w) -> float:
    """Combined objective ``g(x) + f(w)``; infinities propagate."""
    return problem.g.eval(x) + problem.f.eval(w)


def fes_gap(problem, x, w) -> float:
    """Euclidean norm of the constraint violation ``Ax + Bw - b``."""
    return float(
        np.linalg.norm(problem.A.apply(x) + problem.B.apply(w) - problem.b)
    )


def psnr(image: Image2D, truth: Image2D) -> float:
    """Peak signal-to-noise ratio in dB against a ground truth in [0, 1].

    The candidate image is clipped to [0, 1] before evaluation; a perfect
    match returns ``inf``.
    """
    if (image.height, image.width) != (truth.height, truth.width):
        raise ValueError("images must share their shape")
    diff = np.clip(image.pixels, 0.0, 1.0) - truth.pixels
    mse = float(diff @ diff) / diff.size
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


@dataclass
class MetricsRow:
    """One sampled iteration of a run."""

    k: int
    tau: float
    sigma: float
    objective: float
    rel_gap: float | None
    fes_gap: float
    ergodic_objective: float
    psnr: float | None
    time_ms: float


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _parse_cell(text: str) -> float | None:
    return None if text == "" else float(text)


@dataclass(eq=False)
class RunTrace:
    """Everything recorded about one run.

    The metric rows go to ``<prefix>.csv``; the configuration snapshot,
    termination status, shrink events and optional final iterates go to
    ``<prefix>.json``.
    """

    config: dict
    rows: list[MetricsRow] = field(default_factory=list)
    status: str = "completed"
    shrink_iters: list[int] = field(default_factory=list)
    abort_info: dict | None = None
    tau_max_hit: bool = False
    final_x: np.ndarray | None = None
    final_w: np.ndarray | None = None

    def __eq__(self, other):
        if not isinstance(other, RunTrace):
            return NotImplemented
        return (
            self.config == other.config
            and self.rows == other.rows
            and self.status == other.status
            and self.shrink_iters == other.shrink_iters
            and self.abort_info == other.abort_info
            and self.tau_max_hit == other.tau_max_hit
            and _arrays_equal(self.final_x, other.final_x)
            and _arrays_equal(self.final_w, other.final_w)
        )

    @property
    def final_row(self) -> MetricsRow:
        if not self.rows:
            raise ValueError("trace has no rows")
        return self.rows[-1]

    def write_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in self.rows:
                writer.writerow(
                    [_format_cell(getattr(row, col)) for col in CSV_COLUMNS]
                )

    @staticmethod
    def read_csv(path) -> list[MetricsRow]:
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != CSV_COLUMNS:
                raise ValueError(f"unexpected CSV header {header}")
            rows = []
            for record in reader:
                cells = dict(zip(CSV_COLUMNS, record))
                rows.append(
                    MetricsRow(
                        k=int(cells["k"]),
                        tau=float(cells["tau"]),
                        sigma=float(cells["sigma"]),
                        objective=float(cells["objective"]),
                        rel_gap=_parse_cell(cells["rel_gap"]),
                        fes_gap=float(cells["fes_gap"]),
                        ergodic_objective=float(cells["ergodic_objective"]),
                        psnr=_parse_cell(cells["psnr"]),
                        time_ms=float(cells["time_ms"]),
                    )
                )
        return rows

    def save(self, prefix) -> tuple[Path, Path]:
        """Write ``<prefix>.csv`` and ``<prefix>.json``; returns the paths."""
        prefix = Path(prefix)
        csv_path = prefix.with_suffix(".csv")
        meta_path = prefix.with_suffix(".json")
        self.write_csv(csv_path)
        meta = {
            "config": self.config,
            "status": self.status,
            "shrink_iters": self.shrink_iters,
            "abort_info": self.abort_info,
            "tau_max_hit": self.tau_max_hit,
            "final_x": None if self.final_x is None else self.final_x.tolist(),
            "final_w": None if self.final_w is None else self.final_w.tolist(),
        }
        meta_path.parent.mkdir(parents=True, exist_ok=True)
        with meta_path.open("w") as fh:
            json.dump(meta, fh)
        return csv_path, meta_path

    @classmethod
    def load(cls, prefix) -> "RunTrace":
        prefix = Path(prefix)
        rows = cls.read_csv(prefix.with_suffix(".csv"))
        with prefix.with_suffix(".json").open() as fh:
            meta = json.load(fh)
        return cls(
            config=meta["config"],
            rows=rows,
            status=meta["status"],
            shrink_iters=list(meta["shrink_iters"]),
            abort_info=meta["abort_info"],
            tau_max_hit=meta["tau_max_hit"],
            final_x=_maybe_array(meta["final_x"]),
            final_w=_maybe_array(meta["final_w"]),
        )


def _maybe_array(values):
    return None if values is None else np.asarray(values, dtype=float)


def _arrays_equal(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return np.array_equal(a, b)
