"""Figure rendering from solver trace directories.

Inputs are the files the solver harness writes: per-run ``<name>.csv``
(fixed column schema) and ``<name>.json`` (config snapshot and final
iterates), an optional ``problem.json`` with the serialized problem data,
and ``summary.json``. Nothing here imports the solver package; the files
are the interface.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGURE_KINDS = ("convergence", "image-grid", "plan-heatmap")

CONVERGENCE_COLUMNS = ("k", "rel_gap", "fes_gap", "psnr")

__all__ = ["FigureSpec", "FigureError", "render", "load_runs"]


class FigureError(RuntimeError):
    """Raised when inputs are missing, malformed, or empty."""


@dataclass(frozen=True)
class FigureSpec:
    """What to render: a trace directory, a figure kind, an output path."""

    input_dir: Path
    kind: str
    out_path: Path
    log_rel_gap: bool = True
    log_fes_gap: bool = True

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise FigureError(
                f"unknown figure kind {self.kind!r}; expected one of "
                f"{FIGURE_KINDS}"
            )
        object.__setattr__(self, "input_dir", Path(self.input_dir))
        object.__setattr__(self, "out_path", Path(self.out_path))


@dataclass
class RunData:
    """One run's parsed trace: metric columns plus its meta document."""

    name: str
    columns: dict[str, list[float | None]]
    meta: dict


def _read_csv(path: Path) -> dict[str, list[float | None]]:
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FigureError(f"{path.name}: empty file") from None
        for column in CONVERGENCE_COLUMNS:
            if column not in header:
                raise FigureError(f"{path.name}: missing column {column!r}")
        columns: dict[str, list[float | None]] = {name: [] for name in header}
        for record in reader:
            for name, cell in zip(header, record):
                columns[name].append(float(cell) if cell != "" else None)
    if not columns["k"]:
        raise FigureError(f"{path.name}: trace has no rows")
    return columns


def load_runs(input_dir: Path) -> list[RunData]:
    """Parse every run trace in a directory, sorted by name."""
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise FigureError(f"input directory {input_dir} does not exist")
    runs = []
    for csv_path in sorted(input_dir.glob("*.csv")):
        meta_path = csv_path.with_suffix(".json")
        meta = {}
        if meta_path.exists():
            with meta_path.open() as fh:
                meta = json.load(fh)
        name = meta.get("config", {}).get("name", csv_path.stem)
        runs.append(RunData(name=name, columns=_read_csv(csv_path), meta=meta))
    if not runs:
        raise FigureError(f"no trace CSV files found in {input_dir}")
    return runs


def _series(run: RunData, column: str):
    ks = [
        k for k, v in zip(run.columns["k"], run.columns[column]) if v is not None
    ]
    vals = [v for v in run.columns[column] if v is not None]
    return ks, vals


def _save(fig, out_path: Path):
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if out_path.suffix == ".svg":
        # Keep text as text, pin the id hash salt, and drop the creation
        # date so re-renders are byte-identical and labels stay searchable.
        rc = {"svg.fonttype": "none", "svg.hashsalt": "admmplots"}
        with plt.rc_context(rc):
            fig.savefig(out_path, metadata={"Date": None})
    else:
        fig.savefig(out_path)
    plt.close(fig)


def _render_convergence(spec: FigureSpec) -> Path:
    runs = load_runs(spec.input_dir)
    panels = []
    for column, label, log_scale in (
        ("rel_gap", "relative objective gap", spec.log_rel_gap),
        ("fes_gap", "feasibility residual", spec.log_fes_gap),
        ("psnr", "PSNR (dB)", False),
    ):
        if any(_series(run, column)[1] for run in runs):
            panels.append((column, label, log_scale))
    if not panels:
        raise FigureError("traces carry no plottable metric values")
    fig, axes = plt.subplots(
        1, len(panels), figsize=(4.2 * len(panels), 3.4), squeeze=False
    )
    for ax, (column, label, log_scale) in zip(axes[0], panels):
        for run in runs:
            ks, vals = _series(run, column)
            if not vals:
                continue
            if log_scale:
                # Log axes cannot show exact zeros; clip to a tiny floor.
                vals = [max(v, 1e-300) for v in vals]
                ax.set_yscale("log")
            ax.plot(ks, vals, label=run.name)
        ax.set_xlabel("iteration")
        ax.set_ylabel(label)
        ax.legend()
    fig.tight_layout()
    _save(fig, spec.out_path)
    return spec.out_path


def _unpack_array(blob) -> np.ndarray:
    return np.asarray(blob["data"], dtype=float).reshape(blob["shape"])


def _render_image_grid(spec: FigureSpec) -> Path:
    problem_path = spec.input_dir / "problem.json"
    if not problem_path.exists():
        raise FigureError(
            f"{problem_path} not found; the comparison must be saved with "
            "its problem data to render an image grid"
        )
    with problem_path.open() as fh:
        doc = json.load(fh)
    params = doc.get("params", {})
    try:
        shape = (int(params["height"]), int(params["width"]))
    except KeyError as exc:
        raise FigureError(f"problem.json lacks parameter {exc}") from None
    arrays = doc.get("arrays", {})
    tiles = []
    if "x_true" in arrays:
        tiles.append(("true", _unpack_array(arrays["x_true"]).reshape(shape)))
    for key, label in (("noisy", "observed"), ("observed", "observed")):
        if key in arrays:
            tiles.append((label, _unpack_array(arrays[key]).reshape(shape)))
            break
    runs = load_runs(spec.input_dir)
    for run in runs:
        final = run.meta.get("final_x")
        if final is None:
            raise FigureError(f"run {run.name}: no final iterate recorded")
        tiles.append((run.name, np.asarray(final, dtype=float).reshape(shape)))
    fig, axes = plt.subplots(
        1, len(tiles), figsize=(2.6 * len(tiles), 3.0), squeeze=False
    )
    for ax, (label, image) in zip(axes[0], tiles):
        ax.imshow(image, cmap="gray", vmin=0.0, vmax=1.0)
        ax.set_title(label)
        ax.set_axis_off()
    fig.tight_layout()
    _save(fig, spec.out_path)
    return spec.out_path


def _plan_shape(run: RunData, size: int) -> tuple[int, int]:
    problem = run.meta.get("config", {}).get("problem", {})
    if "n_source" in problem and "n_target" in problem:
        return int(problem["n_source"]), int(problem["n_target"])
    side = math.isqrt(size)
    if side * side != size:
        raise FigureError(
            f"run {run.name}: cannot infer the plan shape for {size} entries"
        )
    return side, side


def _render_plan_heatmap(spec: FigureSpec) -> Path:
    runs = load_runs(spec.input_dir)
    plans = []
    for run in runs:
        final = run.meta.get("final_x")
        if final is None:
            raise FigureError(f"run {run.name}: no final iterate recorded")
        final = np.asarray(final, dtype=float)
        plans.append((run.name, final.reshape(_plan_shape(run, final.size))))
    # All panels share one color scale so mass is comparable across runs.
    vmax = max(plan.max() for _, plan in plans)
    fig, axes = plt.subplots(
        1, len(plans), figsize=(3.4 * len(plans), 3.0), squeeze=False
    )
    last = None
    for ax, (label, plan) in zip(axes[0], plans):
        last = ax.imshow(plan, vmin=0.0, vmax=vmax)
        ax.set_title(label)
        ax.set_xlabel("target bin")
        ax.set_ylabel("source bin")
    fig.colorbar(last, ax=axes[0], fraction=0.046)
    _save(fig, spec.out_path)
    return spec.out_path


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the written path.

    Raises :class:`FigureError` (without writing anything) when the inputs
    are missing, empty, or lack required columns.
    """
    if spec.kind == "convergence":
        return _render_convergence(spec)
    if spec.kind == "image-grid":
        return _render_image_grid(spec)
    return _render_plan_heatmap(spec)
