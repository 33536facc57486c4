"""Figure construction from experiment CSV files.

Two figure kinds cover all the experiment outputs:

* ``lines-per-method`` renders a long-form ``iteration, method, value``
  CSV (the ESS-per-gradient and MSE convergence files) as one line per
  method.
* ``scatter-grid`` renders a ``method, x, y`` CSV (the 2-d sample dumps)
  as one panel per method.

Reading is strictly read-only and every parse failure names the offending
file so batch invocations stay debuggable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = [
    "FIGURE_KINDS",
    "LONG_FORM_HEADER",
    "SCATTER_HEADER",
    "FigureSpec",
    "InputDataError",
    "read_long_form",
    "read_scatter",
    "build_lines_figure",
    "build_scatter_grid",
    "render",
]

FIGURE_KINDS = ("lines-per-method", "scatter-grid")
LONG_FORM_HEADER = ["iteration", "method", "value"]
SCATTER_HEADER = ["method", "x", "y"]


class InputDataError(ValueError):
    """A CSV input is missing, malformed, or empty; the message names it."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure to produce: input CSV, kind, scale flags, output path."""

    input_path: Path
    kind: str
    output_path: Path
    log_y: bool = False

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; expected one of "
                f"{', '.join(FIGURE_KINDS)}")


def _read_rows(path: Path, header: list[str]) -> list[list[str]]:
    """All data rows of ``path``, validated against the expected header."""
    try:
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise InputDataError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows:
        raise InputDataError(f"{path} is empty")
    if rows[0] != header:
        raise InputDataError(
            f"{path} has header {rows[0]!r}, expected {header!r}")
    body = rows[1:]
    if not body:
        raise InputDataError(f"{path} contains no data rows")
    for number, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise InputDataError(
                f"{path} line {number} has {len(row)} fields, "
                f"expected {len(header)}")
    return body


def _parse_float(path: Path, line: int, text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise InputDataError(f"{path} line {line}: bad number {text!r}") from exc


def read_long_form(path: Path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Parse an ``iteration, method, value`` CSV.

    Returns per-method (iterations, values) arrays with methods in first-
    appearance order.
    """
    series: dict[str, tuple[list[float], list[float]]] = {}
    for number, (iteration, method, value) in enumerate(
            _read_rows(path, LONG_FORM_HEADER), start=2):
        xs, ys = series.setdefault(method, ([], []))
        xs.append(_parse_float(path, number, iteration))
        ys.append(_parse_float(path, number, value))
    return {method: (np.asarray(xs), np.asarray(ys))
            for method, (xs, ys) in series.items()}


def read_scatter(path: Path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Parse a ``method, x, y`` CSV into per-method coordinate arrays."""
    series: dict[str, tuple[list[float], list[float]]] = {}
    for number, (method, x, y) in enumerate(
            _read_rows(path, SCATTER_HEADER), start=2):
        xs, ys = series.setdefault(method, ([], []))
        xs.append(_parse_float(path, number, x))
        ys.append(_parse_float(path, number, y))
    return {method: (np.asarray(xs), np.asarray(ys))
            for method, (xs, ys) in series.items()}


def _finite(xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keep = np.isfinite(xs) & np.isfinite(ys)
    return xs[keep], ys[keep]


def build_lines_figure(data: dict[str, tuple[np.ndarray, np.ndarray]],
                       y_label: str, log_y: bool = False) -> plt.Figure:
    """One line per method; the legend lists exactly the method names.

    Non-finite values (a method can legitimately log NaN, e.g. a
    gradient-free proposal has no per-gradient efficiency) are dropped
    point-wise rather than breaking the line.
    """
    fig, ax = plt.subplots(figsize=(8.0, 5.0))
    for method, (xs, ys) in data.items():
        xs, ys = _finite(xs, ys)
        ax.plot(xs, ys, label=method, linewidth=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel(y_label)
    if log_y:
        ax.set_yscale("log")
    ax.legend(loc="best", fontsize="small", ncols=2)
    fig.tight_layout()
    return fig


def build_scatter_grid(data: dict[str, tuple[np.ndarray, np.ndarray]]) -> plt.Figure:
    """One scatter panel per method, titled with the method name."""
    n = len(data)
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 3.0 * rows),
                             squeeze=False)
    flat = axes.ravel()
    for ax, (method, (xs, ys)) in zip(flat, data.items()):
        xs, ys = _finite(xs, ys)
        ax.scatter(xs, ys, s=4, alpha=0.5)
        ax.set_title(method, fontsize="small")
    for ax in flat[n:]:
        ax.set_axis_off()
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> None:
    """Read the described input CSV, build the figure, write the image."""
    if spec.kind == "lines-per-method":
        data = read_long_form(spec.input_path)
        fig = build_lines_figure(data, y_label=spec.input_path.stem,
                                 log_y=spec.log_y)
    else:
        data = read_scatter(spec.input_path)
        fig = build_scatter_grid(data)
    try:
        fig.savefig(spec.output_path)
    finally:
        plt.close(fig)
