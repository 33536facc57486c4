"""Rendering of quasismc experiment CSVs into publication-style figures."""

from .figures import (
    FIGURE_KINDS,
    LONG_FORM_HEADER,
    SCATTER_HEADER,
    FigureSpec,
    InputDataError,
    build_lines_figure,
    build_scatter_grid,
    read_long_form,
    read_scatter,
    render,
)

__all__ = [
    "FIGURE_KINDS",
    "LONG_FORM_HEADER",
    "SCATTER_HEADER",
    "FigureSpec",
    "InputDataError",
    "build_lines_figure",
    "build_scatter_grid",
    "read_long_form",
    "read_scatter",
    "render",
]

__version__ = "0.1.0"
