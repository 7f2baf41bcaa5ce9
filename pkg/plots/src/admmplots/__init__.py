"""Post-hoc figure generation from solver trace files."""

from .figures import FIGURE_KINDS, FigureError, FigureSpec, load_runs, render

__version__ = "0.1.0"
