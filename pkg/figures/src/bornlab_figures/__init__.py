"""bornlab-figures: render paper-style figures from bornlab CSV logs."""

from .render import FIGURE_KINDS, FigureSpec, SchemaError, build_figure, render

__all__ = ["FIGURE_KINDS", "FigureSpec", "SchemaError", "build_figure", "render"]
