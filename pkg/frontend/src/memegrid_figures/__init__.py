"""Figure rendering for memegrid run outputs."""

from .io import FigureSpec
from .render import render_all

__all__ = ["FigureSpec", "render_all"]
__version__ = "0.1.0"
