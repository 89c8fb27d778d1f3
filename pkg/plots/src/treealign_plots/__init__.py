from .render import fit_slope, main, render

__all__ = ["fit_slope", "main", "render"]
__version__ = "0.1.0"
