"""Figure regeneration from multilevel Monte Carlo CSV tables."""

from .figures import FigureSpec, plot_cost_sweep, plot_level_stats

__all__ = ["FigureSpec", "plot_level_stats", "plot_cost_sweep"]
__version__ = "0.1.0"
