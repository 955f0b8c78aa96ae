"""Energy-efficient small-cell deployment: analytic model, optimizer and Monte Carlo oracle."""

__version__ = "0.1.0"
