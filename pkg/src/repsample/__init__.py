"""Representative spatial sampling with dual-objective simulated annealing."""

__version__ = "0.1.0"
