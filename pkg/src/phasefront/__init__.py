"""Multi-objective compiler phase-ordering toolkit."""

__version__ = "0.1.0"
