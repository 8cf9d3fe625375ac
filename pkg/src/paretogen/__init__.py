"""Reference Pareto-front generation and tokenization for constrained
bi-objective convex problems."""

__version__ = "0.1.0"
