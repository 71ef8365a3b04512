"""Pairs estimator for causal-model evaluation under conditionally randomized experiments."""

__version__ = "0.1.0"
