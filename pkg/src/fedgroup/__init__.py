"""Similarity-grouped noisy aggregation for federated spatial range counting."""

__version__ = "0.1.0"
