"""Time-balanced ranking of items in bipartite rating networks."""

__version__ = "0.1.0"
