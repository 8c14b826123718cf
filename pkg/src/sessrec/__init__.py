"""Session-based next-item recommendation with two-level graph attention."""

__version__ = "0.1.0"
