"""Infer plausible node mobility from wireless contact traces."""

__version__ = "0.1.0"
