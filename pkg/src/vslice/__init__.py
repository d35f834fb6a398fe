"""Slicing for multi-use-case verticals: use-case specific vs. generic/sub network slicing."""

__version__ = "0.1.0"
