"""Relative-motion scenario generation and reconstruction evaluation for tumbling RSOs."""

__version__ = "0.1.0"
