"""Numerical toolkit for two-person zero-sum differential games with unbounded controls."""

__version__ = "0.1.0"
