"""Explicit-state analysis toolkit for networks of guarded-command agents."""

__version__ = "0.1.0"
