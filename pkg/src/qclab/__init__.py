"""Numerical experiments on superlevel sets of positive solutions of elliptic problems."""

__version__ = "0.1.0"
