"""Robust active learning with elastic weight consolidation under dynamic attacks."""

__version__ = "0.1.0"
