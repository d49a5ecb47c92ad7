"""Weakly supervised detection with segmentation-guided curriculum learning."""

__version__ = "0.1.0"
