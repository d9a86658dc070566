"""Temporal Saliency Detection forecaster with a numpy autodiff core."""

__version__ = "0.1.0"
