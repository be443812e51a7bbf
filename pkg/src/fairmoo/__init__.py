"""Fairness-aware multi-objective fine-tuning on a toy region-masked diffusion task."""

__version__ = "0.1.0"
