"""Hierarchical-latent generator for time-series anomaly detection.

Arrays are time-major: shape ``(T, m)`` with NaN marking unobserved entries.
"""

from ._dghl import (
    Config,
    Model,
    best_f1,
    occlusion_mask,
    point_adjust,
    synth,
)

__all__ = ["Config", "Model", "best_f1", "occlusion_mask", "point_adjust", "synth"]
