"""Gaze analytics: predicting per-window visit intention over page AOIs."""

__version__ = "0.1.0"

from . import balance, classify, features, folds, gaze, io, metrics, selection, synth, windows

__all__ = [
    "__version__",
    "balance",
    "classify",
    "features",
    "folds",
    "gaze",
    "io",
    "metrics",
    "selection",
    "synth",
    "windows",
]
