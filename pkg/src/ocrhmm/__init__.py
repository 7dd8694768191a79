"""Handwritten letter recognition with word-level HMM error correction."""

__version__ = "0.1.0"
