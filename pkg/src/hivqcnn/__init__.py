"""Quantum CNN classifiers with neural quantum embeddings on a numpy simulator."""
from __future__ import annotations

__version__ = "0.1.0"
