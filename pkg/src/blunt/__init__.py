"""Adversarial-scheduling simulator for randomized programs over shared objects."""

from __future__ import annotations

__version__ = "0.1.0"
