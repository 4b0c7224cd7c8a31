"""Attribute-conditioned layout generation, ranking, and retargeting."""

__version__ = "0.1.0"
