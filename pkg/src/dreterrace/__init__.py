"""Degenerate random environments: terraces, pivotal sites and critical-point scans."""

__version__ = "0.1.0"
