"""Fishing activity mapping from AIS speed profiles.

Per-vessel two-component speed mixtures separate fishing from steaming;
fishing points are counted on a 1 km equal-area grid alongside a reception
coverage layer built from cruising traffic.
"""

__version__ = "0.1.0"
