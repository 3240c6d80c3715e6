"""Pseudospectral laboratory for the intermediate long wave equation and its
shallow-water (KdV) limit on the torus."""

__version__ = "0.1.0"
