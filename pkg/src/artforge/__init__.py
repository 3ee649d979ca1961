"""Toolkit that turns segmented static meshes into articulated, simulation-ready assets."""

__version__ = "0.1.0"
