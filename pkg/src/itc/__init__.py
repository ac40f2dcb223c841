"""Interaction-tree compiler workbench."""

__version__ = "0.1.0"
