"""Semiclassical periodic-orbit sum for the microcanonical OTOC near an index-1 saddle."""

__version__ = "0.1.0"
