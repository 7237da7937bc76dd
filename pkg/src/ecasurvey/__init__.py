"""Geostatistical processing and simulation of robotic soil ECa surveys."""

__version__ = "0.1.0"
