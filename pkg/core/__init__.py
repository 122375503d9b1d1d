"""Spatially-correlative structure losses on numpy."""
