"""Deterministic SVG report plots."""
