"""Household electricity consumption tiers from pre-electrification imagery."""

__version__ = "0.1.0"
