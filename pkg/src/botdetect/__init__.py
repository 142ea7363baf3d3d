"""Behavioral bot detection for Ethereum externally-owned accounts."""

__version__ = "0.1.0"
