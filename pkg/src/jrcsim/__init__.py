"""Bistatic joint radar-communication baseband simulator."""

__version__ = "0.1.0"
