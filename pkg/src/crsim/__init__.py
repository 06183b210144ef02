"""Timed colored Petri net simulator of an IEEE 802.22 cognitive radio cell."""

__version__ = "0.1.0"
