"""Passive-DNS detection and generator fingerprinting of Slow Drip DDoS attacks."""

__version__ = "0.1.0"
