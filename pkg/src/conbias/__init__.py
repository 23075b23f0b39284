"""Confirmation-biased social learning on fixed networks."""
__version__ = "0.1.0"
