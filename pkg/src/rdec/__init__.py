"""Relaxation Deferred Correction time integrators of arbitrary order."""

__version__ = "0.1.0"
