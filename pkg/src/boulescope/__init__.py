"""Boulescope: a fully software petanque measurement jack and scoring stack."""

__version__ = "0.1.0"
