"""Harmonic analysis for products g x g* of Polya ensembles with Hermitian matrices."""
__version__ = "0.1.0"
