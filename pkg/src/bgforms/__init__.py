"""Formal collar series for the Hodge Laplacian on forms and the conformal operators they define."""

__version__ = "0.1.0"
