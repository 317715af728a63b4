"""Numerical toolkit for magnetic Lagrangian systems and symmetry reduction
on product configuration spaces, including reduction by stages for
semi-direct product groups."""

__version__ = "0.1.0"
