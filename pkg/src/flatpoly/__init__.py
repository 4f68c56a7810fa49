"""Flat polynomials in eigenfunction spaces: norms, Levy means, convex-geometry
screens and searches for small ``L_p / L_q`` ratios in coefficient subspaces."""

__version__ = "0.1.0"
