"""Variational tools for twist maps and convex billiards: orbits, generating
functions, second variation, Riccati certificates, Lagrangian order and
wave-front curvature."""

__version__ = "0.1.0"
