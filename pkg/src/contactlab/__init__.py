"""Jet-based tensor calculus on contact Riemannian manifolds."""

__version__ = "0.1.0"
