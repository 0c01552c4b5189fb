"""liekit: matrix Lie groups, Lie algebras and their lattices."""

from liekit.config import DEFAULT_TOL, Tolerances

__version__ = "0.1.0"

__all__ = ["DEFAULT_TOL", "Tolerances", "__version__"]
