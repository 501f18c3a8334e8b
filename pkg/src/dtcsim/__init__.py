"""Driven-dissipative collective spin ensembles: exact permutation-symmetric
Lindblad dynamics, two-time correlators, mean-field and cumulant closures."""

__version__ = "0.1.0"

from .liouvillian import ModelParams, build_liouvillian  # noqa: E402

__all__ = ["ModelParams", "build_liouvillian", "__version__"]
