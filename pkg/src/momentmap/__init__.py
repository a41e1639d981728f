"""Moment-map equation solvers.

Subpackages cover dense Hermitian linear algebra (:mod:`momentmap.linalg`),
quiver representations (:mod:`momentmap.quiver`), King's equation and its
Hamiltonian reformulations (:mod:`momentmap.moment`, :mod:`momentmap.cyclic`),
the Kempf-Ness metric flow (:mod:`momentmap.solver`), deformed ADHM systems
(:mod:`momentmap.adhm`), exact normal-ordered Fock algebra (:mod:`momentmap.fock`),
and finite Nekrasov truncations (:mod:`momentmap.nekrasov`).  The ``momentmap``
console script exposes the batch CLI.
"""

__version__ = "0.1.0"

from .errors import (
    ConsistencyError,
    MomentMapError,
    NumericError,
    ParseError,
    SolverError,
    ValidationError,
)

__all__ = [
    "ConsistencyError",
    "MomentMapError",
    "NumericError",
    "ParseError",
    "SolverError",
    "ValidationError",
    "__version__",
]
