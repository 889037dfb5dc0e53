"""Discrete differential forms, boundary conditions and wave propagators on simplicial complexes."""

from .boundary import BCKind, ConstrainedOperator, build_constrained
from .cohomology import betti_table, cohomology_report, harmonic_basis
from .dec import DiscreteForm, derham
from .errors import (
    BoundaryConditionError,
    CauchyformError,
    ConfigError,
    DegenerateSimplexError,
    DegreeError,
    InvalidSpecError,
    InvariantViolation,
    MeshParseError,
    PreconditionError,
)
from .mesh import MeshGeneratorSpec, SimplicialComplex, generate, generate_family, load, refine
from .propagator import GreenOperator, SpacetimeForm, TimeGrid, apply_green, eigendecompose

__version__ = "0.1.0"

__all__ = [
    "BCKind",
    "BoundaryConditionError",
    "CauchyformError",
    "ConfigError",
    "ConstrainedOperator",
    "DegenerateSimplexError",
    "DegreeError",
    "DiscreteForm",
    "GreenOperator",
    "InvalidSpecError",
    "InvariantViolation",
    "MeshGeneratorSpec",
    "MeshParseError",
    "PreconditionError",
    "SimplicialComplex",
    "SpacetimeForm",
    "TimeGrid",
    "apply_green",
    "betti_table",
    "build_constrained",
    "cohomology_report",
    "derham",
    "eigendecompose",
    "generate",
    "generate_family",
    "harmonic_basis",
    "load",
    "refine",
]
