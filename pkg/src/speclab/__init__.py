"""Dirichlet spectral geometry on planar polygons: meshes, eigenpairs, nodal sets, shape derivatives."""
from . import eigensolve, geometry, mesh, nodal, reference, shapecalc
from .eigensolve import SpectralResult, assemble, multiplicity_cluster, rayleigh_quotient, solve_lowest
from .errors import (
    ClusteredEigenvalue,
    CrossingError,
    GeometryError,
    InvalidConstraints,
    InvalidInput,
    InvalidParameter,
    MeshTooCoarse,
    NumericError,
    QualityWarning,
    SpecLabError,
)
from .geometry import (
    DomainSpec,
    DumbbellParams,
    HHNParams,
    PerturbationField,
    apply_perturbation,
    convexity_check,
    diameter,
    inradius_domain,
    make_disk,
    make_dumbbell,
    make_hhn,
    make_narrow_convex,
    make_rectangle,
)
from .mesh import TriMesh, refine, triangulate

__version__ = "0.1.0"

__all__ = [
    "eigensolve",
    "geometry",
    "mesh",
    "nodal",
    "reference",
    "shapecalc",
    "SpectralResult",
    "assemble",
    "multiplicity_cluster",
    "rayleigh_quotient",
    "solve_lowest",
    "ClusteredEigenvalue",
    "CrossingError",
    "GeometryError",
    "InvalidConstraints",
    "InvalidInput",
    "InvalidParameter",
    "MeshTooCoarse",
    "NumericError",
    "QualityWarning",
    "SpecLabError",
    "DomainSpec",
    "DumbbellParams",
    "HHNParams",
    "PerturbationField",
    "apply_perturbation",
    "convexity_check",
    "diameter",
    "inradius_domain",
    "make_disk",
    "make_dumbbell",
    "make_hhn",
    "make_narrow_convex",
    "make_rectangle",
    "TriMesh",
    "refine",
    "triangulate",
]
