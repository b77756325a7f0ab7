"""Quantitative static elastography by iterative regularization.

Reconstructs spatially varying Lame parameters from internal displacement
data with Landweber-type iterations on a P1 finite element discretization.
"""

from elastinv.mesh import BoundaryTag, TriMesh, build_unit_square_mesh, locate_subdomain_vertices
from elastinv.operator import ElasticityOperator, LameField, ProblemData, SmoothingConfig
from elastinv.phantom import BumpSpec, PhantomSpec, compose_phantom

__all__ = [
    "BoundaryTag",
    "TriMesh",
    "build_unit_square_mesh",
    "locate_subdomain_vertices",
    "ElasticityOperator",
    "LameField",
    "ProblemData",
    "SmoothingConfig",
    "BumpSpec",
    "PhantomSpec",
    "compose_phantom",
]

__version__ = "0.1.0"
