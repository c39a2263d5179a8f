"""Spectral toolkit for drift Laplacians on triangulated surfaces.

The pipeline: build a mesh (`mesh`), pick a weight field (`field`),
assemble the weighted stiffness/mass pair (`assembly`), solve for the
low end of the spectrum (`eigensolve`), analyze nodal sets (`nodal`),
and check the spectral identities and bounds the pieces are supposed to
satisfy (`verify`).  The `driftlap` command wires the same steps to
config files; see `cli`.
"""

__version__ = "0.1.0"

from .assembly import AssemblyError, WeightedOperator, assemble
from .eigensolve import (SolveError, Spectrum, load_spectrum, save_spectrum,
                         smallest)
from .field import FieldError, ScalarField
from .mesh import (MeshError, TriMesh, disk, flat_torus, mesh_hash, rectangle,
                   refine, sphere, sphere_at_level)
from .nodal import (NodalAnalysis, SingularPoint, analyze,
                    detect_singular_points, render_svg)
from .verify import (CheckRecord, Instance, VerificationReport, VerifyError,
                     canonical_instances, format_report, run_verification,
                     save_report)

__all__ = [
    "AssemblyError", "CheckRecord", "FieldError", "Instance", "MeshError",
    "NodalAnalysis", "ScalarField", "SingularPoint", "SolveError",
    "Spectrum", "TriMesh", "VerificationReport", "VerifyError",
    "WeightedOperator", "__version__", "analyze", "assemble",
    "canonical_instances", "detect_singular_points", "disk", "flat_torus",
    "format_report", "load_spectrum", "mesh_hash", "rectangle", "refine",
    "render_svg", "run_verification", "save_report", "save_spectrum",
    "smallest", "sphere", "sphere_at_level",
]
