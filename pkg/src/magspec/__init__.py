"""magspec: spectra of magnetic Laplacians on model domains and certified eigenvalue bounds."""

__version__ = "0.1.0"

from .bounds import (  # noqa: E402
    BoundReport,
    lower_bound_convex_annulus,
    lower_bound_cylinder,
    shikegawa_check,
    upper_bound_closed,
    upper_bound_general,
)
from .closed_form import circle_spectrum, product_cylinder_lambda1, torus_spectrum  # noqa: E402
from .discretize import AssembledOperator, assemble_circle, assemble_magnetic, assemble_mixed  # noqa: E402
from .eigensolve import Spectrum, rayleigh, smallest_eigs  # noqa: E402
from .errors import MagspecError  # noqa: E402
from .forms import FluxVector, HarmonicBasis, LinkField, OneForm  # noqa: E402
from .grid import Grid2D  # noqa: E402

__all__ = [
    "AssembledOperator",
    "BoundReport",
    "FluxVector",
    "Grid2D",
    "HarmonicBasis",
    "LinkField",
    "MagspecError",
    "OneForm",
    "Spectrum",
    "assemble_circle",
    "assemble_magnetic",
    "assemble_mixed",
    "circle_spectrum",
    "lower_bound_convex_annulus",
    "lower_bound_cylinder",
    "product_cylinder_lambda1",
    "rayleigh",
    "shikegawa_check",
    "smallest_eigs",
    "torus_spectrum",
    "upper_bound_closed",
    "upper_bound_general",
]
