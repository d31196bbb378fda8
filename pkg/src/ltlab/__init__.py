"""ltlab — finite-rank Lieb–Thirring and CLR constants by direct computation.

Modules
-------
grid
    Grids, sampled potentials and quadrature.
schrodinger
    Bound states of ``-Laplacian - V`` on a line or radial grid.
functional
    The Lieb–Thirring quotient and the one-level reference constant.
scf
    Self-consistent Euler–Lagrange iteration for optimal potentials.
kdv
    KdV multi-solitons, their exact spectra and the soliton manifold.
birman_schwinger
    The critical case ``gamma = 0`` in ``d >= 3``.
"""

__version__ = "0.1.0"

from .birman_schwinger import BirmanSchwingerResult, inversion_transform, mu_spectrum
from .errors import (
    BreakdownError,
    ChannelExhaustionError,
    DegenerateInputError,
    ExtrapolationWarning,
    InvalidInputError,
    LTLabError,
    NumericalFailureError,
)
from .functional import RieszReport, gns_reference_L1, riesz_ratio, subadditivity_check
from .grid import Grid1D, PotentialField, RadialGrid, lp_norm_power, mass_profile, rescale
from .kdv import ManifoldFit, SolitonSpec, exact_spectrum, manifold_distance, soliton_profile
from .schrodinger import SpectrumResult, lowest_eigenpairs, negative_count
from .scf import ScfConfig, ScfResult, binding_correction, euler_lagrange_map, run

__all__ = [
    "__version__",
    "BirmanSchwingerResult",
    "BreakdownError",
    "ChannelExhaustionError",
    "DegenerateInputError",
    "ExtrapolationWarning",
    "Grid1D",
    "InvalidInputError",
    "LTLabError",
    "ManifoldFit",
    "NumericalFailureError",
    "PotentialField",
    "RadialGrid",
    "RieszReport",
    "ScfConfig",
    "ScfResult",
    "SolitonSpec",
    "SpectrumResult",
    "binding_correction",
    "euler_lagrange_map",
    "exact_spectrum",
    "gns_reference_L1",
    "inversion_transform",
    "lowest_eigenpairs",
    "lp_norm_power",
    "manifold_distance",
    "mass_profile",
    "mu_spectrum",
    "negative_count",
    "rescale",
    "riesz_ratio",
    "run",
    "soliton_profile",
    "subadditivity_check",
]
