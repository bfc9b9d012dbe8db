"""Spectral vorticity dynamics in the exterior of a no-slip body.

The flow domain is mapped conformally onto the exterior of a disk; vorticity
is carried as angular Fourier modes with radial profiles on a stretched grid.
The no-slip condition enters as per-mode Robin boundary rows plus moment
constraints on the vorticity, and the package's diagnostics verify the
enstrophy budget identities those boundary conditions imply.
"""

from .conformal import ConformalMap, JacobianWeight, disk_map, jacobian_weight, joukowski_map
from .diagnostics import (
    DiagnosticsRecord,
    boundary_h12,
    compute_record,
    enstrophy,
    palinstrophy,
    residual_linear,
    residual_nonlinear,
    sign_split,
)
from .biot_savart import (
    BoundaryTrace,
    VelocityField,
    boundary_slip,
    gtau_trace,
    l_trace,
    moments,
    velocity_from_vorticity,
)
from .errors import (
    CflViolationError,
    ConfigurationError,
    DealiasingError,
    DomainError,
    ShapeMismatchError,
    SnapshotFormatError,
)
from .grid import (
    PhysicalField,
    RadialGrid,
    SpectralField,
    build_grid,
    l2_inner,
    radial_derivative,
    to_physical,
    to_spectral,
)
from .navier_stokes import advection, boundary_advective_term, dealias_nphi, step_nse
from .stokes import (
    FlowState,
    SolverConfig,
    apply_Dk,
    apply_mode_laplacian,
    dissipation_sum,
    gaussian_ring,
    noise_field,
    project_orthogonality,
    robin_residuals,
    step_stokes,
)

__version__ = "0.1.0"

__all__ = [
    "ConformalMap", "JacobianWeight", "disk_map", "joukowski_map", "jacobian_weight",
    "DiagnosticsRecord", "enstrophy", "palinstrophy", "boundary_h12",
    "compute_record", "residual_linear", "residual_nonlinear", "sign_split",
    "VelocityField", "BoundaryTrace", "moments", "velocity_from_vorticity",
    "gtau_trace", "l_trace", "boundary_slip",
    "RadialGrid", "SpectralField", "PhysicalField", "build_grid",
    "to_spectral", "to_physical", "radial_derivative", "l2_inner",
    "FlowState", "SolverConfig", "apply_mode_laplacian", "apply_Dk",
    "dissipation_sum", "robin_residuals", "step_stokes", "project_orthogonality",
    "gaussian_ring", "noise_field",
    "advection", "step_nse", "boundary_advective_term", "dealias_nphi",
    "ConfigurationError", "ShapeMismatchError", "DealiasingError",
    "DomainError", "SnapshotFormatError", "CflViolationError",
    "__version__",
]
