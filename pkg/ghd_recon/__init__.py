"""
GHD Recon Python Library

A Python library for reconstructing closed triangle meshes from label volumes
and sparse slices. Provides differentiable winding-number occupancy, graph
harmonic deformation bases, physiologic loss terms and an end-to-end fitting
pipeline.
"""

__version__ = "1.0.0"

from .exceptions import (
    GhdReconError,
    MeshError,
    InvalidFaceError,
    MeshParseError,
    FaceIndexError,
    NonManifoldEdgeError,
    CoincidentVerticesError,
    PhantomParameterError,
    ConnectivityMismatchError,
    OpenMeshError,
    VolumeFormatError,
    SliceValidationError,
    SliceSelectionError,
    DimensionMismatchError,
    EigenSolverError,
    NonFiniteGradientError,
    ConfigError,
    MissingConfigFieldError,
    InvalidVolumeError,
    BasisFormatError,
    EmptySupervisionError,
)
from .types import (
    Axis,
    LaplacianKind,
    Quadrature,
    Parameterization,
    DiceMethod,
    MeshQualityReport,
    EvaluationMetrics,
    FitReport,
)
from .mesh import TriMesh, is_closed, euler_characteristic, vertex_normals
from .mesh_io import load_mesh, save_mesh
from .quality import good_angle_ratio, mesh_quality
from .primitives import (
    subdivide,
    make_icosphere,
    make_box,
    make_shell_phantom,
    make_cavity_phantom,
    shell_phantom_volume,
    truncated_spheroid_volume,
    base_plane,
)
from .surface_sampling import SurfaceSamples, sample_surface
from .volume import GridSpec, LabelVolume, LabelSlice, SliceStack, LabeledPoints
from .volume_io import save_volume, load_volume, save_slices, load_slices
from .voxelize import grid_around, voxelize_oracle, point_parity
from .sampling import extract_slices, spaced_slice_indices, sample_points, slice_stack_to_points
from .laplacian import GraphLaplacian, build_laplacian, laplacian_from_edges
from .basis import (
    GhdBasis,
    GhdCoefficients,
    ghd_basis,
    gft_forward,
    gft_inverse,
    gft_lowpass,
    apply_ghd,
    save_basis,
    load_basis,
)
from .occupancy import (
    OccupancyResult,
    occupancy,
    occupancy_vertex,
    occupancy_facet,
    smooth_occupancy,
    smooth_occupancy_derivative,
    occupancy_gradient,
)
from .metrics import (
    soft_dice,
    soft_dice_gradient,
    dice_coefficient,
    chamfer,
    hausdorff,
    chamfer_points,
    hausdorff_points,
)
from .thickness import (
    ThicknessResult,
    thickness,
    thickness_gradient,
    thickness_loss,
    thickness_mse,
    silu,
)
from .enclosed_volume import (
    enclosed_volume,
    enclosed_volume_gradient,
    volume_rate,
    volume_rate_gradient,
)
from .loss import LossWeights, LossValue, ChamferTarget, combined_loss
from .adam import AdamState, adam_update
from .config import FitConfig
from .rigid import RigidPose, rigid_align
from .evaluate import evaluate, ejection_fraction
from .fit import (
    FitResult,
    fit_ghd,
    beta_at,
    save_report,
    save_trace_csv,
    save_coefficients,
    load_coefficients,
)

__all__ = [
    # Exceptions
    "GhdReconError",
    "MeshError",
    "InvalidFaceError",
    "MeshParseError",
    "FaceIndexError",
    "NonManifoldEdgeError",
    "CoincidentVerticesError",
    "PhantomParameterError",
    "ConnectivityMismatchError",
    "OpenMeshError",
    "VolumeFormatError",
    "SliceValidationError",
    "SliceSelectionError",
    "DimensionMismatchError",
    "EigenSolverError",
    "NonFiniteGradientError",
    "ConfigError",
    "MissingConfigFieldError",
    "InvalidVolumeError",
    "BasisFormatError",
    "EmptySupervisionError",
    # Types
    "Axis",
    "LaplacianKind",
    "Quadrature",
    "Parameterization",
    "DiceMethod",
    "MeshQualityReport",
    "EvaluationMetrics",
    "FitReport",
    # Meshes
    "TriMesh",
    "is_closed",
    "euler_characteristic",
    "vertex_normals",
    "load_mesh",
    "save_mesh",
    "good_angle_ratio",
    "mesh_quality",
    "subdivide",
    "make_icosphere",
    "make_box",
    "make_shell_phantom",
    "make_cavity_phantom",
    "shell_phantom_volume",
    "truncated_spheroid_volume",
    "base_plane",
    "SurfaceSamples",
    "sample_surface",
    # Volumes
    "GridSpec",
    "LabelVolume",
    "LabelSlice",
    "SliceStack",
    "LabeledPoints",
    "save_volume",
    "load_volume",
    "save_slices",
    "load_slices",
    "grid_around",
    "voxelize_oracle",
    "point_parity",
    "extract_slices",
    "spaced_slice_indices",
    "sample_points",
    "slice_stack_to_points",
    # Spectral
    "GraphLaplacian",
    "build_laplacian",
    "laplacian_from_edges",
    "GhdBasis",
    "GhdCoefficients",
    "ghd_basis",
    "gft_forward",
    "gft_inverse",
    "gft_lowpass",
    "apply_ghd",
    "save_basis",
    "load_basis",
    # Occupancy
    "OccupancyResult",
    "occupancy",
    "occupancy_vertex",
    "occupancy_facet",
    "smooth_occupancy",
    "smooth_occupancy_derivative",
    "occupancy_gradient",
    # Losses and metrics
    "soft_dice",
    "soft_dice_gradient",
    "dice_coefficient",
    "chamfer",
    "hausdorff",
    "chamfer_points",
    "hausdorff_points",
    "ThicknessResult",
    "thickness",
    "thickness_gradient",
    "thickness_loss",
    "thickness_mse",
    "silu",
    "enclosed_volume",
    "enclosed_volume_gradient",
    "volume_rate",
    "volume_rate_gradient",
    "LossWeights",
    "LossValue",
    "ChamferTarget",
    "combined_loss",
    # Fitting
    "AdamState",
    "adam_update",
    "FitConfig",
    "RigidPose",
    "rigid_align",
    "FitResult",
    "fit_ghd",
    "beta_at",
    "evaluate",
    "ejection_fraction",
    "save_report",
    "save_trace_csv",
    "save_coefficients",
    "load_coefficients",
]
