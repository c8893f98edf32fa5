"""
GHD reconstruction types.

Contains enumerations, report records and option bundles shared across modules.
"""

import os
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, TypedDict, Union

import numpy as np

Point = Union[Sequence[float], np.ndarray]
Vector3 = Tuple[float, float, float]
PathLike = Union[str, os.PathLike]


class Axis(str, Enum):
    """Volume axis."""
    X = "x"
    Y = "y"
    Z = "z"

    @property
    def index(self) -> int:
        return "xyz".index(self.value)


class LaplacianKind(str, Enum):
    """Edge weighting of a mesh graph Laplacian."""
    UNWEIGHTED = "unweighted"
    INV_DISTANCE = "inv_distance"
    COTANGENT = "cotangent"
    MIXED = "mixed"


class Quadrature(str, Enum):
    """Surface quadrature used by the winding-number occupancy."""
    VERTEX = "vertex"
    FACET = "facet"


class Parameterization(str, Enum):
    """Optimization variable of a fit."""
    GHD = "ghd"
    VERTEX = "vertex"


class DiceMethod(str, Enum):
    """How a mesh is binarized on a voxel grid for 3D Dice."""
    PARITY = "parity"
    OCCUPANCY = "occupancy"


class MeshQualityReport(TypedDict):
    """Triangle quality summary."""
    good_angle_ratio: float
    min_angle: float  # degrees
    max_angle: float  # degrees
    num_degenerate_faces: int


class EvaluationMetrics(TypedDict, total=False):
    """Metrics of a mesh against a reference."""
    dice_3d: float
    dice_slices: List[float]
    dice_slices_mean: float
    chamfer: float  # mm^2
    hausdorff: float  # mm
    good_angle_ratio: float
    enclosed_volume: float  # mm^3


class FitTiming(TypedDict):
    """Non-deterministic part of a fit report."""
    wall_clock_seconds: float
    finished_at: str


class FitReport(TypedDict, total=False):
    """Outcome of a reconstruction."""
    loss_trace: List[float]
    iterations: int
    converged: bool
    stop_reason: str  # "tolerance", "budget" or "non_finite"
    parameterization: str
    num_modes: int
    rigid_pose: Dict[str, List[float]]
    rigid_loss: float
    dice_3d: Optional[float]
    dice_slices: List[float]
    dice_slices_mean: Optional[float]
    chamfer: Optional[float]
    hausdorff: Optional[float]
    gar_before: float
    gar_after: float
    enclosed_volume: float
    seed: int
    timing: FitTiming


class SampleOptions(TypedDict, total=False):
    """Options for point sampling from supervision."""
    jitter: bool  # Jitter samples inside their voxel/pixel, default True


class ThicknessOptions(TypedDict, total=False):
    """Options for the differentiable thickness."""
    normal_weight: float  # lambda_n in mm, default 1.0
    query_vertices: Sequence[int]  # default: all vertices


# (n, 3) gradient of a scalar objective with respect to vertex positions.
VertexGradient = np.ndarray
