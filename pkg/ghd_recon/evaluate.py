"""
Reconstruction evaluation.

Contains evaluate, which scores a mesh against label or mesh references, and
the ejection fraction of two cavity volumes.
"""

import logging
from typing import List, Optional, Union

import numpy as np

from .config import FitConfig
from .enclosed_volume import enclosed_volume
from .exceptions import InvalidVolumeError
from .mesh import TriMesh
from .metrics import chamfer, dice_coefficient, hausdorff
from .occupancy import occupancy
from .quality import good_angle_ratio
from .sampling import slice_stack_to_points
from .types import DiceMethod, EvaluationMetrics, Quadrature
from .volume import GridSpec, LabelVolume, SliceStack
from .voxelize import grid_around, voxelize_oracle

logger = logging.getLogger(__name__)

Reference = Union[LabelVolume, SliceStack, TriMesh]


def binarize(
    mesh: TriMesh,
    volume_or_grid: Union[LabelVolume, GridSpec],
    method: Union[DiceMethod, str] = DiceMethod.PARITY,
    beta: float = 1e3,
) -> np.ndarray:
    """Binary labels of a mesh on a voxel grid, by ray parity or thresholded occupancy."""
    method = DiceMethod(method)
    if method is DiceMethod.PARITY:
        return voxelize_oracle(mesh, volume_or_grid).data
    grid = volume_or_grid.grid if isinstance(volume_or_grid, LabelVolume) else volume_or_grid
    smooth = occupancy(mesh, grid.centers(), beta, Quadrature.FACET).smooth
    return (smooth >= 0.5).reshape(grid.dims, order="F")


def _slice_dice(mesh: TriMesh, stack: SliceStack, beta: float) -> List[float]:
    scores = []
    for points in slice_stack_to_points(stack):
        smooth = occupancy(mesh, points.positions, beta, Quadrature.FACET).smooth
        scores.append(dice_coefficient(smooth >= 0.5, points.labels))
    return scores


def evaluate(mesh: TriMesh, reference: Reference, config: Optional[FitConfig] = None) -> EvaluationMetrics:
    """
    Score a mesh against a reference.

    Against a label volume the 3D Dice coefficient compares the binarized mesh
    with the labels at every voxel center. Against a slice stack each slice
    gets its own Dice from facet occupancy thresholded at 1/2 at pixel
    centers. Against a mesh both meshes are binarized on a shared grid of
    ``config.eval_spacing`` and the surface Chamfer and Hausdorff distances
    are added. Good angle ratio and enclosed volume are always reported.

    Args:
        mesh: Reconstructed mesh
        reference: Label volume, slice stack or mesh
        config: Evaluation settings (dice_method, eval_beta, eval_samples, eval_spacing, seed)

    Returns:
        EvaluationMetrics: Only the keys that apply to the reference kind

    Example:
        >>> metrics = evaluate(fitted, oracle_volume)
        >>> metrics["dice_3d"]
        # close to 1 for a good fit
    """
    if config is None:
        config = FitConfig()
    metrics = EvaluationMetrics(
        good_angle_ratio=good_angle_ratio(mesh),
        enclosed_volume=enclosed_volume(mesh),
    )
    if isinstance(reference, LabelVolume):
        labels = binarize(mesh, reference, config.dice_method, config.eval_beta)
        metrics["dice_3d"] = dice_coefficient(labels, reference.data)
    elif isinstance(reference, SliceStack):
        scores = _slice_dice(mesh, reference, config.eval_beta)
        metrics["dice_slices"] = scores
        metrics["dice_slices_mean"] = float(np.mean(scores))
    else:
        grid = grid_around([mesh, reference], config.eval_spacing)
        predicted = binarize(mesh, grid, config.dice_method, config.eval_beta)
        expected = binarize(reference, grid, config.dice_method, config.eval_beta)
        metrics["dice_3d"] = dice_coefficient(predicted, expected)
        metrics["chamfer"] = chamfer(mesh, reference, config.eval_samples, config.seed)
        metrics["hausdorff"] = hausdorff(mesh, reference, config.eval_samples, config.seed)
    return metrics


def ejection_fraction(v_ed: float, v_es: float) -> float:
    """
    Ejection fraction (V_ed - V_es) / V_ed.

    Args:
        v_ed: End-diastolic cavity volume in mm^3
        v_es: End-systolic cavity volume in mm^3

    Returns:
        float: Fraction; values outside [0, 1] are returned with a warning

    Raises:
        InvalidVolumeError: When v_ed is not positive

    Example:
        >>> ejection_fraction(100.0, 40.0)
        0.6
    """
    if not v_ed > 0:
        raise InvalidVolumeError(v_ed)
    if not 0 <= v_es <= v_ed:
        logger.warning("End-systolic volume %.6g lies outside [0, %.6g]", v_es, v_ed)
    return (v_ed - v_es) / v_ed
