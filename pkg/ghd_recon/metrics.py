"""
Overlap and surface distance metrics.

Contains the soft Dice score with its gradient, and the Chamfer and Hausdorff
distances between point sets and between mesh surfaces.
"""

import logging
from typing import Tuple

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import DimensionMismatchError
from .mesh import TriMesh
from .surface_sampling import sample_surface

logger = logging.getLogger(__name__)

DEFAULT_SURFACE_SAMPLES = 10_000


def _pair(occupancy: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(occupancy, dtype=float).reshape(-1)
    y = np.asarray(labels, dtype=float).reshape(-1)
    if len(x) != len(y):
        raise DimensionMismatchError("labels", len(x), len(y))
    return x, y


def soft_dice(occupancy: np.ndarray, labels: np.ndarray) -> float:
    """
    Soft Dice score 2 * sum(x * y) / (sum(x) + sum(y)).

    Both sums zero is an empty agreement and scores 1.

    Args:
        occupancy: Soft occupancies in [0, 1]
        labels: Binary labels

    Returns:
        float: Score in [0, 1]

    Example:
        >>> soft_dice(np.full(4, 0.5), np.ones(4))
        # 2 * 2 / (2 + 4) = 2/3
    """
    x, y = _pair(occupancy, labels)
    total = x.sum() + y.sum()
    if total == 0:
        logger.warning("Dice of two empty masks; scoring as 1")
        return 1.0
    return float(2.0 * np.dot(x, y) / total)


def soft_dice_gradient(occupancy: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d Dice / d occupancy = 2y / (Sx + Sy) - 2 Sxy / (Sx + Sy)^2."""
    x, y = _pair(occupancy, labels)
    total = x.sum() + y.sum()
    if total == 0:
        return np.zeros_like(x)
    return 2.0 * y / total - 2.0 * np.dot(x, y) / total ** 2


def dice_coefficient(a: np.ndarray, b: np.ndarray) -> float:
    """Dice coefficient of two binary masks."""
    return soft_dice(np.asarray(a, dtype=bool), np.asarray(b, dtype=bool))


def _nearest(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Distance from every source point to its nearest target point."""
    distance, _ = cKDTree(target).query(source)
    return distance


def chamfer_points(a: np.ndarray, b: np.ndarray) -> float:
    """
    Symmetric Chamfer distance in mm^2.

    The mean squared nearest-neighbour distance from a to b plus that from b to a.

    Example:
        >>> chamfer_points([[0, 0, 0]], [[3, 0, 0]])
        18.0
    """
    pa = np.atleast_2d(np.asarray(a, dtype=float))
    pb = np.atleast_2d(np.asarray(b, dtype=float))
    return float(np.mean(_nearest(pa, pb) ** 2) + np.mean(_nearest(pb, pa) ** 2))


def hausdorff_points(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance in mm."""
    pa = np.atleast_2d(np.asarray(a, dtype=float))
    pb = np.atleast_2d(np.asarray(b, dtype=float))
    return float(max(_nearest(pa, pb).max(), _nearest(pb, pa).max()))


def chamfer(mesh_a: TriMesh, mesh_b: TriMesh, n_samples: int = DEFAULT_SURFACE_SAMPLES, seed: int = 0) -> float:
    """
    Chamfer distance between two surfaces in mm^2.

    Both surfaces are sampled area-uniformly with the same seed, so identical
    meshes compare at exactly 0.
    """
    a = sample_surface(mesh_a, n_samples, seed).points
    b = sample_surface(mesh_b, n_samples, seed).points
    return chamfer_points(a, b)


def hausdorff(mesh_a: TriMesh, mesh_b: TriMesh, n_samples: int = DEFAULT_SURFACE_SAMPLES, seed: int = 0) -> float:
    """Hausdorff distance between two surfaces in mm, from seeded surface samples."""
    a = sample_surface(mesh_a, n_samples, seed).points
    b = sample_surface(mesh_b, n_samples, seed).points
    return hausdorff_points(a, b)
