"""
Combined fitting loss.

Contains the loss weights, the Chamfer supervision target, and combined_loss,
which assembles the data term, thickness penalty and optional volume and
incompressibility terms with their exact vertex gradient.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from .basis import GhdBasis
from .enclosed_volume import (
    enclosed_volume,
    enclosed_volume_gradient,
    volume_rate,
    volume_rate_gradient,
)
from .exceptions import ConfigError
from .mesh import TriMesh
from .metrics import soft_dice, soft_dice_gradient
from .occupancy import occupancy, occupancy_gradient, smooth_occupancy_derivative
from .surface_sampling import SurfaceSamples
from .thickness import DEFAULT_MIN_THICKNESS, DEFAULT_NORMAL_WEIGHT, thickness_loss_and_gradient
from .types import Quadrature, VertexGradient
from .volume import LabeledPoints

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossWeights:
    """
    Term weights of ``combined_loss``.

    The data term always has weight 1; thickness defaults to 0.01 with a 4 mm
    minimum, and the volume and incompressibility terms are off.
    """
    thickness: float = 0.01
    min_thickness: float = DEFAULT_MIN_THICKNESS
    normal_weight: float = DEFAULT_NORMAL_WEIGHT
    volume: float = 0.0
    target_volume: Optional[float] = None
    incompressibility: float = 0.0

    def __post_init__(self) -> None:
        for name in ("thickness", "normal_weight", "volume", "incompressibility"):
            if getattr(self, name) < 0:
                raise ConfigError(name, f"weight must be non-negative, got {getattr(self, name)}")
        if self.volume > 0 and self.target_volume is None:
            raise ConfigError("target_volume", "required when the volume weight is positive")


@dataclass
class ChamferTarget:
    """
    Mesh supervision: a fixed target point set and sample sites on the fitted mesh.

    The sample sites are re-evaluated on every deformed mesh; nearest
    neighbours are re-queried at each evaluation.
    """
    points: np.ndarray
    samples: SurfaceSamples
    tree: cKDTree = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.tree = cKDTree(self.points)


class LossValue(NamedTuple):
    """Scalar loss, its named terms and gradients."""
    value: float
    terms: Dict[str, float]
    vertex_gradient: VertexGradient
    coefficient_gradient: Optional[np.ndarray]


def dice_term(
    mesh: TriMesh,
    points: LabeledPoints,
    beta: float,
    quadrature: Union[Quadrature, str] = Quadrature.FACET,
    frozen_geometry: bool = False,
) -> Tuple[float, np.ndarray, float]:
    """1 - soft Dice of relaxed occupancy against point labels, with its vertex gradient."""
    result = occupancy(mesh, points.positions, beta, quadrature)
    dice = soft_dice(result.smooth, points.labels)
    upstream = -soft_dice_gradient(result.smooth, points.labels) * smooth_occupancy_derivative(result.raw, beta)
    gradient = occupancy_gradient(mesh, points.positions, upstream, quadrature, frozen_geometry)
    return 1.0 - dice, gradient, dice


def chamfer_term(mesh: TriMesh, target: ChamferTarget) -> Tuple[float, np.ndarray]:
    """Symmetric Chamfer distance of re-evaluated samples to the target, with its vertex gradient."""
    samples = target.samples.evaluate(mesh)
    forward_dist, forward_index = target.tree.query(samples)
    backward_dist, backward_index = cKDTree(samples).query(target.points)
    value = float(np.mean(forward_dist ** 2) + np.mean(backward_dist ** 2))

    grad_samples = 2.0 * (samples - target.points[forward_index]) / len(samples)
    backward = 2.0 * (samples[backward_index] - target.points) / len(target.points)
    np.add.at(grad_samples, backward_index, backward)
    return value, target.samples.scatter(mesh, grad_samples)


def combined_loss(
    mesh: TriMesh,
    supervision: Union[LabeledPoints, ChamferTarget],
    weights: Optional[LossWeights] = None,
    beta: float = 10.0,
    quadrature: Union[Quadrature, str] = Quadrature.FACET,
    basis: Optional[GhdBasis] = None,
    reference: Optional[TriMesh] = None,
    frozen_geometry: bool = False,
) -> LossValue:
    """
    Evaluate the fitting loss and its gradients.

    Loss = data + w_th * sum SiLU(t_min - t) + w_vol * (V - V_target)^2
    + w_inc * dV^2, where the data term is 1 - soft Dice for labeled points or
    the surface Chamfer distance for a mesh target, and dV is the volume rate
    from ``reference`` to ``mesh``.

    Args:
        mesh: Current mesh
        supervision: Labeled points or a Chamfer target
        weights: Term weights, defaults to ``LossWeights()``
        beta: Occupancy relaxation sharpness
        quadrature: Occupancy quadrature
        basis: When given, the coefficient gradient U^T g is returned too
        reference: Mesh at the previous time step, required by the incompressibility term
        frozen_geometry: Hold normals and areas constant in the occupancy gradient

    Returns:
        LossValue: Value, per-term values, vertex gradient and optional coefficient gradient
    """
    if weights is None:
        weights = LossWeights()
    terms: Dict[str, float] = {}
    if isinstance(supervision, ChamferTarget):
        data, gradient = chamfer_term(mesh, supervision)
        terms["chamfer"] = data
    else:
        data, gradient, dice = dice_term(mesh, supervision, beta, quadrature, frozen_geometry)
        terms["dice"] = dice
    terms["data"] = data
    value = data

    if weights.thickness > 0:
        penalty, grad = thickness_loss_and_gradient(
            mesh, weights.min_thickness, {"normal_weight": weights.normal_weight}
        )
        terms["thickness"] = penalty
        value += weights.thickness * penalty
        gradient = gradient + weights.thickness * grad

    if weights.volume > 0:
        volume = enclosed_volume(mesh)
        deviation = volume - weights.target_volume
        terms["volume"] = deviation ** 2
        value += weights.volume * deviation ** 2
        gradient = gradient + 2.0 * weights.volume * deviation * enclosed_volume_gradient(mesh)

    if weights.incompressibility > 0:
        if reference is None:
            raise ConfigError("incompressibility", "a reference mesh is required")
        rate = volume_rate(reference, mesh)
        terms["incompressibility"] = rate ** 2
        value += weights.incompressibility * rate ** 2
        gradient = gradient + 2.0 * weights.incompressibility * rate * volume_rate_gradient(reference, mesh)

    coefficient_gradient = basis.modes.T @ gradient if basis is not None else None
    return LossValue(float(value), terms, gradient, coefficient_gradient)
