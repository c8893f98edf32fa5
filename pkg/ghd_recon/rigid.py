"""
Rigid pre-alignment.

Contains RigidPose, a unit-quaternion rotation about a pivot plus translation
and optional isotropic scale, and rigid_align, which fits a pose by Adam
descent on the one-sided Chamfer distance from canonical surface samples to
foreground target points.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .adam import AdamState, adam_update
from .config import FitConfig
from .exceptions import EmptySupervisionError
from .mesh import TriMesh
from .surface_sampling import sample_surface
from .volume import LabeledPoints

logger = logging.getLogger(__name__)

QUATERNION_TOLERANCE = 1e-9

# A restart counts as diverging while its loss stays this far above its best.
DIVERGENCE_MARGIN = 0.05

_IDENTITY_QUATERNION = (1.0, 0.0, 0.0, 0.0)


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quaternion_matrix_derivatives(q: np.ndarray) -> np.ndarray:
    """(4, 3, 3) partial derivatives of ``quaternion_to_matrix`` by w, x, y and z."""
    w, x, y, z = q
    return 2.0 * np.array(
        [
            [[0, -z, y], [z, 0, -x], [-y, x, 0]],
            [[0, y, z], [y, -2 * x, -w], [z, w, -2 * x]],
            [[-2 * y, x, w], [x, 0, z], [-w, z, -2 * y]],
            [[-2 * z, -w, x], [w, -2 * z, y], [x, y, 0]],
        ]
    )


def axis_angle_quaternion(axis: np.ndarray, angle: float) -> np.ndarray:
    """Unit quaternion of a rotation by ``angle`` radians about ``axis``."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return np.concatenate([[np.cos(0.5 * angle)], np.sin(0.5 * angle) * axis])


def quaternion_multiply(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product p * q (apply q first)."""
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ]
    )


def rotation_angle(q: np.ndarray) -> float:
    """Rotation angle of a unit quaternion in radians, in [0, pi]."""
    return float(2.0 * np.arccos(np.clip(abs(q[0]), 0.0, 1.0)))


@dataclass(frozen=True)
class RigidPose:
    """
    Similarity transform x -> scale * R(q) (x - center) + center + translation.

    Args:
        quaternion: Rotation (w, x, y, z), normalized on construction
        translation: Translation in mm
        scale: Isotropic scale, positive
        center: Rotation pivot in mm
    """
    quaternion: Tuple[float, float, float, float] = _IDENTITY_QUATERNION
    translation: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    scale: float = 1.0
    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        q = np.asarray(self.quaternion, dtype=float).reshape(4)
        length = np.linalg.norm(q)
        if not np.isfinite(length) or length == 0:
            raise ValueError(f"quaternion must be nonzero and finite, got {self.quaternion}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "quaternion", tuple(float(v) for v in q / length))
        object.__setattr__(self, "translation", tuple(float(v) for v in np.reshape(self.translation, 3)))
        object.__setattr__(self, "center", tuple(float(v) for v in np.reshape(self.center, 3)))
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls()

    @property
    def rotation_matrix(self) -> np.ndarray:
        return quaternion_to_matrix(np.asarray(self.quaternion))

    @property
    def angle(self) -> float:
        """Rotation angle in radians."""
        return rotation_angle(np.asarray(self.quaternion))

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        center = np.asarray(self.center)
        return self.scale * (p - center) @ self.rotation_matrix.T + center + np.asarray(self.translation)

    def apply(self, mesh: TriMesh) -> TriMesh:
        """Transformed copy of a mesh; connectivity is unchanged."""
        return mesh.with_vertices(self.transform_points(mesh.vertices))

    def to_dict(self) -> Dict[str, List[float]]:
        return {
            "quaternion": list(self.quaternion),
            "translation": list(self.translation),
            "scale": [self.scale],
            "center": list(self.center),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RigidPose":
        scale = data.get("scale", 1.0)
        return cls(
            quaternion=tuple(data["quaternion"]),
            translation=tuple(data["translation"]),
            scale=float(scale[0] if isinstance(scale, list) else scale),
            center=tuple(data.get("center", (0.0, 0.0, 0.0))),
        )


def one_sided_chamfer(points: np.ndarray, target: np.ndarray) -> float:
    """Mean squared distance from every point to its nearest target point."""
    distance, _ = cKDTree(target).query(points)
    return float(np.mean(distance ** 2))


class _Restart(NamedTuple):
    pose: RigidPose
    loss: float
    diverged: bool


def _long_axis(points: np.ndarray) -> np.ndarray:
    centered = points - points.mean(axis=0)
    _, vectors = np.linalg.eigh(centered.T @ centered)
    axis = vectors[:, -1]
    return axis if axis[np.argmax(np.abs(axis))] > 0 else -axis


def _run_restart(
    samples: np.ndarray,
    tree: cKDTree,
    pivot: np.ndarray,
    q0: np.ndarray,
    t0: np.ndarray,
    config: FitConfig,
    length_scale: float,
) -> _Restart:
    """Adam descent from one initial pose; returns the best pose seen."""
    local = samples - pivot
    params = {"q": q0.copy(), "t": t0 / length_scale, "s": np.zeros(1)}
    states = {name: AdamState.zeros_like(value) for name, value in params.items()}
    rates = {
        "q": config.rigid_rotation_lr,
        "t": config.rigid_translation_lr,
        "s": config.rigid_rotation_lr,
    }
    decay_span = max(config.rigid_iterations - 1, 1)

    def pose_of(p: Dict[str, np.ndarray]) -> RigidPose:
        return RigidPose(tuple(p["q"]), tuple(p["t"] * length_scale), float(np.exp(p["s"][0])), tuple(pivot))

    best_pose, best_loss = None, np.inf
    worse = 0
    for iteration in range(config.rigid_iterations + 1):
        rotation = quaternion_to_matrix(params["q"])
        scale = float(np.exp(params["s"][0]))
        rotated = local @ rotation.T
        moved = scale * rotated + pivot + params["t"] * length_scale
        distance, index = tree.query(moved)
        loss = float(np.mean(distance ** 2))
        if loss < best_loss:
            best_pose, best_loss, worse = pose_of(params), loss, 0
        elif loss > best_loss * (1.0 + DIVERGENCE_MARGIN):
            worse += 1
            if config.rigid_patience and worse >= config.rigid_patience:
                return _Restart(best_pose, best_loss, True)
        else:
            worse = 0
        if iteration == config.rigid_iterations:
            break

        g = 2.0 * (moved - tree.data[index]) / len(moved)
        grad_rotation = scale * g.T @ local
        grads = {
            "q": np.einsum("kij,ij->k", quaternion_matrix_derivatives(params["q"]), grad_rotation),
            "t": g.sum(axis=0) * length_scale,
            "s": np.array([scale * np.einsum("ij,ij->", g, rotated)]),
        }
        grads["q"] -= np.dot(grads["q"], params["q"]) * params["q"]
        fraction = config.final_lr_fraction ** (iteration / decay_span)
        for name in ("q", "t", "s") if config.rigid_scale else ("q", "t"):
            states[name], step = adam_update(
                states[name], grads[name], rates[name] * fraction,
                config.adam_beta1, config.adam_beta2, config.adam_eps,
            )
            params[name] = params[name] + step
        params["q"] = params["q"] / np.linalg.norm(params["q"])
    return _Restart(best_pose, best_loss, False)


def rigid_align(
    canonical: TriMesh,
    target: LabeledPoints,
    config: Optional[FitConfig] = None,
) -> RigidPose:
    """
    Rigidly align a canonical mesh to foreground target points.

    Minimizes the one-sided Chamfer distance from ``config.rigid_samples``
    area-uniform canonical surface samples to the foreground points over
    (quaternion, translation[, log scale]) with Adam. Every restart starts
    with the centroid offset as translation and a rotation of 2 pi k / R about
    the canonical long axis; the pose of lowest loss over all restarts wins.

    Args:
        canonical: Template mesh
        target: Labeled points, at least one foreground
        config: Fit configuration (rigid_* fields, seed, Adam moments)

    Returns:
        RigidPose: Best pose, deterministic for a given seed

    Raises:
        EmptySupervisionError: When the target has no foreground point

    Example:
        >>> pose = rigid_align(make_shell_phantom(), points, FitConfig())
        >>> aligned = pose.apply(make_shell_phantom())
    """
    if config is None:
        config = FitConfig()
    foreground = target.foreground
    if len(foreground) == 0:
        raise EmptySupervisionError("Rigid alignment needs at least one foreground point")

    samples = sample_surface(canonical, config.rigid_samples, config.seed).points
    pivot = samples.mean(axis=0)
    offset = foreground.mean(axis=0) - pivot
    axis = _long_axis(samples)
    tree = cKDTree(foreground)
    length_scale = max(canonical.diameter(), 1e-12)

    best: Optional[_Restart] = None
    for k in range(config.rigid_restarts):
        q0 = axis_angle_quaternion(axis, 2.0 * np.pi * k / config.rigid_restarts)
        result = _run_restart(samples, tree, pivot, q0, offset, config, length_scale)
        logger.debug(
            "Rigid restart %d: loss %.6g, angle %.2f deg", k, result.loss, np.degrees(result.pose.angle)
        )
        if best is None or result.loss < best.loss:
            best = result
    if best.diverged:
        logger.warning("Rigid alignment diverged; keeping the best pose seen (loss %.6g)", best.loss)
    logger.info(
        "Rigid alignment: loss %.6g mm^2, rotation %.2f deg, translation %s",
        best.loss, np.degrees(best.pose.angle), np.round(best.pose.translation, 3).tolist(),
    )
    return best.pose
