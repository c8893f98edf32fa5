"""
Mesh quality metrics.

Contains the good angle ratio and the triangle quality summary.
"""

import numpy as np

from .mesh import TriMesh
from .types import MeshQualityReport

GOOD_ANGLE_MIN = np.pi / 6.0
GOOD_ANGLE_MAX = 2.0 * np.pi / 3.0
_ANGLE_SLACK = 1e-12


def face_angles(mesh: TriMesh) -> np.ndarray:
    """
    Interior angles of every face in radians.

    Returns:
        np.ndarray: (f, 3) angle at each corner, in face vertex order
    """
    p = mesh.vertices[mesh.faces]
    angles = np.empty((mesh.num_faces, 3))
    for corner in range(3):
        a = p[:, (corner + 1) % 3] - p[:, corner]
        b = p[:, (corner + 2) % 3] - p[:, corner]
        sin = np.linalg.norm(np.cross(a, b), axis=1)
        cos = np.einsum("ij,ij->i", a, b)
        angles[:, corner] = np.arctan2(sin, cos)
    return angles


def good_angle_ratio(mesh: TriMesh) -> float:
    """
    Fraction of triangles whose interior angles all lie in [30, 120] degrees.

    Degenerate faces count as bad.

    Args:
        mesh: Triangle mesh

    Returns:
        float: Ratio in [0, 1]; 0 for a mesh without faces

    Example:
        >>> good_angle_ratio(make_icosphere(0, 1.0))
        1.0
    """
    if mesh.num_faces == 0:
        return 0.0
    angles = face_angles(mesh)
    good = np.all(
        (angles >= GOOD_ANGLE_MIN - _ANGLE_SLACK) & (angles <= GOOD_ANGLE_MAX + _ANGLE_SLACK),
        axis=1,
    )
    good &= ~mesh.degenerate_faces
    return float(np.count_nonzero(good) / mesh.num_faces)


def mesh_quality(mesh: TriMesh) -> MeshQualityReport:
    """Summarize triangle quality of a mesh."""
    if mesh.num_faces == 0:
        return MeshQualityReport(
            good_angle_ratio=0.0, min_angle=0.0, max_angle=0.0, num_degenerate_faces=0
        )
    degrees = np.degrees(face_angles(mesh))
    return MeshQualityReport(
        good_angle_ratio=good_angle_ratio(mesh),
        min_angle=float(degrees.min()),
        max_angle=float(degrees.max()),
        num_degenerate_faces=int(np.count_nonzero(mesh.degenerate_faces)),
    )
