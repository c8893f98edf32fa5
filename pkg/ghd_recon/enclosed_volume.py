"""
Enclosed volume and its rate of change.

Contains the divergence-theorem volume of a closed mesh, the volume change
between two meshes of equal connectivity used as a weak incompressibility
penalty, and the vertex gradients of both.
"""

import logging

import numpy as np

from .exceptions import ConnectivityMismatchError
from .mesh import TriMesh, cross_gradient_to_vertices, face_values_to_vertices, is_closed
from .types import VertexGradient

logger = logging.getLogger(__name__)


def enclosed_volume(mesh: TriMesh) -> float:
    """
    Signed volume enclosed by a mesh in mm^3.

    V = 1/3 * sum_F <n(F), c(F)> * Area(F), positive for outward-oriented
    closed meshes and independent of the origin. Open meshes give
    origin-dependent values and log a warning.

    Example:
        >>> enclosed_volume(make_box((1, 1, 1)))
        1.0
    """
    if not is_closed(mesh):
        logger.warning("Enclosed volume of an open mesh depends on the origin")
    return float(np.einsum("ij,ij->", mesh.face_cross, mesh.face_centroids) / 6.0)


def signed_tetrahedra_volume(mesh: TriMesh) -> float:
    """Sum of signed volumes of the tetrahedra spanned by the origin and each face."""
    p = mesh.vertices[mesh.faces]
    return float(np.linalg.det(p).sum() / 6.0)


def enclosed_volume_gradient(mesh: TriMesh) -> VertexGradient:
    """
    Vertex gradient of ``enclosed_volume``.

    With V = 1/6 * sum det(v0, v1, v2), corner i of a face receives
    v[i+1] x v[i+2] / 6.
    """
    p = mesh.vertices[mesh.faces]
    out = np.zeros_like(mesh.vertices)
    for corner in range(3):
        np.add.at(
            out, mesh.faces[:, corner],
            np.cross(p[:, (corner + 1) % 3], p[:, (corner + 2) % 3]) / 6.0,
        )
    return out


def _check_pair(mesh_t: TriMesh, mesh_t1: TriMesh) -> None:
    if mesh_t.num_vertices != mesh_t1.num_vertices or not np.array_equal(mesh_t.faces, mesh_t1.faces):
        raise ConnectivityMismatchError(
            f"volume rate needs equal connectivity, got {mesh_t!r} and {mesh_t1!r}"
        )


def volume_rate(mesh_t: TriMesh, mesh_t1: TriMesh, include_area_change: bool = True) -> float:
    """
    Volume change between two meshes of equal connectivity in mm^3.

    dV = 1/3 * [sum <n_t1 - n_t, c_t> A_t + sum <n_t, c_t1 - c_t> A_t
    + sum <n_t, c_t> (A_t1 - A_t)]. The last term accounts for the changing
    surface element; ``include_area_change=False`` drops it.

    Args:
        mesh_t: Mesh at time t
        mesh_t1: Mesh at time t + 1
        include_area_change: Keep the area-change term

    Returns:
        float: Approximate volume difference; about 3 eps V under uniform scaling by 1 + eps

    Raises:
        ConnectivityMismatchError: When the meshes differ in faces or vertex count
    """
    _check_pair(mesh_t, mesh_t1)
    n_t, a_t, c_t = mesh_t.face_normals, mesh_t.face_areas, mesh_t.face_centroids
    n_t1, a_t1, c_t1 = mesh_t1.face_normals, mesh_t1.face_areas, mesh_t1.face_centroids
    rate = np.einsum("ij,ij,i->", n_t1 - n_t, c_t, a_t)
    rate += np.einsum("ij,ij,i->", n_t, c_t1 - c_t, a_t)
    if include_area_change:
        rate += np.einsum("ij,ij,i->", n_t, c_t, a_t1 - a_t)
    return float(rate / 3.0)


def volume_rate_gradient(mesh_t: TriMesh, mesh_t1: TriMesh, include_area_change: bool = True) -> VertexGradient:
    """Gradient of ``volume_rate`` with respect to the vertices of ``mesh_t1``."""
    _check_pair(mesh_t, mesh_t1)
    n_t, a_t, c_t = mesh_t.face_normals, mesh_t.face_areas, mesh_t.face_centroids
    cross = mesh_t1.face_cross
    length = np.linalg.norm(cross, axis=1)
    n_t1 = mesh_t1.face_normals

    # n_t1 = cross / |cross|
    g = c_t * a_t[:, None]
    grad_cross = np.zeros_like(cross)
    ok = length > 0
    tangential = g - np.einsum("ij,ij->i", g, n_t1)[:, None] * n_t1
    grad_cross[ok] = tangential[ok] / length[ok, None]
    if include_area_change:
        # A_t1 = |cross| / 2
        grad_cross += 0.5 * np.einsum("ij,ij->i", n_t, c_t)[:, None] * n_t1

    out = cross_gradient_to_vertices(mesh_t1, grad_cross)
    out += face_values_to_vertices(mesh_t1, n_t * a_t[:, None] / 3.0)
    return out / 3.0
