"""
Differentiable occupancy of query points.

Contains the winding-number occupancy of a triangle mesh by vertex-wise and
facet-wise surface quadrature, its tanh relaxation to a soft mask, and the
exact gradient of a weighted sum of occupancies with respect to vertex
positions.
"""

import logging
from typing import Iterator, NamedTuple, Tuple, Union

import numpy as np
from scipy.special import expit

from .exceptions import DimensionMismatchError
from .mesh import TriMesh, cross_gradient_to_vertices, face_values_to_vertices
from .types import Quadrature, VertexGradient

logger = logging.getLogger(__name__)

# Distances below this (mm) are clamped and the point is flagged.
CLAMP_DISTANCE = 1e-9

DEFAULT_BETA = 1e3

# Point-by-source pairs evaluated per tile.
_TILE_PAIRS = 1_000_000

_INV_4PI = 1.0 / (4.0 * np.pi)


class OccupancyResult(NamedTuple):
    """Raw winding-number occupancy, its relaxation, the sharpness used and clamped points."""
    raw: np.ndarray
    smooth: np.ndarray
    beta: float
    flagged: np.ndarray


def _points(points: np.ndarray) -> np.ndarray:
    q = np.asarray(points, dtype=np.float64)
    if q.ndim == 1:
        q = q.reshape(1, -1)
    if q.shape[1] != 3:
        raise DimensionMismatchError("query points", ("k", 3), q.shape)
    return q


def _vertex_sources(mesh: TriMesh) -> Tuple[np.ndarray, np.ndarray]:
    """Vertex positions and n(V) * A_dual(V) per vertex."""
    return mesh.vertices, mesh.vertex_normals * mesh.dual_areas[:, None]


def _facet_sources(mesh: TriMesh) -> Tuple[np.ndarray, np.ndarray]:
    """Face centroids and area vectors n(F) * Area(F)."""
    return mesh.face_centroids, 0.5 * mesh.face_cross


def _sources(mesh: TriMesh, quadrature: Quadrature) -> Tuple[np.ndarray, np.ndarray]:
    if quadrature is Quadrature.VERTEX:
        return _vertex_sources(mesh)
    return _facet_sources(mesh)


def _tiles(num_points: int, num_sources: int) -> Iterator[slice]:
    step = max(1, _TILE_PAIRS // max(1, num_sources))
    for start in range(0, num_points, step):
        yield slice(start, min(num_points, start + step))


def _separation(positions: np.ndarray, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """r = source - q, clamped |r| and the per-point clamp flags."""
    r = positions[None, :, :] - q[:, None, :]
    dist = np.sqrt(np.einsum("pfd,pfd->pf", r, r))
    close = dist < CLAMP_DISTANCE
    return r, np.maximum(dist, CLAMP_DISTANCE), close.any(axis=1)


def _raw_occupancy(mesh: TriMesh, points: np.ndarray, quadrature: Quadrature) -> Tuple[np.ndarray, np.ndarray]:
    q = _points(points)
    positions, weights = _sources(mesh, quadrature)
    raw = np.zeros(len(q))
    flagged = np.zeros(len(q), dtype=bool)
    for tile in _tiles(len(q), len(positions)):
        r, dist, close = _separation(positions, q[tile])
        flux = np.einsum("pfd,fd->pf", r, weights) / dist ** 3
        raw[tile] = _INV_4PI * flux.sum(axis=1)
        flagged[tile] = close
    if flagged.any():
        logger.warning(
            "%d query points lie within %.0e mm of a quadrature point; distances clamped",
            int(flagged.sum()), CLAMP_DISTANCE,
        )
    return raw, flagged


def occupancy_vertex(mesh: TriMesh, points: np.ndarray) -> np.ndarray:
    """
    Winding-number occupancy by vertex-wise quadrature.

    occ(q) = 1/(4 pi) * sum_V <n(V), (V - q)/|V - q|^3> * A_dual(V), with
    n(V) the normalized area-weighted normal and A_dual(V) the barycentric
    dual area.

    Args:
        mesh: Closed outward-oriented mesh
        points: (k, 3) query points in mm

    Returns:
        np.ndarray: (k,) raw occupancy, about 1 inside and 0 outside
    """
    return _raw_occupancy(mesh, points, Quadrature.VERTEX)[0]


def occupancy_facet(mesh: TriMesh, points: np.ndarray) -> np.ndarray:
    """
    Winding-number occupancy by facet-wise quadrature.

    occ(q) = 1/(4 pi) * sum_F <n(F), (c(F) - q)/|c(F) - q|^3> * Area(F).

    Example:
        >>> occupancy_facet(make_icosphere(3, 10.0), [[0.0, 0.0, 0.0]])
        # about 1.0 at the center, about 0.0 outside
    """
    return _raw_occupancy(mesh, points, Quadrature.FACET)[0]


def smooth_occupancy(raw: Union[np.ndarray, float], beta: float) -> np.ndarray:
    """Relax raw occupancy to (0, 1): 1/2 * (1 + tanh(beta * (raw - 1/2)))."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    # 1/2 * (1 + tanh(z)) equals the logistic function of 2z.
    return expit(2.0 * beta * (np.asarray(raw, dtype=float) - 0.5))


def smooth_occupancy_derivative(raw: Union[np.ndarray, float], beta: float) -> np.ndarray:
    """d smooth / d raw = beta/2 * (1 - tanh^2(beta * (raw - 1/2)))."""
    s = smooth_occupancy(raw, beta)
    return 2.0 * beta * s * (1.0 - s)


def occupancy(
    mesh: TriMesh,
    points: np.ndarray,
    beta: float = DEFAULT_BETA,
    quadrature: Union[Quadrature, str] = Quadrature.FACET,
) -> "OccupancyResult":
    """
    Raw and relaxed occupancy of query points.

    Args:
        mesh: Closed outward-oriented mesh
        points: (k, 3) query points in mm
        beta: Relaxation sharpness
        quadrature: "facet" (default) or "vertex"

    Returns:
        OccupancyResult: raw and smooth values plus flags of clamped points
    """
    raw, flagged = _raw_occupancy(mesh, points, Quadrature(quadrature))
    return OccupancyResult(raw, smooth_occupancy(raw, beta), float(beta), flagged)


def _source_gradients(
    positions: np.ndarray, weights: np.ndarray, q: np.ndarray, upstream: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Gradients of sum_p w_p occ(q_p) with respect to source weights and positions."""
    grad_weight = np.zeros_like(weights)
    grad_position = np.zeros_like(positions)
    for tile in _tiles(len(q), len(positions)):
        w = upstream[tile]
        r, dist, _ = _separation(positions, q[tile])
        inv3 = w[:, None] / dist ** 3
        dot = np.einsum("pfd,fd->pf", r, weights)
        grad_weight += np.einsum("pf,pfd->fd", inv3, r)
        grad_position += inv3.sum(axis=0)[:, None] * weights
        grad_position -= 3.0 * np.einsum("pf,pfd->fd", inv3 * dot / dist ** 2, r)
    return _INV_4PI * grad_weight, _INV_4PI * grad_position


def _facet_gradient(mesh: TriMesh, q: np.ndarray, upstream: np.ndarray, frozen: bool) -> np.ndarray:
    positions, weights = _facet_sources(mesh)
    grad_area, grad_centroid = _source_gradients(positions, weights, q, upstream)
    out = face_values_to_vertices(mesh, grad_centroid / 3.0)
    if not frozen:
        # Area vector = cross / 2.
        out += cross_gradient_to_vertices(mesh, 0.5 * grad_area)
    return out


def _vertex_gradient(mesh: TriMesh, q: np.ndarray, upstream: np.ndarray, frozen: bool) -> np.ndarray:
    positions, weights = _vertex_sources(mesh)
    grad_weight, out = _source_gradients(positions, weights, q, upstream)
    if frozen:
        return out
    normals = mesh.vertex_normals
    dual = mesh.dual_areas
    cross = mesh.face_cross

    # weight = n * A_dual, n = s / |s| with s the sum of incident face cross products.
    star = face_values_to_vertices(mesh, cross)
    star_norm = np.linalg.norm(star, axis=1)
    grad_normal = grad_weight * dual[:, None]
    grad_dual = np.einsum("ij,ij->i", grad_weight, normals)
    tangential = grad_normal - np.einsum("ij,ij->i", grad_normal, normals)[:, None] * normals
    grad_star = np.zeros_like(star)
    ok = star_norm > 0
    grad_star[ok] = tangential[ok] / star_norm[ok, None]

    # A_dual(V) = sum |cross| / 6 over incident faces.
    face_normals = mesh.face_normals
    grad_cross = np.zeros_like(cross)
    for corner in range(3):
        index = mesh.faces[:, corner]
        grad_cross += grad_star[index] + (grad_dual[index] / 6.0)[:, None] * face_normals
    return out + cross_gradient_to_vertices(mesh, grad_cross)


def occupancy_gradient(
    mesh: TriMesh,
    points: np.ndarray,
    upstream: np.ndarray,
    quadrature: Union[Quadrature, str] = Quadrature.FACET,
    frozen_geometry: bool = False,
) -> VertexGradient:
    """
    Gradient of sum_p upstream_p * occ(q_p) with respect to vertex positions.

    The full chain of the chosen quadrature is differentiated: source
    positions (vertices or centroids) as well as normals, areas and dual
    areas. With ``frozen_geometry`` the normals and areas are held constant
    and only the source positions move.

    Args:
        mesh: Triangle mesh
        points: (k, 3) query points in mm
        upstream: (k,) sensitivities of the objective to each raw occupancy
        quadrature: "facet" (default) or "vertex"
        frozen_geometry: Treat normals and areas as constants

    Returns:
        VertexGradient: (n, 3) gradient

    Example:
        >>> grad = occupancy_gradient(mesh, points, np.ones(len(points)))
    """
    q = _points(points)
    w = np.asarray(upstream, dtype=np.float64).reshape(-1)
    if len(w) != len(q):
        raise DimensionMismatchError("upstream sensitivities", len(q), len(w))
    if not np.any(w):
        return np.zeros_like(mesh.vertices)
    if Quadrature(quadrature) is Quadrature.VERTEX:
        return _vertex_gradient(mesh, q, w, frozen_geometry)
    return _facet_gradient(mesh, q, w, frozen_geometry)
