"""
Triangle mesh representation.

Contains the immutable TriMesh type and its per-face/per-vertex geometry.
"""

import logging
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .exceptions import DimensionMismatchError, InvalidFaceError

logger = logging.getLogger(__name__)

# Cross-product magnitudes at or below this fraction of the squared longest
# edge mark a face as degenerate.
DEGENERATE_TOLERANCE = 1e-12


class FaceGeometry(NamedTuple):
    """Per-face unit normals, areas (mm^2), centroids (mm) and degenerate flags."""
    normals: np.ndarray
    areas: np.ndarray
    centroids: np.ndarray
    degenerate: np.ndarray


class TriMesh:
    """
    Triangle mesh with consistent winding.

    Counter-clockwise faces (seen from outside) give outward normals. The mesh is
    immutable: vertex and face arrays are read-only and every geometry cache is
    computed eagerly at construction, so concurrent reads are safe. Deformations
    produce new TriMesh values through ``with_vertices``.

    Args:
        vertices: (n, 3) vertex positions in mm
        faces: (f, 3) vertex indices per triangle

    Raises:
        InvalidFaceError: When a face index is out of range or a face repeats a vertex
    """

    __slots__ = (
        "_vertices",
        "_faces",
        "_cross",
        "_face_normals",
        "_face_areas",
        "_face_centroids",
        "_degenerate",
        "_dual_areas",
        "_vertex_normals",
    )

    def __init__(self, vertices: np.ndarray, faces: np.ndarray, validate: bool = True):
        v = np.array(vertices, dtype=np.float64).reshape(-1, 3)
        f = np.array(faces, dtype=np.int64).reshape(-1, 3)
        if validate:
            _check_faces(f, len(v))
        v.flags.writeable = False
        f.flags.writeable = False
        self._vertices = v
        self._faces = f
        self._compute_geometry()

    def _compute_geometry(self) -> None:
        v, f = self._vertices, self._faces
        cross = _face_cross(v, f)
        norm = np.linalg.norm(cross, axis=1)
        edges = _edge_lengths_sq(v, f)
        longest = edges.max(axis=1) if len(f) else np.zeros(0)
        degenerate = norm <= DEGENERATE_TOLERANCE * longest
        normals = np.zeros_like(cross)
        ok = ~degenerate
        normals[ok] = cross[ok] / norm[ok, None]
        centroids = v[f].mean(axis=1) if len(f) else np.zeros((0, 3))
        areas = 0.5 * norm

        dual = np.zeros(len(v))
        for corner in range(3):
            np.add.at(dual, f[:, corner], areas / 3.0)

        star = np.zeros_like(v)
        for corner in range(3):
            np.add.at(star, f[:, corner], cross)
        star_norm = np.linalg.norm(star, axis=1)
        vertex_normals = np.zeros_like(v)
        has_normal = star_norm > 0
        vertex_normals[has_normal] = star[has_normal] / star_norm[has_normal, None]

        for array in (cross, normals, areas, centroids, degenerate, dual, vertex_normals):
            array.flags.writeable = False
        self._cross = cross
        self._face_normals = normals
        self._face_areas = areas
        self._face_centroids = centroids
        self._degenerate = degenerate
        self._dual_areas = dual
        self._vertex_normals = vertex_normals
        if degenerate.any():
            logger.debug("Mesh has %d degenerate faces", int(degenerate.sum()))

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    @property
    def faces(self) -> np.ndarray:
        return self._faces

    @property
    def num_vertices(self) -> int:
        return len(self._vertices)

    @property
    def num_faces(self) -> int:
        return len(self._faces)

    @property
    def face_cross(self) -> np.ndarray:
        """Unnormalized face normals (twice the area vector)."""
        return self._cross

    @property
    def face_normals(self) -> np.ndarray:
        return self._face_normals

    @property
    def face_areas(self) -> np.ndarray:
        return self._face_areas

    @property
    def face_centroids(self) -> np.ndarray:
        return self._face_centroids

    @property
    def degenerate_faces(self) -> np.ndarray:
        return self._degenerate

    @property
    def dual_areas(self) -> np.ndarray:
        return self._dual_areas

    @property
    def vertex_normals(self) -> np.ndarray:
        return self._vertex_normals

    @property
    def total_area(self) -> float:
        return float(self._face_areas.sum())

    def with_vertices(self, vertices: np.ndarray) -> "TriMesh":
        """Return a mesh with the same connectivity and new vertex positions."""
        v = np.asarray(vertices, dtype=np.float64)
        if v.shape != self._vertices.shape:
            raise DimensionMismatchError("vertices", self._vertices.shape, v.shape)
        return TriMesh(v, self._faces, validate=False)

    def flipped(self) -> "TriMesh":
        """Return the mesh with every face winding reversed."""
        return TriMesh(self._vertices, self._faces[:, ::-1], validate=False)

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        return self._vertices.min(axis=0), self._vertices.max(axis=0)

    def diameter(self) -> float:
        """Bounding-box diagonal length."""
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted (i, j) pairs."""
        return unique_edges(self._faces)[0]

    def mean_edge_length(self) -> float:
        e = self.edges()
        return float(np.linalg.norm(self._vertices[e[:, 1]] - self._vertices[e[:, 0]], axis=1).mean())

    def __repr__(self) -> str:
        return f"TriMesh(num_vertices={self.num_vertices}, num_faces={self.num_faces})"


def _check_faces(faces: np.ndarray, num_vertices: int) -> None:
    if len(faces) == 0:
        return
    bad = (faces < 0) | (faces >= num_vertices)
    repeated = (
        (faces[:, 0] == faces[:, 1])
        | (faces[:, 1] == faces[:, 2])
        | (faces[:, 0] == faces[:, 2])
    )
    invalid = np.flatnonzero(bad.any(axis=1) | repeated)
    if len(invalid):
        index = int(invalid[0])
        raise InvalidFaceError(index, faces[index], num_vertices)


def _face_cross(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    if len(faces) == 0:
        return np.zeros((0, 3))
    v0 = vertices[faces[:, 0]]
    return np.cross(vertices[faces[:, 1]] - v0, vertices[faces[:, 2]] - v0)


def _edge_lengths_sq(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    if len(faces) == 0:
        return np.zeros((0, 3))
    p = vertices[faces]
    return np.stack(
        [
            np.sum((p[:, 1] - p[:, 0]) ** 2, axis=1),
            np.sum((p[:, 2] - p[:, 1]) ** 2, axis=1),
            np.sum((p[:, 0] - p[:, 2]) ** 2, axis=1),
        ],
        axis=1,
    )


def unique_edges(faces: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Unique undirected edges of a triangle list.

    Returns:
        Tuple of (edges, counts): sorted (i, j) pairs with i < j and the number of
        faces sharing each edge.
    """
    f = np.asarray(faces, dtype=np.int64)
    if len(f) == 0:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64)
    half = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    half.sort(axis=1)
    edges, counts = np.unique(half, axis=0, return_counts=True)
    return edges, counts


def face_geometry(mesh: TriMesh) -> FaceGeometry:
    """
    Per-face unit normal, area and centroid.

    Normals are the normalized cross product of the edge vectors in winding
    order; zero-area faces get a zero normal and are flagged degenerate.

    Args:
        mesh: Triangle mesh

    Returns:
        FaceGeometry: normals (f, 3), areas (f,) in mm^2, centroids (f, 3) in mm,
        degenerate flags (f,)

    Example:
        >>> tri = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
        >>> face_geometry(tri).areas
        array([0.5])
    """
    return FaceGeometry(
        mesh.face_normals, mesh.face_areas, mesh.face_centroids, mesh.degenerate_faces
    )


def vertex_dual_areas(mesh: TriMesh) -> np.ndarray:
    """
    Barycentric dual area of every vertex.

    Each vertex receives one third of the area of every incident face, so the
    dual areas partition the total surface area.

    Args:
        mesh: Triangle mesh

    Returns:
        np.ndarray: (n,) dual areas in mm^2
    """
    return mesh.dual_areas


def vertex_normals(mesh: TriMesh) -> np.ndarray:
    """Area-weighted average of incident face normals, normalized."""
    return mesh.vertex_normals


def is_closed(mesh: TriMesh) -> bool:
    """Check that every edge is shared by exactly two faces."""
    if mesh.num_faces == 0:
        return False
    _, counts = unique_edges(mesh.faces)
    return bool(np.all(counts == 2))


def euler_characteristic(mesh: TriMesh) -> int:
    """V - E + F, counting only vertices referenced by faces."""
    used = np.unique(mesh.faces)
    return int(len(used) - len(mesh.edges()) + mesh.num_faces)


def normalized_copy(mesh: TriMesh, center: Optional[np.ndarray] = None) -> Tuple[TriMesh, float]:
    """
    Scale a mesh to unit bounding-box diagonal.

    Returns:
        Tuple of (scaled mesh, scale factor applied)
    """
    diameter = mesh.diameter()
    scale = 1.0 / diameter if diameter > 0 else 1.0
    origin = mesh.vertices.mean(axis=0) if center is None else np.asarray(center, dtype=float)
    return mesh.with_vertices((mesh.vertices - origin) * scale), scale


def cross_gradient_to_vertices(mesh: TriMesh, grad_cross: np.ndarray) -> np.ndarray:
    """
    Pull back a per-face gradient on (v1 - v0) x (v2 - v0) to the vertices.

    Corner i of a face receives G x (v[i+2] - v[i+1]).
    """
    out = np.zeros_like(mesh.vertices)
    p = mesh.vertices[mesh.faces]
    for corner in range(3):
        edge = p[:, (corner + 2) % 3] - p[:, (corner + 1) % 3]
        np.add.at(out, mesh.faces[:, corner], np.cross(grad_cross, edge))
    return out


def face_values_to_vertices(mesh: TriMesh, per_face: np.ndarray) -> np.ndarray:
    """Add a per-face (f, 3) vector to each of the face's three vertices."""
    out = np.zeros_like(mesh.vertices)
    for corner in range(3):
        np.add.at(out, mesh.faces[:, corner], per_face)
    return out
