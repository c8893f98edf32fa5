"""
Synthetic mesh generators.

Contains the icosphere, cube and truncated prolate spheroid phantoms used as
canonical shapes and test fixtures, and midpoint subdivision.
"""

import logging
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .exceptions import PhantomParameterError
from .mesh import TriMesh
from .types import Point

logger = logging.getLogger(__name__)

_GOLDEN = (1.0 + 5.0 ** 0.5) / 2.0

_ICOSAHEDRON_VERTICES = np.array(
    [
        [-1, _GOLDEN, 0], [1, _GOLDEN, 0], [-1, -_GOLDEN, 0], [1, -_GOLDEN, 0],
        [0, -1, _GOLDEN], [0, 1, _GOLDEN], [0, -1, -_GOLDEN], [0, 1, -_GOLDEN],
        [_GOLDEN, 0, -1], [_GOLDEN, 0, 1], [-_GOLDEN, 0, -1], [-_GOLDEN, 0, 1],
    ],
    dtype=np.float64,
)

_ICOSAHEDRON_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def subdivide(mesh: TriMesh, levels: int = 1) -> TriMesh:
    """
    Midpoint 1-to-4 subdivision without projection.

    Every edge gains its midpoint and every face is split into four, keeping the
    winding of the parent face.
    """
    vertices = np.asarray(mesh.vertices)
    faces = np.asarray(mesh.faces)
    for _ in range(levels):
        vertices, faces = _subdivide_once(vertices, faces)
    return TriMesh(vertices, faces, validate=False)


def _subdivide_once(vertices: np.ndarray, faces: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    num_faces = len(faces)
    half = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    half.sort(axis=1)
    edges, inverse = np.unique(half, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    midpoints = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    mid = len(vertices) + inverse
    ab, bc, ca = mid[:num_faces], mid[num_faces:2 * num_faces], mid[2 * num_faces:]
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    new_faces = np.concatenate(
        [
            np.stack([a, ab, ca], axis=1),
            np.stack([b, bc, ab], axis=1),
            np.stack([c, ca, bc], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ]
    )
    return np.vstack([vertices, midpoints]), new_faces


def make_icosphere(
    subdivisions: int = 3,
    radius: float = 1.0,
    center: Point = (0.0, 0.0, 0.0),
) -> TriMesh:
    """
    Geodesic sphere from a subdivided icosahedron.

    Args:
        subdivisions: Number of 1-to-4 refinements (0 gives the icosahedron)
        radius: Sphere radius in mm
        center: Sphere center in mm

    Returns:
        TriMesh: Closed outward-oriented mesh with 10 * 4**s + 2 vertices

    Example:
        >>> make_icosphere(3, 10.0).num_faces
        1280
    """
    if subdivisions < 0:
        raise ValueError(f"subdivisions must be non-negative, got {subdivisions}")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    vertices = _ICOSAHEDRON_VERTICES.copy()
    faces = _ICOSAHEDRON_FACES.copy()
    for _ in range(subdivisions):
        vertices, faces = _subdivide_once(vertices, faces)
        vertices /= np.linalg.norm(vertices, axis=1, keepdims=True)
    vertices /= np.linalg.norm(vertices, axis=1, keepdims=True)
    faces = _orient_outward(vertices, faces)
    return TriMesh(vertices * radius + np.asarray(center, dtype=float), faces)


def make_box(size: Point = (1.0, 1.0, 1.0), center: Point = (0.0, 0.0, 0.0)) -> TriMesh:
    """Axis-aligned box of 12 outward-oriented triangles."""
    half = 0.5 * np.asarray(size, dtype=float)
    corners = np.array(
        [[x, y, z] for z in (-1, 1) for y in (-1, 1) for x in (-1, 1)], dtype=float
    )
    faces = np.array(
        [
            [0, 2, 1], [1, 2, 3],  # z-
            [4, 5, 6], [5, 7, 6],  # z+
            [0, 1, 4], [1, 5, 4],  # y-
            [2, 6, 3], [3, 6, 7],  # y+
            [0, 4, 2], [2, 4, 6],  # x-
            [1, 3, 5], [3, 7, 5],  # x+
        ],
        dtype=np.int64,
    )
    return TriMesh(corners * half + np.asarray(center, dtype=float), faces)


def _orient_outward(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    p = vertices[faces]
    signed = np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum()
    return faces if signed >= 0 else faces[:, ::-1].copy()


# Truncated prolate spheroid meshing. A spheroid with radii (a, b, c) is centered
# at the origin with its long axis along z and its apex at z = -c; it is cut by
# the basal plane z = z_base.


def base_plane(radii: Sequence[float], base_cut: float) -> float:
    """Height of the basal plane for a cut retaining `base_cut` of the long axis."""
    c = float(radii[2])
    return -c + 2.0 * c * base_cut


def truncated_spheroid_volume(radii: Sequence[float], z_base: float) -> float:
    """Exact volume of a spheroid between its apex and the basal plane."""
    a, b, c = (float(r) for r in radii)
    z = min(max(z_base, -c), c)

    def primitive(t: float) -> float:
        return t - t ** 3 / (3.0 * c * c)

    return float(np.pi * a * b * (primitive(z) - primitive(-c)))


def _ellipse_perimeter(a: float, b: float) -> float:
    if a <= 0 and b <= 0:
        return 0.0
    return float(np.pi * (3.0 * (a + b) - np.sqrt((3.0 * a + b) * (a + 3.0 * b))))


def _ring(a: float, b: float, z: float, count: int, offset: float) -> np.ndarray:
    phi = offset + 2.0 * np.pi * np.arange(count) / count
    return np.stack([a * np.cos(phi), b * np.sin(phi), np.full(count, z)], axis=1)


def _meridian_table(radii: Sequence[float], z_base: float) -> Tuple[np.ndarray, np.ndarray]:
    """Polar angle samples from the apex to the basal plane and their arc length."""
    a, b, c = (float(r) for r in radii)
    theta_base = float(np.arccos(np.clip(-z_base / c, -1.0, 1.0)))
    theta = np.linspace(0.0, theta_base, 4001)
    speed = np.hypot(0.5 * (a + b) * np.cos(theta), c * np.sin(theta))
    arc = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(theta))])
    return theta, arc


def _meridian_length(radii: Sequence[float], z_base: float) -> float:
    return float(_meridian_table(radii, z_base)[1][-1])


def _base_radii(radii: Sequence[float], z_base: float) -> Tuple[float, float]:
    a, b, c = (float(r) for r in radii)
    s = float(np.sqrt(max(0.0, 1.0 - (z_base / c) ** 2)))
    return a * s, b * s


def _meridian_rings(radii: Sequence[float], z_base: float, h: float) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Apex point and rings of a truncated spheroid, spaced ~h along the meridian."""
    a, b, c = (float(r) for r in radii)
    theta, arc = _meridian_table(radii, z_base)
    theta_base = float(theta[-1])
    length = arc[-1]
    count = max(2, int(round(length / h)))
    rings = []
    for k in range(1, count + 1):
        t = theta_base if k == count else float(np.interp(k * length / count, arc, theta))
        ra, rb = a * np.sin(t), b * np.sin(t)
        n = max(6, int(round(_ellipse_perimeter(ra, rb) / h)))
        offset = np.pi / n if k % 2 else 0.0
        z = z_base if k == count else -c * np.cos(t)
        rings.append(_ring(ra, rb, z, n, offset))
    return np.array([0.0, 0.0, -c]), rings


def _zip_rings(ring_a: np.ndarray, ring_b: np.ndarray, index_a: np.ndarray, index_b: np.ndarray) -> List[List[int]]:
    """Triangulate the band between two closed rings, preferring short diagonals."""
    n_a, n_b = len(ring_a), len(ring_b)
    start = int(np.argmin(np.linalg.norm(ring_b - ring_a[0], axis=1)))
    order_b = (start + np.arange(n_b + 1)) % n_b
    order_a = np.arange(n_a + 1) % n_a
    triangles = []
    i = j = 0
    while i < n_a or j < n_b:
        if i == n_a:
            advance_a = False
        elif j == n_b:
            advance_a = True
        else:
            diag_a = np.linalg.norm(ring_a[order_a[i + 1]] - ring_b[order_b[j]])
            diag_b = np.linalg.norm(ring_a[order_a[i]] - ring_b[order_b[j + 1]])
            advance_a = diag_a <= diag_b
        if advance_a:
            triangles.append([index_a[order_a[i]], index_a[order_a[i + 1]], index_b[order_b[j]]])
            i += 1
        else:
            triangles.append([index_a[order_a[i]], index_b[order_b[j + 1]], index_b[order_b[j]]])
            j += 1
    return triangles


class _MeshBuilder:
    """Accumulates vertices and oriented triangle groups."""

    def __init__(self) -> None:
        self.vertices: List[np.ndarray] = []
        self.count = 0
        self.faces: List[np.ndarray] = []
        self.references: List[np.ndarray] = []

    def add(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        index = self.count + np.arange(len(points))
        self.vertices.append(points)
        self.count += len(points)
        return index

    def surface(self, apex: np.ndarray, rings: List[np.ndarray]) -> List[np.ndarray]:
        """Add a fan + ring bands; returns the index arrays of the rings."""
        apex_index = self.add(apex)[0]
        indices = [self.add(ring) for ring in rings]
        first = indices[0]
        tris = [[apex_index, first[k], first[(k + 1) % len(first)]] for k in range(len(first))]
        for k in range(len(rings) - 1):
            tris.extend(_zip_rings(rings[k], rings[k + 1], indices[k], indices[k + 1]))
        self.faces.append(np.asarray(tris, dtype=np.int64).reshape(-1, 3))
        return indices

    def band(self, rings: List[np.ndarray], indices: List[np.ndarray]) -> None:
        tris: List[List[int]] = []
        for k in range(len(rings) - 1):
            tris.extend(_zip_rings(rings[k], rings[k + 1], indices[k], indices[k + 1]))
        self.faces.append(np.asarray(tris, dtype=np.int64).reshape(-1, 3))

    def orient(self, group: int, outward: Callable[[np.ndarray], np.ndarray]) -> None:
        """Flip faces of a group whose normal disagrees with `outward(centroids)`."""
        vertices = np.vstack(self.vertices)
        faces = self.faces[group]
        p = vertices[faces]
        normals = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        flip = np.einsum("ij,ij->i", normals, outward(p.mean(axis=1))) < 0
        faces[flip] = faces[flip][:, ::-1]

    def build(self, center: np.ndarray) -> TriMesh:
        vertices = np.vstack(self.vertices) + center
        return TriMesh(vertices, np.vstack(self.faces))


def _spheroid_gradient(radii: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    scale = 1.0 / np.asarray(radii, dtype=float) ** 2

    def outward(points: np.ndarray) -> np.ndarray:
        return points * scale

    return outward


def _plane_rings(
    outer_radii: Tuple[float, float],
    inner_radii: Tuple[float, float],
    z: float,
    h: float,
    count: int,
) -> List[np.ndarray]:
    """Intermediate elliptic rings of a planar annulus, from outer to inner."""
    rings = []
    for k in range(1, count + 1):
        t = k / (count + 1)
        ra = (1 - t) * outer_radii[0] + t * inner_radii[0]
        rb = (1 - t) * outer_radii[1] + t * inner_radii[1]
        n = max(6, int(round(_ellipse_perimeter(ra, rb) / h)))
        rings.append(_ring(ra, rb, z, n, np.pi / n if k % 2 else 0.0))
    return rings


def _up(points: np.ndarray) -> np.ndarray:
    return np.tile([0.0, 0.0, 1.0], (len(points), 1))


def make_shell_phantom(
    outer_radii: Sequence[float] = (30.0, 30.0, 50.0),
    wall: float = 8.0,
    base_cut: float = 0.7,
    resolution: int = 20,
    center: Point = (0.0, 0.0, 0.0),
) -> TriMesh:
    """
    Thick-walled truncated prolate spheroid (left-ventricle-like shell).

    The outer surface is a spheroid with radii (a, b, c) and its apex at z = -c;
    the inner surface has radii (a - wall, b - wall, c - wall). Both are cut by
    the basal plane z = -c + 2c * base_cut and joined by an annular cap.

    Args:
        outer_radii: Outer radii (a, b, c) in mm, long axis along z
        wall: Wall thickness in mm
        base_cut: Retained fraction of the long axis, measured from the apex
        resolution: Number of edge lengths along the outer meridian
        center: Translation applied to the result

    Returns:
        TriMesh: Closed genus-0 mesh with outward normals

    Raises:
        PhantomParameterError: When the inner surface would self-intersect or the
            basal plane does not open the cavity

    Example:
        >>> shell = make_shell_phantom((30, 30, 50), wall=8, base_cut=0.7)
    """
    _check_phantom(outer_radii, base_cut, resolution)
    a, b, c = (float(r) for r in outer_radii)
    if wall <= 0:
        raise PhantomParameterError(f"wall must be positive, got {wall}")
    if wall >= min(a, b, c):
        raise PhantomParameterError(
            f"wall {wall} mm is not smaller than the smallest outer radius "
            f"{min(a, b, c)} mm: the inner surface would self-intersect"
        )
    inner = (a - wall, b - wall, c - wall)
    z_base = base_plane(outer_radii, base_cut)
    if not -inner[2] < z_base < inner[2]:
        raise PhantomParameterError(
            f"basal plane z={z_base:.3f} mm does not cut the inner surface "
            f"(|z| must be below {inner[2]:.3f} mm)"
        )

    h = _meridian_length(outer_radii, z_base) / resolution
    outer_apex, outer_rings = _meridian_rings(outer_radii, z_base, h)
    inner_apex, inner_rings = _meridian_rings(inner, z_base, h)

    builder = _MeshBuilder()
    outer_index = builder.surface(outer_apex, outer_rings)
    inner_index = builder.surface(inner_apex, inner_rings)

    outer_base = _base_radii(outer_radii, z_base)
    inner_base = _base_radii(inner, z_base)
    width = 0.5 * (outer_base[0] - inner_base[0] + outer_base[1] - inner_base[1])
    cap = _plane_rings(outer_base, inner_base, z_base, h, max(0, int(round(width / h)) - 1))
    cap_index = [builder.add(ring) for ring in cap]
    builder.band(
        [outer_rings[-1]] + cap + [inner_rings[-1]],
        [outer_index[-1]] + cap_index + [inner_index[-1]],
    )

    builder.orient(0, _spheroid_gradient(outer_radii))
    inner_gradient = _spheroid_gradient(inner)
    builder.orient(1, lambda p: -inner_gradient(p))
    builder.orient(2, _up)
    mesh = builder.build(np.asarray(center, dtype=float))
    logger.debug("Shell phantom with %d vertices, %d faces", mesh.num_vertices, mesh.num_faces)
    return mesh


def shell_phantom_volume(outer_radii: Sequence[float], wall: float, base_cut: float) -> float:
    """Analytic volume of the shell phantom's wall."""
    a, b, c = (float(r) for r in outer_radii)
    z_base = base_plane(outer_radii, base_cut)
    inner = (a - wall, b - wall, c - wall)
    return truncated_spheroid_volume(outer_radii, z_base) - truncated_spheroid_volume(inner, z_base)


def make_cavity_phantom(
    radii: Sequence[float] = (22.0, 22.0, 42.0),
    base_cut: float = 0.7,
    resolution: int = 20,
    center: Point = (0.0, 0.0, 0.0),
) -> TriMesh:
    """
    Solid truncated prolate spheroid closed by a flat basal disk.

    Stands in for a blood-pool cavity: its enclosed volume is
    `truncated_spheroid_volume(radii, base_plane(radii, base_cut))` up to the
    polyhedral approximation.
    """
    _check_phantom(radii, base_cut, resolution)
    z_base = base_plane(radii, base_cut)
    h = _meridian_length(radii, z_base) / resolution
    apex, rings = _meridian_rings(radii, z_base, h)

    builder = _MeshBuilder()
    index = builder.surface(apex, rings)
    base = _base_radii(radii, z_base)
    count = max(1, int(round(0.5 * (base[0] + base[1]) / h)))
    disk = _plane_rings(base, (0.0, 0.0), z_base, h, count - 1)
    disk_index = [builder.add(ring) for ring in disk]
    builder.band([rings[-1]] + disk, [index[-1]] + disk_index)
    center_index = builder.add(np.array([0.0, 0.0, z_base]))[0]
    last = disk_index[-1] if disk_index else index[-1]
    fan = [[center_index, last[(k + 1) % len(last)], last[k]] for k in range(len(last))]
    builder.faces.append(np.asarray(fan, dtype=np.int64))

    builder.orient(0, _spheroid_gradient(radii))
    builder.orient(1, _up)
    builder.orient(2, _up)
    return builder.build(np.asarray(center, dtype=float))


def _check_phantom(radii: Sequence[float], base_cut: float, resolution: int) -> None:
    if len(radii) != 3 or min(radii) <= 0:
        raise PhantomParameterError(f"radii must be three positive values, got {tuple(radii)}")
    if not 0.0 < base_cut < 1.0:
        raise PhantomParameterError(f"base_cut must lie in (0, 1), got {base_cut}")
    if resolution < 4:
        raise PhantomParameterError(f"resolution must be at least 4, got {resolution}")

