"""
Ray-parity voxelization oracle.

Contains the non-differentiable inside/outside tests used as ground truth:
column-wise parity voxelization of a mesh on a grid and ray parity for
scattered points. Both majority-vote three ray directions.
"""

import logging
from typing import Sequence, Union

import numpy as np

from .mesh import TriMesh, is_closed
from .volume import GridSpec, LabelVolume

logger = logging.getLogger(__name__)

# Ray-origin jitter as a fraction of the voxel spacing.
RAY_JITTER = 1e-7

# Per-axis jitter factors; distinct irrational-ish values keep the three
# column families from sharing a degenerate alignment.
_JITTER_FACTORS = np.array([[0.0, 1.0, 1.618], [1.414, 0.0, 1.0], [1.0, 1.732, 0.0]])

# Slightly off-axis ray directions for scattered-point parity.
_RAY_DIRECTIONS = np.array(
    [
        [1.0, 1.3e-3, 2.1e-3],
        [1.7e-3, 1.0, 0.9e-3],
        [1.1e-3, 2.3e-3, 1.0],
    ]
)
_RAY_DIRECTIONS /= np.linalg.norm(_RAY_DIRECTIONS, axis=1, keepdims=True)

_FACE_CHUNK = 4096
_PAIR_CHUNK = 2_000_000


def grid_around(mesh: Union[TriMesh, Sequence[TriMesh]], spacing: float, padding: float = 2.0) -> GridSpec:
    """
    Isotropic grid covering the bounding box of one or more meshes plus padding.

    Args:
        mesh: Mesh, or meshes, to cover
        spacing: Voxel size in mm
        padding: Margin around the bounding box in mm

    Returns:
        GridSpec: Grid whose voxel centers span the padded box
    """
    if spacing <= 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    meshes = [mesh] if isinstance(mesh, TriMesh) else list(mesh)
    boxes = [item.bounding_box() for item in meshes]
    lo = np.min([box[0] for box in boxes], axis=0) - padding
    hi = np.max([box[1] for box in boxes], axis=0)
    dims = np.ceil((hi + padding - lo) / spacing).astype(int) + 1
    return GridSpec(tuple(int(d) for d in dims), (spacing,) * 3, tuple(float(x) for x in lo))


def _column_parity(mesh: TriMesh, grid: GridSpec, axis: int) -> np.ndarray:
    """Inside parity of every voxel center from rays cast along +axis."""
    a, b = [k for k in range(3) if k != axis]
    dims = np.asarray(grid.dims)
    spacing = np.asarray(grid.spacing)
    origin = np.asarray(grid.origin)
    jitter = RAY_JITTER * spacing * _JITTER_FACTORS[axis]
    n_a, n_b, n_d = dims[a], dims[b], dims[axis]

    # crossings[line, k]: crossings whose first voxel center past them is k
    crossings = np.zeros((n_a * n_b, n_d + 1), dtype=np.int64)
    p = mesh.vertices[mesh.faces]
    for start in range(0, mesh.num_faces, _FACE_CHUNK):
        tri = p[start:start + _FACE_CHUNK]
        lo_a = np.ceil((tri[:, :, a].min(axis=1) - origin[a] - jitter[a]) / spacing[a]).astype(np.int64)
        hi_a = np.floor((tri[:, :, a].max(axis=1) - origin[a] - jitter[a]) / spacing[a]).astype(np.int64)
        lo_b = np.ceil((tri[:, :, b].min(axis=1) - origin[b] - jitter[b]) / spacing[b]).astype(np.int64)
        hi_b = np.floor((tri[:, :, b].max(axis=1) - origin[b] - jitter[b]) / spacing[b]).astype(np.int64)
        lo_a, lo_b = np.maximum(lo_a, 0), np.maximum(lo_b, 0)
        hi_a, hi_b = np.minimum(hi_a, n_a - 1), np.minimum(hi_b, n_b - 1)
        count_a = np.maximum(hi_a - lo_a + 1, 0)
        count_b = np.maximum(hi_b - lo_b + 1, 0)
        pairs = count_a * count_b
        total = int(pairs.sum())
        if total == 0:
            continue
        face = np.repeat(np.arange(len(tri)), pairs)
        local = np.arange(total) - np.repeat(np.cumsum(pairs) - pairs, pairs)
        ia = lo_a[face] + local % count_a[face]
        ib = lo_b[face] + local // count_a[face]
        qa = origin[a] + ia * spacing[a] + jitter[a]
        qb = origin[b] + ib * spacing[b] + jitter[b]

        t = tri[face]
        pa, pb = t[:, :, a], t[:, :, b]
        edge = []
        for i in range(3):
            j = (i + 1) % 3
            edge.append((pa[:, j] - pa[:, i]) * (qb - pb[:, i]) - (pb[:, j] - pb[:, i]) * (qa - pa[:, i]))
        e0, e1, e2 = edge
        hit = ((e0 > 0) & (e1 > 0) & (e2 > 0)) | ((e0 < 0) & (e1 < 0) & (e2 < 0))
        if not hit.any():
            continue
        area = (e0 + e1 + e2)[hit]
        depth = (e1[hit] * t[hit, 0, axis] + e2[hit] * t[hit, 1, axis] + e0[hit] * t[hit, 2, axis]) / area
        first = np.ceil((depth - origin[axis] - jitter[axis]) / spacing[axis]).astype(np.int64)
        first = np.clip(first, 0, n_d)
        line = ia[hit] * n_b + ib[hit]
        np.add.at(crossings, (line, first), 1)

    # Crossings beyond center k are those whose first index exceeds k.
    beyond = np.cumsum(crossings[:, ::-1], axis=1)[:, ::-1][:, 1:]
    parity = (beyond % 2).astype(bool).reshape(n_a, n_b, n_d)
    order = np.argsort([a, b, axis])
    return np.transpose(parity, order)


def voxelize_oracle(mesh: TriMesh, template: Union[GridSpec, LabelVolume]) -> LabelVolume:
    """
    Label voxel centers inside a mesh by ray parity.

    Rays run from every voxel center along +x, +y and +z with origins
    perturbed by ``RAY_JITTER`` times the spacing; a center is labeled 1 when
    at least two of the three rays cross the surface an odd number of times.

    Args:
        mesh: Closed triangle mesh (open meshes give best-effort labels)
        template: Grid, or a volume whose grid is reused

    Returns:
        LabelVolume: Binary labels on the template grid

    Example:
        >>> sphere = make_icosphere(3, 10.0)
        >>> volume = voxelize_oracle(sphere, grid_around(sphere, 0.5))
    """
    grid = template.grid if isinstance(template, LabelVolume) else template
    if not is_closed(mesh):
        logger.warning("Voxelizing a mesh that is not closed; parity labels are best effort")
    votes = np.zeros(grid.dims, dtype=np.int8)
    for axis in range(3):
        votes += _column_parity(mesh, grid, axis)
    labels = (votes >= 2).astype(np.uint8)
    logger.debug("Oracle labeled %d of %d voxels", int(labels.sum()), grid.num_voxels)
    return LabelVolume(grid, labels)


def point_parity(mesh: TriMesh, points: np.ndarray) -> np.ndarray:
    """
    Inside flags for scattered points by majority ray parity.

    Each point casts three slightly off-axis rays; intersections are counted
    with the Moller-Trumbore test evaluated as dense point-by-face products.

    Args:
        mesh: Closed triangle mesh
        points: (k, 3) query points in mm

    Returns:
        np.ndarray: (k,) boolean inside flags
    """
    q = np.atleast_2d(np.asarray(points, dtype=float))
    if mesh.num_faces == 0 or len(q) == 0:
        return np.zeros(len(q), dtype=bool)
    p = mesh.vertices[mesh.faces]
    v0 = p[:, 0]
    edge1 = p[:, 1] - v0
    edge2 = p[:, 2] - v0
    normal = np.cross(edge1, edge2)
    votes = np.zeros(len(q), dtype=np.int8)
    step = max(1, _PAIR_CHUNK // mesh.num_faces)
    for direction in _RAY_DIRECTIONS:
        pvec = np.cross(direction, edge2)
        det = np.einsum("ij,ij->i", edge1, pvec)
        usable = np.abs(det) > 1e-300
        inv = np.where(usable, 1.0 / np.where(usable, det, 1.0), 0.0)
        rvec = np.cross(edge1, direction)
        # With s = q - v0: u = s.pvec, v = s.(edge1 x d), t = s.(edge1 x edge2), all over det.
        bias_u = np.einsum("ij,ij->i", v0, pvec)
        bias_v = np.einsum("ij,ij->i", v0, rvec)
        bias_t = np.einsum("ij,ij->i", v0, normal)
        for start in range(0, len(q), step):
            chunk = q[start:start + step]
            u = (chunk @ pvec.T - bias_u) * inv
            v = (chunk @ rvec.T - bias_v) * inv
            t = (chunk @ normal.T - bias_t) * inv
            hit = usable & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0)
            votes[start:start + step] += (np.count_nonzero(hit, axis=1) % 2).astype(np.int8)
    return votes >= 2
