"""
Differentiable wall thickness.

Contains the nearest opposite-facing face search, the per-vertex thickness,
the SiLU thickness penalty and its gradient.
"""

import logging
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from .mesh import TriMesh
from .types import ThicknessOptions, VertexGradient

logger = logging.getLogger(__name__)

DEFAULT_NORMAL_WEIGHT = 1.0  # mm
DEFAULT_MIN_THICKNESS = 4.0  # mm

_TILE_PAIRS = 250_000


class ThicknessResult(NamedTuple):
    """Per-query thickness and the closest point on the matched face."""
    vertices: np.ndarray  # (k,) query vertex indices
    values: np.ndarray  # (k,) mm, +inf when no opposite face exists
    face_index: np.ndarray  # (k,) matched face, -1 when flagged
    barycentric: np.ndarray  # (k, 3) closest point on the matched face
    flagged: np.ndarray  # (k,) no candidate face


def closest_point_barycentric(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """
    Barycentric coordinates of the closest point of triangles to points.

    All arguments broadcast against each other with a trailing axis of 3;
    the Voronoi regions of the vertices and edges are tested in turn and the
    interior projection applies otherwise.
    """
    ab = b - a
    ac = c - a
    ap = p - a
    bp = p - b
    cp = p - c
    d1 = np.sum(ab * ap, axis=-1)
    d2 = np.sum(ac * ap, axis=-1)
    d3 = np.sum(ab * bp, axis=-1)
    d4 = np.sum(ac * bp, axis=-1)
    d5 = np.sum(ab * cp, axis=-1)
    d6 = np.sum(ac * cp, axis=-1)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        t_ab = d1 / (d1 - d3)
        t_ac = d2 / (d2 - d6)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = 1.0 / (va + vb + vc)
        v_in = vb * denom
        w_in = vc * denom

    zero = np.zeros_like(d1)
    one = np.ones_like(d1)
    conditions = [
        (d1 <= 0) & (d2 <= 0),
        (d3 >= 0) & (d4 <= d3),
        (vc <= 0) & (d1 >= 0) & (d3 <= 0),
        (d6 >= 0) & (d5 <= d6),
        (vb <= 0) & (d2 >= 0) & (d6 <= 0),
        (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0),
    ]
    u = np.select(conditions, [one, zero, 1 - t_ab, zero, 1 - t_ac, zero], 1 - v_in - w_in)
    v = np.select(conditions, [zero, one, t_ab, zero, zero, 1 - t_bc], v_in)
    w = np.select(conditions, [zero, zero, zero, one, t_ac, t_bc], w_in)
    return np.stack([u, v, w], axis=-1)


def opposite_faces(
    mesh: TriMesh,
    query_vertices: Optional[Sequence[int]] = None,
    normal_weight: float = DEFAULT_NORMAL_WEIGHT,
) -> ThicknessResult:
    """
    Match every query vertex with its nearest opposite-facing face.

    For vertex q the cost of face p is |q - p| + normal_weight * |N_p + N_q|,
    where |q - p| is the exact point-to-triangle distance. Candidate faces face
    away from q (<N_p, N_q> < 0), are not incident to q and are not degenerate.

    Args:
        mesh: Mesh with two opposing sheets, such as a shell
        query_vertices: Vertex subset, default all vertices
        normal_weight: Weight of the normal-consistency term in mm

    Returns:
        ThicknessResult: The matched face, its closest point and the distance
    """
    if normal_weight < 0:
        raise ValueError(f"normal_weight must be non-negative, got {normal_weight}")
    if query_vertices is None:
        query = np.arange(mesh.num_vertices)
    else:
        query = np.asarray(query_vertices, dtype=np.int64).reshape(-1)
    k = len(query)
    values = np.full(k, np.inf)
    face_index = np.full(k, -1, dtype=np.int64)
    barycentric = np.zeros((k, 3))

    corners = mesh.vertices[mesh.faces]
    face_normals = mesh.face_normals
    usable = ~mesh.degenerate_faces
    step = max(1, _TILE_PAIRS // max(1, mesh.num_faces))
    for start in range(0, k, step):
        ids = query[start:start + step]
        q = mesh.vertices[ids][:, None, :]
        n_q = mesh.vertex_normals[ids]
        facing = n_q @ face_normals.T < 0
        incident = (mesh.faces[None, :, :] == ids[:, None, None]).any(axis=2)
        candidate = facing & ~incident & usable[None, :]
        bary = closest_point_barycentric(q, corners[None, :, 0], corners[None, :, 1], corners[None, :, 2])
        closest = np.einsum("qfc,fcd->qfd", bary, corners)
        distance = np.linalg.norm(q - closest, axis=2)
        consistency = np.linalg.norm(n_q[:, None, :] + face_normals[None, :, :], axis=2)
        cost = np.where(candidate, distance + normal_weight * consistency, np.inf)
        best = np.argmin(cost, axis=1)
        rows = np.arange(len(ids))
        found = np.isfinite(cost[rows, best])
        chunk = slice(start, start + len(ids))
        values[chunk] = np.where(found, distance[rows, best], np.inf)
        face_index[chunk] = np.where(found, best, -1)
        barycentric[chunk] = np.where(found[:, None], bary[rows, best], 0.0)

    flagged = face_index < 0
    if flagged.any():
        logger.warning("%d vertices have no opposite-facing face; thickness set to inf", int(flagged.sum()))
    return ThicknessResult(query, values, face_index, barycentric, flagged)


def thickness(
    mesh: TriMesh,
    query_vertices: Optional[Sequence[int]] = None,
    normal_weight: float = DEFAULT_NORMAL_WEIGHT,
) -> np.ndarray:
    """
    Wall thickness at each query vertex in mm.

    Returns the distance part of the minimizing cost (see ``opposite_faces``);
    vertices without an opposite-facing face get +inf.

    Example:
        >>> shell = make_shell_phantom((30, 30, 50), wall=8)
        >>> thickness(shell)
        # about 8 mm at most vertices
    """
    return opposite_faces(mesh, query_vertices, normal_weight).values


def silu(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x * expit(x)


def silu_derivative(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    s = expit(x)
    return s * (1.0 + x * (1.0 - s))


def thickness_gradient(mesh: TriMesh, result: ThicknessResult, upstream: np.ndarray) -> VertexGradient:
    """
    Gradient of sum_k upstream_k * thickness_k with the matching held fixed.

    The query vertex moves along the unit vector from its closest point and the
    matched face corners move against it in proportion to the barycentric
    weights.
    """
    out = np.zeros_like(mesh.vertices)
    ok = ~result.flagged & (np.asarray(upstream) != 0)
    if not ok.any():
        return out
    ids = result.vertices[ok]
    faces = mesh.faces[result.face_index[ok]]
    bary = result.barycentric[ok]
    closest = np.einsum("kc,kcd->kd", bary, mesh.vertices[faces])
    offset = mesh.vertices[ids] - closest
    length = np.linalg.norm(offset, axis=1)
    unit = np.zeros_like(offset)
    nonzero = length > 0
    unit[nonzero] = offset[nonzero] / length[nonzero, None]
    weighted = unit * np.asarray(upstream, dtype=float)[ok][:, None]
    np.add.at(out, ids, weighted)
    for corner in range(3):
        np.add.at(out, faces[:, corner], -bary[:, corner, None] * weighted)
    return out


def thickness_loss_and_gradient(
    mesh: TriMesh,
    t_min: float = DEFAULT_MIN_THICKNESS,
    options: Optional[ThicknessOptions] = None,
) -> Tuple[float, VertexGradient]:
    """Value and vertex gradient of ``thickness_loss``."""
    if t_min <= 0:
        raise ValueError(f"t_min must be positive, got {t_min}")
    if options is None:
        options = {}
    result = opposite_faces(
        mesh, options.get("query_vertices"), options.get("normal_weight", DEFAULT_NORMAL_WEIGHT)
    )
    finite = ~result.flagged
    deficit = t_min - result.values[finite]
    value = float(silu(deficit).sum())
    upstream = np.zeros(len(result.values))
    upstream[finite] = -silu_derivative(deficit)
    return value, thickness_gradient(mesh, result, upstream)


def thickness_loss(
    mesh: TriMesh,
    t_min: float = DEFAULT_MIN_THICKNESS,
    options: Optional[ThicknessOptions] = None,
) -> float:
    """
    Penalty sum_q SiLU(t_min - thickness(q)) on walls thinner than t_min.

    Vertices without an opposite-facing face are skipped.

    Args:
        mesh: Shell mesh
        t_min: Minimum wall thickness in mm
        options: Thickness options (normal_weight, query_vertices)

    Returns:
        float: Penalty, near zero or negative when every wall is thick enough
    """
    if t_min <= 0:
        raise ValueError(f"t_min must be positive, got {t_min}")
    if options is None:
        options = {}
    values = thickness(
        mesh, options.get("query_vertices"), options.get("normal_weight", DEFAULT_NORMAL_WEIGHT)
    )
    finite = np.isfinite(values)
    return float(silu(t_min - values[finite]).sum())


def thickness_mse(mesh: TriMesh, target: float, options: Optional[ThicknessOptions] = None) -> float:
    """Mean squared deviation of the finite thicknesses from a target value in mm^2."""
    if options is None:
        options = {}
    values = thickness(
        mesh, options.get("query_vertices"), options.get("normal_weight", DEFAULT_NORMAL_WEIGHT)
    )
    finite = values[np.isfinite(values)]
    if len(finite) == 0:
        return 0.0
    return float(np.mean((finite - target) ** 2))
