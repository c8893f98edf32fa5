"""
Mesh graph Laplacians.

Contains unweighted, inverse-distance, cotangent and mixed Laplacians in the
L = D - W convention (positive diagonal, zero row sums).
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
from scipy import sparse

from .exceptions import CoincidentVerticesError, NonManifoldEdgeError
from .mesh import TriMesh, normalized_copy, unique_edges
from .types import LaplacianKind

logger = logging.getLogger(__name__)

DEFAULT_NORM_WEIGHT = 0.1
DEFAULT_UNWEIGHTED_WEIGHT = 0.05


@dataclass(frozen=True)
class GraphLaplacian:
    """
    Symmetric sparse graph Laplacian.

    Attributes:
        matrix: (n, n) CSR matrix, L = D - W
        kind: Edge weighting
        norm_weight: Inverse-distance mixing weight (mixed kind only)
        unw_weight: Unweighted mixing weight (mixed kind only)
        scale: Factor the mesh was scaled by before construction
    """
    matrix: sparse.csr_matrix = field(repr=False)
    kind: LaplacianKind
    norm_weight: float = 0.0
    unw_weight: float = 0.0
    scale: float = 1.0

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def quadratic_form(self, x: np.ndarray) -> float:
        """x^T L x."""
        return float(x @ (self.matrix @ x))


def _assemble(n: int, rows: np.ndarray, cols: np.ndarray, weights: np.ndarray) -> sparse.csr_matrix:
    """L = diag(W 1) - W from upper-triangle edge weights (duplicates summed)."""
    upper = sparse.coo_matrix((weights, (rows, cols)), shape=(n, n)).tocsr()
    upper.sum_duplicates()
    w = (upper + upper.T).tocsr()
    degree = np.asarray(w.sum(axis=1)).ravel()
    return (sparse.diags(degree) - w).tocsr()


def _upper(i: np.ndarray, j: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return np.minimum(i, j), np.maximum(i, j)


def laplacian_from_edges(
    num_nodes: int,
    edges: np.ndarray,
    weights: Optional[np.ndarray] = None,
    kind: Union[LaplacianKind, str] = LaplacianKind.UNWEIGHTED,
) -> GraphLaplacian:
    """
    Laplacian of an abstract weighted graph.

    Args:
        num_nodes: Number of nodes
        edges: (e, 2) node index pairs, each undirected edge listed once
        weights: (e,) edge weights, default 1

    Example:
        >>> path = laplacian_from_edges(3, [[0, 1], [1, 2]])
        >>> path.to_dense()
        array([[ 1., -1.,  0.],
               [-1.,  2., -1.],
               [ 0., -1.,  1.]])
    """
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    w = np.ones(len(e)) if weights is None else np.asarray(weights, dtype=float)
    rows, cols = _upper(e[:, 0], e[:, 1])
    return GraphLaplacian(_assemble(num_nodes, rows, cols, w), LaplacianKind(kind))


def _unweighted(mesh: TriMesh) -> sparse.csr_matrix:
    edges = mesh.edges()
    return _assemble(mesh.num_vertices, edges[:, 0], edges[:, 1], np.ones(len(edges)))


def _inverse_distance(mesh: TriMesh) -> sparse.csr_matrix:
    edges = mesh.edges()
    lengths = np.linalg.norm(mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]], axis=1)
    zero = lengths <= 0
    if zero.any():
        raise CoincidentVerticesError(edges[zero])
    return _assemble(mesh.num_vertices, edges[:, 0], edges[:, 1], 1.0 / lengths)


def _cotangent(mesh: TriMesh) -> sparse.csr_matrix:
    edges, counts = unique_edges(mesh.faces)
    if (counts > 2).any():
        raise NonManifoldEdgeError(edges[counts > 2])
    p = mesh.vertices[mesh.faces]
    ok = ~mesh.degenerate_faces
    if not ok.all():
        logger.warning("Cotangent weights skip %d degenerate faces", int((~ok).sum()))
    rows, cols, weights = [], [], []
    for corner in range(3):
        i = (corner + 1) % 3
        j = (corner + 2) % 3
        a = p[:, i] - p[:, corner]
        b = p[:, j] - p[:, corner]
        sin = np.linalg.norm(np.cross(a, b), axis=1)
        cos = np.einsum("ij,ij->i", a, b)
        cot = np.zeros(len(p))
        cot[ok] = cos[ok] / sin[ok]
        r, c = _upper(mesh.faces[:, i], mesh.faces[:, j])
        rows.append(r)
        cols.append(c)
        weights.append(0.5 * cot)
    return _assemble(
        mesh.num_vertices, np.concatenate(rows), np.concatenate(cols), np.concatenate(weights)
    )


def build_laplacian(
    mesh: TriMesh,
    kind: Union[LaplacianKind, str] = LaplacianKind.MIXED,
    norm_weight: float = DEFAULT_NORM_WEIGHT,
    unw_weight: float = DEFAULT_UNWEIGHTED_WEIGHT,
    normalize: bool = False,
) -> GraphLaplacian:
    """
    Build a mesh graph Laplacian.

    Edge weights are 1 (unweighted), 1/|x_j - x_i| (inverse distance) or
    (cot a_ij + cot b_ij)/2 over the angles opposite the edge (cotangent; a
    boundary edge uses its single angle). The mixed Laplacian is
    cotangent + norm_weight * inverse_distance + unw_weight * unweighted.

    Args:
        mesh: Triangle mesh
        kind: Edge weighting
        norm_weight: Inverse-distance weight of the mixed Laplacian
        unw_weight: Unweighted weight of the mixed Laplacian
        normalize: Scale the mesh to unit bounding-box diagonal first, which
            makes inverse-distance weights scale free

    Returns:
        GraphLaplacian: Symmetric with zero row sums

    Raises:
        NonManifoldEdgeError: When an edge has more than two faces (cotangent, mixed)
        CoincidentVerticesError: When an edge has zero length (inverse distance, mixed)

    Example:
        >>> lap = build_laplacian(make_icosphere(2), "mixed")
    """
    kind = LaplacianKind(kind)
    scale = 1.0
    if normalize:
        mesh, scale = normalized_copy(mesh)
    if kind is LaplacianKind.UNWEIGHTED:
        matrix = _unweighted(mesh)
    elif kind is LaplacianKind.INV_DISTANCE:
        matrix = _inverse_distance(mesh)
    elif kind is LaplacianKind.COTANGENT:
        matrix = _cotangent(mesh)
    else:
        matrix = (
            _cotangent(mesh)
            + norm_weight * _inverse_distance(mesh)
            + unw_weight * _unweighted(mesh)
        ).tocsr()
        return GraphLaplacian(matrix, kind, float(norm_weight), float(unw_weight), scale)
    return GraphLaplacian(matrix, kind, scale=scale)
