"""
Area-uniform surface sampling.

Contains SurfaceSamples, a set of barycentric sample sites that can be
re-evaluated on any mesh sharing the same connectivity.
"""

from typing import NamedTuple, Optional

import numpy as np

from .exceptions import ConnectivityMismatchError
from .mesh import TriMesh


class SurfaceSamples(NamedTuple):
    """Sample sites given as (face index, barycentric weights) plus their positions."""
    face_index: np.ndarray  # (k,)
    barycentric: np.ndarray  # (k, 3), rows sum to 1
    points: np.ndarray  # (k, 3) mm

    def evaluate(self, mesh: TriMesh) -> np.ndarray:
        """Positions of the same sample sites on another mesh of equal connectivity."""
        if len(self.face_index) and self.face_index.max() >= mesh.num_faces:
            raise ConnectivityMismatchError(
                f"samples reference face {int(self.face_index.max())} but the mesh has "
                f"{mesh.num_faces} faces"
            )
        corners = mesh.vertices[mesh.faces[self.face_index]]
        return np.einsum("kc,kcd->kd", self.barycentric, corners)

    def scatter(self, mesh: TriMesh, gradient: np.ndarray) -> np.ndarray:
        """Pull a per-sample (k, 3) gradient back to the mesh vertices."""
        out = np.zeros_like(mesh.vertices)
        faces = mesh.faces[self.face_index]
        for corner in range(3):
            np.add.at(out, faces[:, corner], self.barycentric[:, corner, None] * gradient)
        return out


def sample_surface(
    mesh: TriMesh,
    count: int,
    seed: Optional[int] = 0,
    rng: Optional[np.random.Generator] = None,
) -> SurfaceSamples:
    """
    Draw area-uniform random points on a mesh surface.

    Faces are chosen with probability proportional to their area and points
    are placed uniformly inside each chosen triangle.

    Args:
        mesh: Triangle mesh with at least one face of positive area
        count: Number of samples
        seed: Seed used when no generator is given
        rng: Optional generator, takes precedence over seed

    Returns:
        SurfaceSamples: Deterministic for a given seed

    Example:
        >>> samples = sample_surface(make_icosphere(2, 10.0), 1000, seed=1)
        >>> samples.points.shape
        (1000, 3)
    """
    generator = rng if rng is not None else np.random.default_rng(seed)
    areas = mesh.face_areas
    total = areas.sum()
    if count <= 0 or total <= 0:
        return SurfaceSamples(
            np.zeros(0, dtype=np.int64), np.zeros((0, 3)), np.zeros((0, 3))
        )
    face_index = generator.choice(mesh.num_faces, size=count, p=areas / total)
    r1 = np.sqrt(generator.random(count))
    r2 = generator.random(count)
    barycentric = np.stack([1.0 - r1, r1 * (1.0 - r2), r1 * r2], axis=1)
    corners = mesh.vertices[mesh.faces[face_index]]
    points = np.einsum("kc,kcd->kd", barycentric, corners)
    return SurfaceSamples(face_index.astype(np.int64), barycentric, points)
