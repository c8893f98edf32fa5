"""
Shared fixtures for ghd_recon tests.
"""

import numpy as np
import pytest

from ghd_recon import (
    TriMesh,
    grid_around,
    make_icosphere,
    make_shell_phantom,
    voxelize_oracle,
)


def central_difference(function, x: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Central finite-difference gradient of a scalar function of an array."""
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + step
        plus = function(x)
        flat[i] = saved - step
        minus = function(x)
        flat[i] = saved
        out[i] = (plus - minus) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max absolute difference normalized by the largest numeric magnitude."""
    scale = max(float(np.abs(numeric).max()), 1e-12)
    return float(np.abs(analytic - numeric).max() / scale)


def perturb(mesh: TriMesh, amplitude: float, seed: int = 0) -> TriMesh:
    rng = np.random.default_rng(seed)
    return mesh.with_vertices(mesh.vertices + amplitude * rng.standard_normal(mesh.vertices.shape))


def union(*meshes: TriMesh) -> TriMesh:
    """Disjoint union of meshes as a single triangle soup."""
    offsets = np.cumsum([0] + [m.num_vertices for m in meshes[:-1]])
    return TriMesh(
        np.vstack([m.vertices for m in meshes]),
        np.vstack([m.faces + k for m, k in zip(meshes, offsets)]),
    )


@pytest.fixture(scope="session")
def sphere() -> TriMesh:
    """Icosphere, 3 subdivisions, radius 10 mm."""
    return make_icosphere(3, 10.0)


@pytest.fixture(scope="session")
def small_sphere() -> TriMesh:
    """Icosphere, 1 subdivision, radius 10 mm."""
    return make_icosphere(1, 10.0)


@pytest.fixture(scope="session")
def shell() -> TriMesh:
    """Default shell phantom."""
    return make_shell_phantom((30.0, 30.0, 50.0), wall=8.0, base_cut=0.7)


@pytest.fixture(scope="session")
def coarse_shell() -> TriMesh:
    """Low-resolution shell phantom for expensive checks."""
    return make_shell_phantom((30.0, 30.0, 50.0), wall=8.0, base_cut=0.7, resolution=8)


@pytest.fixture(scope="session")
def sphere_volume(sphere):
    """Oracle voxelization of the radius 10 icosphere at 0.5 mm."""
    return voxelize_oracle(sphere, grid_around(sphere, 0.5))
