"""
Label volumes and slice stacks.

Contains the voxel grid geometry, dense binary label volumes, posed 2D label
slices and labeled point sets used as fitting supervision.
"""

from dataclasses import dataclass, field
from typing import Iterator, Sequence, Tuple

import numpy as np

from .exceptions import DimensionMismatchError, SliceValidationError, VolumeFormatError
from .types import Point

# Tolerance on |u| = |v| = 1 and u . v = 0 for slice poses.
ORTHONORMAL_TOLERANCE = 1e-9


def _vector3(value: Point, name: str) -> np.ndarray:
    array = np.asarray(value, dtype=np.float64).reshape(-1)
    if array.shape != (3,):
        raise DimensionMismatchError(name, (3,), array.shape)
    return array


@dataclass(frozen=True)
class GridSpec:
    """
    Axis-aligned voxel grid.

    Voxel (i, j, k) has its center at ``origin + (i, j, k) * spacing``.

    Args:
        dims: (nx, ny, nz) voxel counts
        spacing: (sx, sy, sz) mm per voxel, all positive
        origin: World position of the center of voxel (0, 0, 0) in mm
    """
    dims: Tuple[int, int, int]
    spacing: Tuple[float, float, float]
    origin: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        if len(dims) != 3 or min(dims) < 1:
            raise VolumeFormatError(f"dims must be three positive integers, got {self.dims}")
        if len(spacing) != 3 or min(spacing) <= 0:
            raise VolumeFormatError(f"spacing must be three positive values, got {self.spacing}")
        if len(origin) != 3:
            raise VolumeFormatError(f"origin must have three coordinates, got {self.origin}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @property
    def num_voxels(self) -> int:
        return int(np.prod(self.dims))

    @property
    def voxel_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        """World coordinates of voxel centers along one axis."""
        return self.origin[axis] + np.arange(self.dims[axis]) * self.spacing[axis]

    def centers(self) -> np.ndarray:
        """All voxel centers as (nx*ny*nz, 3), x varying fastest."""
        x, y, z = (self.axis_coordinates(a) for a in range(3))
        gx, gy, gz = np.meshgrid(x, y, z, indexing="ij")
        return np.stack(
            [gx.ravel(order="F"), gy.ravel(order="F"), gz.ravel(order="F")], axis=1
        )

    def index_to_world(self, index: np.ndarray) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(index, dtype=float) * np.asarray(self.spacing)

    def world_to_index(self, points: np.ndarray) -> np.ndarray:
        """Index of the voxel containing each point (not clipped to the grid)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.floor((p - np.asarray(self.origin)) / np.asarray(self.spacing) + 0.5).astype(np.int64)

    def contains_index(self, index: np.ndarray) -> np.ndarray:
        index = np.atleast_2d(index)
        return np.all((index >= 0) & (index < np.asarray(self.dims)), axis=1)


@dataclass(frozen=True)
class LabelVolume:
    """
    Dense binary label volume.

    ``data`` is a read-only uint8 array of shape (nx, ny, nz) indexed [i, j, k];
    on disk it is stored with x varying fastest.
    """
    grid: GridSpec
    data: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.uint8, copy=True)
        if data.shape != self.grid.dims:
            raise DimensionMismatchError("label volume data", self.grid.dims, data.shape)
        if data.size and data.max() > 1:
            raise VolumeFormatError("labels must be 0 or 1")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @classmethod
    def empty(cls, grid: GridSpec) -> "LabelVolume":
        return cls(grid, np.zeros(grid.dims, dtype=np.uint8))

    @property
    def dims(self) -> Tuple[int, int, int]:
        return self.grid.dims

    @property
    def spacing(self) -> Tuple[float, float, float]:
        return self.grid.spacing

    @property
    def origin(self) -> Tuple[float, float, float]:
        return self.grid.origin

    def count(self) -> int:
        """Number of label-1 voxels."""
        return int(np.count_nonzero(self.data))

    def labeled_volume(self) -> float:
        """Label-1 voxel count times voxel volume, in mm^3."""
        return self.count() * self.grid.voxel_volume

    def flat_labels(self) -> np.ndarray:
        """Labels in the order of ``grid.centers()``."""
        return self.data.ravel(order="F")


@dataclass(frozen=True)
class LabelSlice:
    """
    One posed 2D label mask.

    Pixel (i, j) has its center at ``origin + i * spacing[0] * u + j * spacing[1] * v``;
    the slice normal is ``u x v``.
    """
    origin: np.ndarray
    u: np.ndarray
    v: np.ndarray
    spacing: Tuple[float, float]
    mask: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        origin = _vector3(self.origin, "slice origin")
        u = _vector3(self.u, "slice u axis")
        v = _vector3(self.v, "slice v axis")
        mask = np.array(self.mask, dtype=np.uint8, copy=True)
        if mask.ndim != 2:
            raise DimensionMismatchError("slice mask", "2 dimensions", mask.ndim)
        if mask.size and mask.max() > 1:
            raise VolumeFormatError("slice labels must be 0 or 1")
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 2 or min(spacing) <= 0:
            raise VolumeFormatError(f"slice spacing must be two positive values, got {self.spacing}")
        for array in (origin, u, v, mask):
            array.flags.writeable = False
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "mask", mask)

    @property
    def normal(self) -> np.ndarray:
        return np.cross(self.u, self.v)

    def validate(self, index: int = 0) -> None:
        """Raise SliceValidationError unless (u, v) is orthonormal."""
        for name, axis in (("u", self.u), ("v", self.v)):
            if abs(np.linalg.norm(axis) - 1.0) > ORTHONORMAL_TOLERANCE:
                raise SliceValidationError(index, f"axis {name} is not a unit vector: {axis.tolist()}")
        if abs(float(np.dot(self.u, self.v))) > ORTHONORMAL_TOLERANCE:
            raise SliceValidationError(index, "axes u and v are not orthogonal")

    def pixel_centers(self) -> np.ndarray:
        """World positions of all pixel centers as (ni*nj, 3), i varying fastest."""
        ni, nj = self.mask.shape
        ii, jj = np.meshgrid(np.arange(ni), np.arange(nj), indexing="ij")
        i = ii.ravel(order="F")[:, None] * self.spacing[0]
        j = jj.ravel(order="F")[:, None] * self.spacing[1]
        return self.origin + i * self.u + j * self.v

    def flat_labels(self) -> np.ndarray:
        return self.mask.ravel(order="F")


@dataclass(frozen=True)
class SliceStack:
    """Ordered, nonempty sequence of posed label slices."""
    slices: Tuple[LabelSlice, ...]

    def __post_init__(self) -> None:
        slices = tuple(self.slices)
        if not slices:
            raise SliceValidationError(0, "a slice stack needs at least one slice")
        for index, item in enumerate(slices):
            item.validate(index)
        object.__setattr__(self, "slices", slices)

    def __len__(self) -> int:
        return len(self.slices)

    def __iter__(self) -> Iterator[LabelSlice]:
        return iter(self.slices)

    def __getitem__(self, index: int) -> LabelSlice:
        return self.slices[index]


@dataclass(frozen=True)
class LabeledPoints:
    """
    Query points with binary inside labels.

    ``insufficient`` is set when a sampler could not meet its budget.
    """
    positions: np.ndarray
    labels: np.ndarray
    insufficient: bool = False

    def __post_init__(self) -> None:
        positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        labels = np.asarray(self.labels, dtype=np.uint8).reshape(-1)
        if len(positions) != len(labels):
            raise DimensionMismatchError("labels", len(positions), len(labels))
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def foreground(self) -> np.ndarray:
        return self.positions[self.labels == 1]

    @property
    def background(self) -> np.ndarray:
        return self.positions[self.labels == 0]

    @classmethod
    def concatenate(cls, parts: Sequence["LabeledPoints"]) -> "LabeledPoints":
        if not parts:
            return cls(np.zeros((0, 3)), np.zeros(0, dtype=np.uint8))
        return cls(
            np.vstack([p.positions for p in parts]),
            np.concatenate([p.labels for p in parts]),
            any(p.insufficient for p in parts),
        )
