"""
Slice extraction and supervision point sampling.

Contains extract_slices, which cuts axis-aligned label planes out of a volume,
and sample_points, which draws labeled query points from a volume or a slice
stack for the occupancy loss.
"""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from .exceptions import SliceSelectionError
from .types import Axis, SampleOptions
from .volume import LabeledPoints, LabelSlice, LabelVolume, SliceStack

logger = logging.getLogger(__name__)

# Default background band, in multiples of the largest voxel or pixel spacing.
BACKGROUND_BAND_FACTOR = 5.0

# Jitter stays strictly inside the voxel.
_JITTER_SCALE = 0.999

_EYE = np.eye(3)

# (u axis, v axis) of the slice plane for each cutting axis; u x v is the axis.
_SLICE_AXES = {0: (1, 2), 1: (2, 0), 2: (0, 1)}


def extract_slices(
    volume: LabelVolume,
    axis: Union[Axis, str],
    indices: Sequence[int],
) -> SliceStack:
    """
    Cut axis-aligned label planes out of a volume.

    Slices carry the exact voxel rows of their index (no interpolation) and a
    pose such that pixel (i, j) of the slice sits on the corresponding voxel
    center.

    Args:
        volume: Dense label volume
        axis: Cutting axis, "x", "y" or "z"
        indices: Voxel indices along the axis, in output order

    Returns:
        SliceStack: One slice per index

    Raises:
        SliceSelectionError: When indices are empty or out of range

    Example:
        >>> stack = extract_slices(volume, "z", [0, 10, 20])
        >>> len(stack)
        3
    """
    axis = Axis(axis)
    d = axis.index
    indices = [int(i) for i in indices]
    if not indices:
        raise SliceSelectionError("at least one slice index is required")
    n = volume.dims[d]
    bad = [i for i in indices if i < 0 or i >= n]
    if bad:
        raise SliceSelectionError(f"slice indices {bad} are outside 0..{n - 1} along {axis.value}")

    a, b = _SLICE_AXES[d]
    origin = np.asarray(volume.origin, dtype=float)
    spacing = volume.spacing
    slices = []
    for k in indices:
        plane = np.take(volume.data, k, axis=d)
        # np.take leaves the remaining axes in increasing order; reorder to (a, b).
        remaining = [x for x in range(3) if x != d]
        mask = plane if remaining == [a, b] else plane.T
        slice_origin = origin.copy()
        slice_origin[d] += k * spacing[d]
        slices.append(
            LabelSlice(slice_origin, _EYE[a], _EYE[b], (spacing[a], spacing[b]), mask)
        )
    return SliceStack(tuple(slices))


def spaced_slice_indices(volume: LabelVolume, axis: Union[Axis, str], count: int) -> List[int]:
    """
    Indices of ``count`` evenly spaced planes across the labeled extent along an axis.

    Planes sit at the centers of `count` equal bins between the first and last
    plane holding a label-1 voxel; coinciding indices are merged.

    Raises:
        SliceSelectionError: When count is below 1 or the volume has no label-1 voxel
    """
    d = Axis(axis).index
    if count < 1:
        raise SliceSelectionError(f"slice count must be at least 1, got {count}")
    occupied = np.flatnonzero(volume.data.any(axis=tuple(x for x in range(3) if x != d)))
    if len(occupied) == 0:
        raise SliceSelectionError("the volume has no labeled voxel to slice")
    lo, hi = occupied[0], occupied[-1]
    positions = lo + (hi - lo) * (np.arange(count) + 0.5) / count
    return sorted({int(round(p)) for p in positions})


def _choose(
    rng: np.random.Generator, candidates: np.ndarray, count: int, what: str
) -> Tuple[np.ndarray, bool]:
    if count <= 0:
        return candidates[:0], False
    if len(candidates) < count:
        logger.warning(
            "Only %d %s candidates for a budget of %d; returning all of them",
            len(candidates), what, count,
        )
        return candidates, True
    return rng.choice(candidates, size=count, replace=False), False


def _jitter(rng: np.random.Generator, count: int, steps: np.ndarray) -> np.ndarray:
    """(count, 3) offsets uniform within +-half a step along each step vector."""
    u = rng.random((count, len(steps))) - 0.5
    return _JITTER_SCALE * u @ steps


def _sample_volume(
    volume: LabelVolume, n_fg: int, n_bg: int, band: float, rng: np.random.Generator, jitter: bool
) -> LabeledPoints:
    labels = volume.flat_labels()
    foreground = np.flatnonzero(labels == 1)
    if len(foreground):
        distance = ndimage.distance_transform_edt(volume.data == 0, sampling=volume.spacing)
        near = distance.ravel(order="F") <= band
    else:
        near = np.zeros(len(labels), dtype=bool)
    background = np.flatnonzero((labels == 0) & near)

    chosen_fg, short_fg = _choose(rng, foreground, n_fg, "foreground")
    chosen_bg, short_bg = _choose(rng, background, n_bg, "background")
    centers = volume.grid.centers()
    steps = np.diag(volume.spacing)
    parts = []
    for chosen, label in ((chosen_fg, 1), (chosen_bg, 0)):
        positions = centers[chosen]
        if jitter and len(chosen):
            positions = positions + _jitter(rng, len(chosen), steps)
        parts.append(LabeledPoints(positions, np.full(len(chosen), label, dtype=np.uint8)))
    points = LabeledPoints.concatenate(parts)
    return LabeledPoints(points.positions, points.labels, short_fg or short_bg)


def _sample_slices(
    stack: SliceStack, n_fg: int, n_bg: int, band: float, rng: np.random.Generator, jitter: bool
) -> LabeledPoints:
    centers, labels, near, owner = [], [], [], []
    for index, item in enumerate(stack):
        flat = item.flat_labels()
        if flat.any():
            distance = ndimage.distance_transform_edt(item.mask == 0, sampling=item.spacing)
            near.append(distance.ravel(order="F") <= band)
        else:
            near.append(np.zeros(len(flat), dtype=bool))
        centers.append(item.pixel_centers())
        labels.append(flat)
        owner.append(np.full(len(flat), index))
    all_centers = np.vstack(centers)
    all_labels = np.concatenate(labels)
    all_near = np.concatenate(near)
    all_owner = np.concatenate(owner)

    foreground = np.flatnonzero(all_labels == 1)
    background = np.flatnonzero((all_labels == 0) & all_near)
    chosen_fg, short_fg = _choose(rng, foreground, n_fg, "foreground")
    chosen_bg, short_bg = _choose(rng, background, n_bg, "background")
    parts = []
    for chosen, label in ((chosen_fg, 1), (chosen_bg, 0)):
        positions = all_centers[chosen]
        if jitter and len(chosen):
            offsets = np.zeros_like(positions)
            for index, item in enumerate(stack):
                rows = np.flatnonzero(all_owner[chosen] == index)
                if len(rows):
                    steps = np.stack([item.spacing[0] * item.u, item.spacing[1] * item.v])
                    offsets[rows] = _jitter(rng, len(rows), steps)
            positions = positions + offsets
        parts.append(LabeledPoints(positions, np.full(len(chosen), label, dtype=np.uint8)))
    points = LabeledPoints.concatenate(parts)
    return LabeledPoints(points.positions, points.labels, short_fg or short_bg)


def sample_points(
    source: Union[LabelVolume, SliceStack],
    n_fg: int,
    n_bg: int,
    bg_band: Optional[float] = None,
    seed: Optional[int] = 0,
    options: Optional[SampleOptions] = None,
) -> LabeledPoints:
    """
    Draw labeled query points from label supervision.

    Foreground points come from label-1 voxel (or pixel) centers, drawn without
    replacement. Background points come from label-0 centers within
    ``bg_band`` mm of a label-1 center. With jitter on, every point is moved
    uniformly inside its own voxel (in-plane for slices), so its label stays the
    label of the voxel that contains it.

    Args:
        source: Label volume or slice stack
        n_fg: Foreground budget
        n_bg: Background budget
        bg_band: Background band in mm; defaults to 5x the largest spacing
        seed: Random seed
        options: Sampling options (jitter)

    Returns:
        LabeledPoints: Foreground points first, then background points;
        ``insufficient`` is set when a budget could not be met
    """
    if options is None:
        options = {}
    jitter = options.get("jitter", True)
    rng = np.random.default_rng(seed)
    if isinstance(source, LabelVolume):
        band = BACKGROUND_BAND_FACTOR * max(source.spacing) if bg_band is None else bg_band
        return _sample_volume(source, n_fg, n_bg, band, rng, jitter)
    largest = max(max(item.spacing) for item in source)
    band = BACKGROUND_BAND_FACTOR * largest if bg_band is None else bg_band
    return _sample_slices(source, n_fg, n_bg, band, rng, jitter)


def slice_stack_to_points(stack: SliceStack) -> List[LabeledPoints]:
    """Every pixel center of every slice with its label, one entry per slice."""
    return [LabeledPoints(item.pixel_centers(), item.flat_labels()) for item in stack]
