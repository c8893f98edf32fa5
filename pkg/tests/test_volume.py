"""
Tests for label volumes, the parity oracle, slicing, point sampling and volume I/O.
"""

import json

import numpy as np
import pytest

from ghd_recon import (
    GridSpec,
    LabelSlice,
    LabelVolume,
    SliceSelectionError,
    SliceStack,
    SliceValidationError,
    TriMesh,
    VolumeFormatError,
    enclosed_volume,
    extract_slices,
    grid_around,
    load_slices,
    load_volume,
    make_box,
    make_icosphere,
    point_parity,
    sample_points,
    save_slices,
    save_volume,
    spaced_slice_indices,
    voxelize_oracle,
)

SPHERE_VOLUME = 4.0 / 3.0 * np.pi * 10.0 ** 3


class TestGridSpec:
    """Tests for GridSpec."""

    def test_centers_order(self):
        """Test that voxel centers run x fastest from the origin."""
        grid = GridSpec((2, 3, 4), (0.5, 1.0, 2.0), (1.0, 2.0, 3.0))
        centers = grid.centers()
        assert centers.shape == (24, 3)
        assert np.allclose(centers[0], [1.0, 2.0, 3.0])
        assert np.allclose(centers[1], [1.5, 2.0, 3.0])
        assert np.allclose(centers[2], [1.0, 3.0, 3.0])

    def test_world_to_index(self):
        """Test that a center maps back to its own index."""
        grid = GridSpec((4, 4, 4), (0.5, 0.5, 0.5), (-1.0, -1.0, -1.0))
        index = np.array([[1, 2, 3]])
        assert np.array_equal(grid.world_to_index(grid.index_to_world(index)), index)

    def test_invalid_spacing(self):
        """Test that a non-positive spacing is rejected."""
        with pytest.raises(VolumeFormatError):
            GridSpec((2, 2, 2), (1.0, 0.0, 1.0))

    def test_volume_rejects_bad_labels(self):
        """Test that labels other than 0 and 1 are rejected."""
        grid = GridSpec((2, 2, 2), (1.0, 1.0, 1.0))
        with pytest.raises(VolumeFormatError):
            LabelVolume(grid, np.full((2, 2, 2), 2))


class TestVoxelizeOracle:
    """Tests for voxelize_oracle function."""

    def test_sphere_volume(self, sphere, sphere_volume):
        """Test that the labeled volume matches the analytic sphere within 2%."""
        assert sphere_volume.labeled_volume() == pytest.approx(SPHERE_VOLUME, rel=0.02)
        assert sphere_volume.labeled_volume() == pytest.approx(enclosed_volume(sphere), rel=0.02)

    def test_box_exact(self):
        """Test a box whose faces sit between voxel centers."""
        box = make_box((4.0, 4.0, 4.0))
        grid = GridSpec((10, 10, 10), (1.0, 1.0, 1.0), (-4.5, -4.5, -4.5))
        volume = voxelize_oracle(box, grid)
        assert volume.count() == 4 * 4 * 4
        assert volume.data[4:6, 4:6, 4:6].all()

    def test_mesh_outside_grid(self, sphere_volume):
        """Test that a mesh entirely outside the grid labels nothing."""
        far = make_icosphere(1, 1.0, center=(100.0, 100.0, 100.0))
        assert voxelize_oracle(far, sphere_volume).count() == 0

    def test_open_mesh_warns(self, caplog):
        """Test that voxelizing an open mesh logs a warning."""
        box = make_box()
        open_mesh = TriMesh(box.vertices, box.faces[:-1])
        grid = GridSpec((3, 3, 3), (1.0, 1.0, 1.0), (-1.0, -1.0, -1.0))
        voxelize_oracle(open_mesh, grid)
        assert "not closed" in caplog.text

    def test_agrees_with_point_parity(self, sphere, sphere_volume):
        """Test that grid labels agree with scattered-point parity away from the surface."""
        centers = sphere_volume.grid.centers()
        labels = sphere_volume.flat_labels()
        rng = np.random.default_rng(0)
        pick = rng.choice(len(centers), 3000, replace=False)
        radius = np.linalg.norm(centers[pick], axis=1)
        away = np.abs(radius - 10.0) > 0.5 * np.sqrt(3.0) + 0.2
        inside = point_parity(sphere, centers[pick][away])
        agreement = np.mean(inside == (labels[pick][away] == 1))
        assert agreement >= 0.999

    def test_nested_meshes(self, sphere, sphere_volume):
        """Test that the labels of an inner sphere are a subset of the outer sphere's."""
        inner = voxelize_oracle(make_icosphere(3, 5.0), sphere_volume)
        assert inner.count() > 0
        assert np.all(sphere_volume.data[inner.data == 1] == 1)
        assert inner.count() < sphere_volume.count()

    def test_face_order_invariance(self, sphere, sphere_volume):
        """Test that shuffling the face list leaves the labels unchanged."""
        order = np.random.default_rng(4).permutation(sphere.num_faces)
        shuffled = TriMesh(sphere.vertices, sphere.faces[order])
        assert np.array_equal(voxelize_oracle(shuffled, sphere_volume).data, sphere_volume.data)

    def test_vertex_permutation_invariance(self, shell):
        """Test that renumbering vertices with consistent faces leaves the labels unchanged."""
        grid = grid_around(shell, 2.0)
        expected = voxelize_oracle(shell, grid)
        permutation = np.random.default_rng(5).permutation(shell.num_vertices)
        inverse = np.argsort(permutation)
        renumbered = TriMesh(shell.vertices[permutation], inverse[shell.faces])
        assert np.array_equal(voxelize_oracle(renumbered, grid).data, expected.data)


class TestPointParity:
    """Tests for point_parity function."""

    def test_sphere(self, sphere):
        """Test inside and outside points of a sphere."""
        inside = point_parity(sphere, [[0.0, 0.0, 0.0], [5.0, 1.0, -2.0], [20.0, 0.0, 0.0], [0.0, 0.0, -11.0]])
        assert inside.tolist() == [True, True, False, False]

    def test_shell_cavity_is_outside(self, shell):
        """Test that the cavity of the shell is outside and the wall is inside."""
        inside = point_parity(shell, [[0.0, 0.0, -10.0], [0.0, 0.0, -46.0]])
        assert inside.tolist() == [False, True]


class TestExtractSlices:
    """Tests for extract_slices function."""

    def test_all_z_slices(self, sphere_volume):
        """Test that all z slices stacked reproduce the volume."""
        nz = sphere_volume.dims[2]
        stack = extract_slices(sphere_volume, "z", range(nz))
        stacked = np.stack([item.mask for item in stack], axis=2)
        assert np.array_equal(stacked, sphere_volume.data)

    def test_positions(self, sphere_volume):
        """Test that first, middle and last slices sit at their voxel planes."""
        nz = sphere_volume.dims[2]
        indices = [0, nz // 2, nz - 1]
        stack = extract_slices(sphere_volume, "z", indices)
        assert len(stack) == 3
        z = sphere_volume.grid.axis_coordinates(2)
        for item, k in zip(stack, indices):
            assert item.origin[2] == pytest.approx(z[k])
            assert np.allclose(item.normal, [0.0, 0.0, 1.0])

    @pytest.mark.parametrize("axis", ["x", "y", "z"])
    def test_pixel_maps_to_voxel(self, sphere_volume, axis):
        """Test that every pixel center lands on a voxel with the same label."""
        d = "xyz".index(axis)
        k = sphere_volume.dims[d] // 2
        item = extract_slices(sphere_volume, axis, [k])[0]
        index = sphere_volume.grid.world_to_index(item.pixel_centers())
        assert np.all(index[:, d] == k)
        labels = sphere_volume.data[index[:, 0], index[:, 1], index[:, 2]]
        assert np.array_equal(labels, item.flat_labels())
        assert item.flat_labels().any()

    def test_empty_indices(self, sphere_volume):
        """Test that an empty index list is rejected."""
        with pytest.raises(SliceSelectionError):
            extract_slices(sphere_volume, "z", [])

    def test_out_of_range(self, sphere_volume):
        """Test that an index beyond the grid is rejected."""
        with pytest.raises(SliceSelectionError):
            extract_slices(sphere_volume, "y", [sphere_volume.dims[1]])


class TestSpacedSliceIndices:
    """Tests for spaced_slice_indices function."""

    def test_within_labeled_extent(self, sphere_volume):
        """Test that the chosen planes all hold labels and are evenly spread."""
        indices = spaced_slice_indices(sphere_volume, "z", 5)
        assert len(indices) == 5
        assert indices == sorted(indices)
        for k in indices:
            assert sphere_volume.data[:, :, k].any()
        gaps = np.diff(indices)
        assert gaps.max() - gaps.min() <= 1

    def test_empty_volume(self):
        """Test that a volume with no labels is rejected."""
        empty = LabelVolume.empty(GridSpec((4, 4, 4), (1.0, 1.0, 1.0)))
        with pytest.raises(SliceSelectionError):
            spaced_slice_indices(empty, "z", 3)


class TestSamplePoints:
    """Tests for sample_points function."""

    def test_foreground_only(self, sphere_volume):
        """Test that no background budget gives only label-1 points."""
        points = sample_points(sphere_volume, 500, 0, seed=1)
        assert len(points) == 500
        assert np.all(points.labels == 1)

    def test_deterministic(self, sphere_volume):
        """Test that the same seed gives the same points."""
        a = sample_points(sphere_volume, 300, 300, seed=7)
        b = sample_points(sphere_volume, 300, 300, seed=7)
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.labels, b.labels)

    def test_containment(self, sphere_volume):
        """Test that foreground points lie inside the sphere inflated by a voxel diagonal."""
        points = sample_points(sphere_volume, 2000, 2000, seed=3)
        diagonal = 0.5 * np.sqrt(3.0)
        assert np.linalg.norm(points.foreground, axis=1).max() <= 10.0 + diagonal
        background = np.linalg.norm(points.background, axis=1)
        assert background.min() >= 10.0 * 0.98 - diagonal
        assert background.max() <= 10.0 + 5.0 * 0.5 + diagonal

    def test_insufficient_candidates(self, sphere_volume):
        """Test that an oversized budget returns every candidate and sets the flag."""
        points = sample_points(sphere_volume, 10 ** 7, 0, seed=0)
        assert points.insufficient
        assert len(points) == sphere_volume.count()

    def test_slices_stay_in_plane(self, sphere_volume):
        """Test that slice samples stay on their slice planes."""
        indices = spaced_slice_indices(sphere_volume, "z", 5)
        stack = extract_slices(sphere_volume, "z", indices)
        points = sample_points(stack, 400, 400, seed=2)
        planes = sphere_volume.grid.axis_coordinates(2)[indices]
        distance = np.abs(points.positions[:, 2, None] - planes[None, :]).min(axis=1)
        assert distance.max() <= 1e-9
        assert np.linalg.norm(points.foreground, axis=1).max() <= 10.0 + 0.5 * np.sqrt(3.0)


class TestVolumeIO:
    """Tests for volume and slice stack I/O."""

    def test_volume_round_trip(self, sphere_volume, tmp_path):
        """Test that save then load gives bit-identical data."""
        header = tmp_path / "sphere.lvh.json"
        payload = save_volume(sphere_volume, header)
        assert payload.name == "sphere.lvr"
        loaded = load_volume(header)
        assert np.array_equal(loaded.data, sphere_volume.data)
        assert loaded.grid == sphere_volume.grid

    def test_truncated_payload(self, sphere_volume, tmp_path):
        """Test that a short payload is rejected."""
        header = tmp_path / "sphere.lvh.json"
        payload = save_volume(sphere_volume, header)
        payload.write_bytes(payload.read_bytes()[:-10])
        with pytest.raises(VolumeFormatError) as exc_info:
            load_volume(header)
        assert "bytes" in str(exc_info.value)

    def test_wrong_format(self, tmp_path):
        """Test that a document of another format is rejected."""
        header = tmp_path / "other.json"
        header.write_text(json.dumps({"format": "something-else"}))
        with pytest.raises(VolumeFormatError):
            load_volume(header)

    def test_slices_round_trip(self, sphere_volume, tmp_path):
        """Test that a slice stack survives save then load."""
        stack = extract_slices(sphere_volume, "x", [10, 20, 30])
        manifest = tmp_path / "stack.json"
        save_slices(stack, manifest)
        loaded = load_slices(manifest)
        assert len(loaded) == 3
        for a, b in zip(stack, loaded):
            assert np.array_equal(a.mask, b.mask)
            assert np.allclose(a.origin, b.origin, atol=1e-9)
            assert np.array_equal(a.u, b.u)

    def test_non_unit_axis(self, sphere_volume, tmp_path):
        """Test that a manifest with a non-unit axis is rejected."""
        stack = extract_slices(sphere_volume, "z", [20])
        manifest = tmp_path / "stack.json"
        save_slices(stack, manifest)
        document = json.loads(manifest.read_text())
        document["slices"][0]["u"] = [2.0, 0.0, 0.0]
        manifest.write_text(json.dumps(document))
        with pytest.raises(SliceValidationError):
            load_slices(manifest)

    def test_stack_rejects_non_orthogonal(self):
        """Test that a stack cannot hold a slice with skewed axes."""
        item = LabelSlice([0, 0, 0], [1, 0, 0], [np.sqrt(0.5), np.sqrt(0.5), 0], (1.0, 1.0), np.zeros((2, 2)))
        with pytest.raises(SliceValidationError):
            SliceStack((item,))
