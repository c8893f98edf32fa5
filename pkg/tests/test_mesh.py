"""
Tests for meshes, mesh quality, OBJ I/O, phantoms and surface sampling.
"""

import numpy as np
import pytest

from ghd_recon import (
    ConnectivityMismatchError,
    FaceIndexError,
    InvalidFaceError,
    MeshParseError,
    PhantomParameterError,
    TriMesh,
    base_plane,
    enclosed_volume,
    euler_characteristic,
    good_angle_ratio,
    is_closed,
    load_mesh,
    make_box,
    make_cavity_phantom,
    make_icosphere,
    make_shell_phantom,
    mesh_quality,
    sample_surface,
    save_mesh,
    shell_phantom_volume,
    subdivide,
    truncated_spheroid_volume,
)
from ghd_recon.mesh import face_geometry, vertex_dual_areas

RIGHT_TRIANGLE = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]


def _rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


class TestTriMesh:
    """Tests for TriMesh construction."""

    def test_out_of_range_face(self):
        """Test that a face referencing a missing vertex is rejected."""
        with pytest.raises(InvalidFaceError) as exc_info:
            TriMesh(RIGHT_TRIANGLE, [[0, 1, 3]])
        assert exc_info.value.face_index == 0

    def test_repeated_vertex(self):
        """Test that a face repeating a vertex is rejected."""
        with pytest.raises(InvalidFaceError):
            TriMesh(RIGHT_TRIANGLE, [[0, 1, 1]])

    def test_arrays_are_read_only(self):
        """Test that vertex and face arrays cannot be modified in place."""
        mesh = TriMesh(RIGHT_TRIANGLE, [[0, 1, 2]])
        with pytest.raises(ValueError):
            mesh.vertices[0, 0] = 5.0

    def test_with_vertices_keeps_connectivity(self, sphere):
        """Test that replacing vertices keeps faces and recomputes geometry."""
        moved = sphere.with_vertices(sphere.vertices * 2.0)
        assert np.array_equal(moved.faces, sphere.faces)
        assert moved.total_area == pytest.approx(4.0 * sphere.total_area)

    def test_closed_surface_flux(self, sphere, shell):
        """Test that area-weighted normals of a closed mesh sum to zero."""
        for mesh in (sphere, shell):
            flux = (mesh.face_normals * mesh.face_areas[:, None]).sum(axis=0)
            assert np.abs(flux).max() <= 1e-6 * mesh.total_area


class TestFaceGeometry:
    """Tests for face_geometry function."""

    def test_right_triangle(self):
        """Test normal, area and centroid of a planar right triangle."""
        geometry = face_geometry(TriMesh(RIGHT_TRIANGLE, [[0, 1, 2]]))
        assert np.allclose(geometry.normals[0], [0.0, 0.0, 1.0])
        assert geometry.areas[0] == pytest.approx(0.5)
        assert np.allclose(geometry.centroids[0], [1.0 / 3.0, 1.0 / 3.0, 0.0])
        assert not geometry.degenerate[0]

    def test_reversed_winding(self):
        """Test that reversing the winding flips the normal."""
        geometry = face_geometry(TriMesh(RIGHT_TRIANGLE, [[0, 2, 1]]))
        assert np.allclose(geometry.normals[0], [0.0, 0.0, -1.0])

    def test_collinear_triangle(self):
        """Test that a zero-area face is flagged with a zero normal."""
        mesh = TriMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])
        geometry = face_geometry(mesh)
        assert geometry.areas[0] == 0.0
        assert geometry.degenerate[0]
        assert np.array_equal(geometry.normals[0], [0.0, 0.0, 0.0])


class TestVertexDualAreas:
    """Tests for vertex_dual_areas function."""

    def test_single_triangle(self):
        """Test that each corner receives a third of the area."""
        areas = vertex_dual_areas(TriMesh(RIGHT_TRIANGLE, [[0, 1, 2]]))
        assert np.allclose(areas, 0.5 / 3.0)

    def test_partition_of_area(self, shell):
        """Test that dual areas sum to the total surface area."""
        assert vertex_dual_areas(shell).sum() == pytest.approx(shell.total_area, rel=1e-9)

    def test_icosahedron_symmetry(self):
        """Test that all icosahedron vertices get the same dual area."""
        areas = vertex_dual_areas(make_icosphere(0, 1.0))
        assert np.allclose(areas, areas[0], rtol=1e-9)


class TestGoodAngleRatio:
    """Tests for good_angle_ratio and mesh_quality."""

    @staticmethod
    def _soup(triangles):
        vertices = np.vstack(triangles)
        faces = np.arange(len(vertices)).reshape(-1, 3)
        return TriMesh(vertices, faces)

    def test_equilateral(self):
        """Test that an equilateral mesh scores 1."""
        assert good_angle_ratio(make_icosphere(0, 1.0)) == 1.0

    def test_counting(self):
        """Test that one 150 degree triangle out of ten gives 0.9."""
        equilateral = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, np.sqrt(3.0) / 2.0, 0.0]])
        triangles = [equilateral + [3.0 * k, 0.0, 0.0] for k in range(9)]
        obtuse = np.radians(150.0)
        triangles.append(np.array([[0.0, 5.0, 0.0], [1.0, 5.0, 0.0], [np.cos(obtuse), 5.0 + np.sin(obtuse), 0.0]]))
        assert good_angle_ratio(self._soup(triangles)) == pytest.approx(0.9)

    def test_brute_force(self, sphere):
        """Test against direct enumeration of the interior angles."""
        p = sphere.vertices[sphere.faces]
        good = np.ones(sphere.num_faces, dtype=bool)
        for corner in range(3):
            a = p[:, (corner + 1) % 3] - p[:, corner]
            b = p[:, (corner + 2) % 3] - p[:, corner]
            cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angle = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
            good &= (angle >= 30.0 - 1e-9) & (angle <= 120.0 + 1e-9)
        assert good_angle_ratio(sphere) == pytest.approx(good.mean())

    def test_invariance(self, shell):
        """Test invariance under rotation, translation and uniform scaling."""
        moved = shell.with_vertices(2.5 * shell.vertices @ _rotation_z(0.7).T + [3.0, -4.0, 5.0])
        assert good_angle_ratio(moved) == pytest.approx(good_angle_ratio(shell))

    def test_quality_report(self, sphere):
        """Test the quality summary fields."""
        report = mesh_quality(sphere)
        assert 0.0 <= report["good_angle_ratio"] <= 1.0
        assert report["min_angle"] <= 60.0 <= report["max_angle"]
        assert report["num_degenerate_faces"] == 0


class TestMeshIO:
    """Tests for load_mesh and save_mesh."""

    def test_round_trip(self, sphere, tmp_path):
        """Test that save then load reproduces the mesh."""
        path = tmp_path / "sphere.obj"
        save_mesh(sphere, path)
        loaded = load_mesh(path)
        assert np.array_equal(loaded.faces, sphere.faces)
        assert np.abs(loaded.vertices - sphere.vertices).max() <= 1e-6

    def test_quad_face(self, tmp_path):
        """Test that a quad face is rejected with its line number."""
        path = tmp_path / "quad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        with pytest.raises(MeshParseError) as exc_info:
            load_mesh(path)
        assert exc_info.value.line_number == 5
        assert ":5:" in str(exc_info.value)

    def test_zero_index(self, tmp_path):
        """Test that a 1-based file referencing vertex 0 is rejected."""
        path = tmp_path / "zero.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n")
        with pytest.raises(FaceIndexError) as exc_info:
            load_mesh(path)
        assert exc_info.value.index == 0

    def test_ignored_records(self, tmp_path):
        """Test that normals, groups and comments are skipped."""
        path = tmp_path / "extra.obj"
        path.write_text("# comment\no tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n")
        mesh = load_mesh(path)
        assert mesh.num_faces == 1

    def test_unknown_record(self, tmp_path):
        """Test that an unknown record is rejected."""
        path = tmp_path / "bad.obj"
        path.write_text("v 0 0 0\nfoo 1 2\n")
        with pytest.raises(MeshParseError):
            load_mesh(path)


class TestMakeIcosphere:
    """Tests for make_icosphere function."""

    def test_icosahedron(self):
        """Test the counts of the unrefined icosahedron."""
        mesh = make_icosphere(0, 1.0)
        assert (mesh.num_vertices, mesh.num_faces) == (12, 20)

    def test_subdivision_three(self, sphere):
        """Test counts, radius and orientation after three refinements."""
        assert (sphere.num_vertices, sphere.num_faces) == (642, 1280)
        assert np.allclose(np.linalg.norm(sphere.vertices, axis=1), 10.0, atol=1e-9)
        assert enclosed_volume(sphere) > 0
        assert is_closed(sphere)

    def test_center(self):
        """Test that the sphere is centered where asked."""
        mesh = make_icosphere(2, 3.0, center=(1.0, 2.0, 3.0))
        assert np.allclose(np.linalg.norm(mesh.vertices - [1.0, 2.0, 3.0], axis=1), 3.0)

    def test_invalid_radius(self):
        """Test that a non-positive radius is rejected."""
        with pytest.raises(ValueError):
            make_icosphere(1, 0.0)


class TestSubdivide:
    """Tests for subdivide function."""

    def test_counts_and_shape(self):
        """Test that refinement quadruples faces and keeps the box volume."""
        box = make_box((2.0, 3.0, 4.0))
        refined = subdivide(box, 2)
        assert refined.num_faces == 16 * box.num_faces
        assert is_closed(refined)
        assert enclosed_volume(refined) == pytest.approx(24.0, rel=1e-12)


class TestMakeShellPhantom:
    """Tests for make_shell_phantom function."""

    def test_topology(self, shell):
        """Test that the shell is closed and genus 0."""
        assert is_closed(shell)
        assert euler_characteristic(shell) == 2

    def test_volume(self, shell):
        """Test the enclosed volume against the analytic wall volume."""
        expected = shell_phantom_volume((30.0, 30.0, 50.0), 8.0, 0.7)
        assert enclosed_volume(shell) == pytest.approx(expected, rel=0.02)

    def test_quality(self, shell):
        """Test that the shell has a good angle ratio of at least 0.9."""
        assert good_angle_ratio(shell) >= 0.9

    def test_basal_plane(self, shell):
        """Test that no vertex lies above the basal plane."""
        assert shell.vertices[:, 2].max() == pytest.approx(base_plane((30, 30, 50), 0.7))

    def test_wall_too_thick(self):
        """Test that an inner surface that would self-intersect is rejected."""
        with pytest.raises(PhantomParameterError) as exc_info:
            make_shell_phantom((30.0, 30.0, 50.0), wall=100.0)
        assert "self-intersect" in str(exc_info.value)

    def test_invalid_cut(self):
        """Test that a base cut outside (0, 1) is rejected."""
        with pytest.raises(PhantomParameterError):
            make_shell_phantom(base_cut=1.5)


class TestMakeCavityPhantom:
    """Tests for make_cavity_phantom function."""

    def test_closed_and_volume(self):
        """Test topology and enclosed volume of the cavity."""
        radii = (22.0, 22.0, 42.0)
        cavity = make_cavity_phantom(radii, 0.7)
        assert is_closed(cavity)
        assert euler_characteristic(cavity) == 2
        expected = truncated_spheroid_volume(radii, base_plane(radii, 0.7))
        assert enclosed_volume(cavity) == pytest.approx(expected, rel=0.02)


class TestSampleSurface:
    """Tests for sample_surface function."""

    def test_points_on_surface(self, sphere):
        """Test that samples lie on the faces they reference."""
        samples = sample_surface(sphere, 500, seed=1)
        assert samples.points.shape == (500, 3)
        assert np.allclose(samples.barycentric.sum(axis=1), 1.0)
        assert np.all(samples.barycentric >= 0)
        assert np.allclose(samples.evaluate(sphere), samples.points)

    def test_deterministic(self, sphere):
        """Test that the same seed gives the same samples."""
        a = sample_surface(sphere, 200, seed=4)
        b = sample_surface(sphere, 200, seed=4)
        assert np.array_equal(a.points, b.points)

    def test_connectivity_mismatch(self, sphere, small_sphere):
        """Test that samples cannot be evaluated on a smaller mesh."""
        samples = sample_surface(sphere, 2000, seed=0)
        with pytest.raises(ConnectivityMismatchError):
            samples.evaluate(small_sphere)
