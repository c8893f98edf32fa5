"""
Tests for the optimizer, configuration, rigid alignment, evaluation and the fit pipeline.
"""

import csv
import json

import numpy as np
import pytest

from ghd_recon import (
    AdamState,
    BasisFormatError,
    ConfigError,
    DimensionMismatchError,
    EmptySupervisionError,
    FitConfig,
    GhdCoefficients,
    GridSpec,
    InvalidVolumeError,
    LabeledPoints,
    LabelVolume,
    MissingConfigFieldError,
    NonFiniteGradientError,
    OpenMeshError,
    RigidPose,
    TriMesh,
    adam_update,
    apply_ghd,
    base_plane,
    beta_at,
    build_laplacian,
    ejection_fraction,
    enclosed_volume,
    evaluate,
    extract_slices,
    fit_ghd,
    ghd_basis,
    good_angle_ratio,
    grid_around,
    load_coefficients,
    make_box,
    make_cavity_phantom,
    make_icosphere,
    rigid_align,
    sample_surface,
    save_coefficients,
    save_report,
    save_trace_csv,
    spaced_slice_indices,
    truncated_spheroid_volume,
    voxelize_oracle,
)
from ghd_recon.fit import aligned_canonical, learning_rate_at, report_to_json
from ghd_recon.rigid import (
    axis_angle_quaternion,
    one_sided_chamfer,
    quaternion_matrix_derivatives,
    quaternion_multiply,
    quaternion_to_matrix,
    rotation_angle,
)

from conftest import central_difference

# Small budgets keep a full pipeline run to a couple of seconds.
QUICK = dict(
    num_modes=9,
    iterations=5,
    n_fg=300,
    n_bg=300,
    rigid_iterations=20,
    rigid_restarts=2,
    rigid_samples=200,
    eval_samples=500,
    eval_spacing=1.0,
)


def _ellipsoid() -> TriMesh:
    sphere = make_icosphere(3, 10.0)
    return sphere.with_vertices(sphere.vertices * [1.0, 1.5, 2.5])


def _egg() -> TriMesh:
    """Ellipsoid stretched on its positive x, y and z sides, with no rotational symmetry."""
    vertices = _ellipsoid().vertices
    vertices = np.where(vertices > 0.0, vertices * [1.6, 1.3, 1.2], vertices)
    return TriMesh(vertices, make_icosphere(3, 10.0).faces)


def _perturbed_shell(shell: TriMesh, seed: int = 0) -> TriMesh:
    """Shell displaced along harmonic modes 2 to 16, at most 10% of its diameter."""
    basis = ghd_basis(build_laplacian(shell, "mixed", 0.1, 0.05, True), 16)
    phi = np.zeros((16, 3))
    phi[1:] = np.random.default_rng(seed).standard_normal((15, 3))
    displacement = basis.modes @ phi
    displacement *= 0.1 * shell.diameter() / np.linalg.norm(displacement, axis=1).max()
    return shell.with_vertices(shell.vertices + displacement)


class TestAdam:
    """Tests for adam_update function."""

    def test_first_step_is_sign(self):
        """Test that the bias-corrected first step has size lr along the gradient sign."""
        state = AdamState.zeros_like(np.zeros(3))
        state, step = adam_update(state, np.array([2.0, -0.5, 1e-3]), lr=0.1)
        assert state.t == 1
        assert np.allclose(step, [-0.1, 0.1, -0.1], rtol=1e-4)

    def test_constant_gradient(self):
        """Test that a constant gradient keeps giving steps of size lr."""
        state = AdamState.zeros_like(np.zeros((2, 3)))
        for _ in range(10):
            state, step = adam_update(state, np.ones((2, 3)), lr=0.05)
        assert state.t == 10
        assert np.allclose(step, -0.05, rtol=1e-4)

    def test_state_is_not_mutated(self):
        """Test that the previous state is left untouched."""
        state = AdamState.zeros_like(np.zeros(2))
        adam_update(state, np.ones(2), lr=0.1)
        assert state.t == 0
        assert not state.m.any()

    def test_non_finite_gradient(self):
        """Test that NaN in the gradient is rejected with the step number."""
        state = AdamState.zeros_like(np.zeros(2))
        with pytest.raises(NonFiniteGradientError):
            adam_update(state, np.array([1.0, np.nan]), lr=0.1)

    def test_shape_mismatch(self):
        """Test that a gradient of another shape is rejected."""
        state = AdamState.zeros_like(np.zeros(2))
        with pytest.raises(DimensionMismatchError):
            adam_update(state, np.ones(3), lr=0.1)


class TestFitConfig:
    """Tests for FitConfig."""

    def test_defaults(self):
        """Test a few documented defaults."""
        config = FitConfig()
        assert config.num_modes == 36
        assert config.laplacian_kind == "mixed"
        assert config.quadrature == "facet"
        assert config.beta_end == 1000.0
        assert config.seed == 0

    def test_save_and_load(self, tmp_path):
        """Test that a saved config loads back equal under strict loading."""
        config = FitConfig(num_modes=16, seed=4, target_volume=1234.5, volume_weight=0.1)
        path = tmp_path / "config.json"
        config.save(path)
        assert FitConfig.load(path) == config

    def test_missing_field(self):
        """Test that strict loading names the first absent field."""
        data = FitConfig().to_dict()
        del data["learning_rate"]
        with pytest.raises(MissingConfigFieldError) as exc_info:
            FitConfig.from_dict(data, strict=True)
        assert exc_info.value.field == "learning_rate"
        assert FitConfig.from_dict(data).learning_rate == FitConfig().learning_rate

    def test_unknown_field(self):
        """Test that an unknown field is rejected."""
        with pytest.raises(ConfigError) as exc_info:
            FitConfig.from_dict({"num_mode": 9})
        assert exc_info.value.field == "num_mode"

    @pytest.mark.parametrize(
        "field,value",
        [
            ("laplacian_kind", "harmonic"),
            ("num_modes", 0),
            ("learning_rate", 0.0),
            ("final_lr_fraction", 1.5),
            ("adam_beta2", 1.0),
            ("thickness_weight", -1.0),
        ],
    )
    def test_invalid_value(self, field, value):
        """Test that invalid values are rejected with the field name."""
        with pytest.raises(ConfigError) as exc_info:
            FitConfig(**{field: value})
        assert exc_info.value.field == field

    def test_volume_weight_needs_target(self):
        """Test that a volume term without a target volume is rejected."""
        with pytest.raises(ConfigError):
            FitConfig(volume_weight=1.0)

    def test_replace_ignores_none(self):
        """Test that None overrides leave fields unchanged."""
        config = FitConfig().replace(seed=7, iterations=None)
        assert config.seed == 7
        assert config.iterations == FitConfig().iterations
        with pytest.raises(ConfigError):
            FitConfig().replace(nonsense=1)

    def test_invalid_json(self, tmp_path):
        """Test that a document that is not JSON is reported as a config error."""
        path = tmp_path / "config.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            FitConfig.load(path)


class TestSchedules:
    """Tests for beta_at and learning_rate_at."""

    def test_beta_ramp(self):
        """Test the geometric sharpness ramp and its plateau."""
        config = FitConfig()
        assert beta_at(config, 0) == pytest.approx(10.0)
        assert beta_at(config, 100) == pytest.approx(100.0)
        assert beta_at(config, 200) == pytest.approx(1000.0)
        assert beta_at(config, 350) == pytest.approx(1000.0)

    def test_learning_rate_decay(self):
        """Test that the learning rate decays to its final fraction."""
        config = FitConfig(iterations=11, learning_rate=0.1, final_lr_fraction=0.01)
        assert learning_rate_at(config, 0) == pytest.approx(0.1)
        assert learning_rate_at(config, 5) == pytest.approx(0.01)
        assert learning_rate_at(config, 10) == pytest.approx(0.001)


class TestQuaternions:
    """Tests for the quaternion helpers."""

    def test_quarter_turn(self):
        """Test the matrix of a 90 degree rotation about z."""
        q = axis_angle_quaternion([0.0, 0.0, 1.0], np.pi / 2.0)
        expected = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]
        assert np.allclose(quaternion_to_matrix(q), expected, atol=1e-12)
        assert rotation_angle(q) == pytest.approx(np.pi / 2.0)

    def test_matrix_is_rotation(self):
        """Test that a unit quaternion gives an orthogonal matrix of determinant 1."""
        q = np.random.default_rng(0).standard_normal(4)
        q /= np.linalg.norm(q)
        r = quaternion_to_matrix(q)
        assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(r) == pytest.approx(1.0)

    def test_product_composes(self):
        """Test that the Hamilton product composes rotations."""
        p = axis_angle_quaternion([1.0, 2.0, 0.5], 0.7)
        q = axis_angle_quaternion([-0.3, 0.0, 1.0], 1.9)
        composed = quaternion_to_matrix(quaternion_multiply(p, q))
        assert np.allclose(composed, quaternion_to_matrix(p) @ quaternion_to_matrix(q), atol=1e-12)

    def test_matrix_derivatives(self):
        """Test the partial derivatives of the matrix against central differences."""
        q = np.array([0.8, 0.1, -0.4, 0.3])
        derivatives = quaternion_matrix_derivatives(q)
        weights = np.random.default_rng(1).standard_normal((3, 3))
        numeric = central_difference(lambda x: float(np.sum(weights * quaternion_to_matrix(x))), q, step=1e-6)
        analytic = np.einsum("kij,ij->k", derivatives, weights)
        assert np.allclose(analytic, numeric, atol=1e-8)


class TestRigidPose:
    """Tests for RigidPose."""

    def test_normalizes_quaternion(self):
        """Test that the quaternion is normalized on construction."""
        pose = RigidPose(quaternion=(2.0, 0.0, 0.0, 0.0))
        assert pose.quaternion == (1.0, 0.0, 0.0, 0.0)
        assert pose.angle == pytest.approx(0.0)

    def test_rotates_about_center(self):
        """Test that the pivot is a fixed point of a pure rotation."""
        q = axis_angle_quaternion([0.0, 0.0, 1.0], np.pi / 2.0)
        pose = RigidPose(tuple(q), center=(1.0, 0.0, 0.0))
        moved = pose.transform_points([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        assert np.allclose(moved, [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]], atol=1e-12)

    def test_dict_round_trip(self):
        """Test that to_dict then from_dict gives the same pose."""
        q = axis_angle_quaternion([1.0, 1.0, 0.0], 0.4)
        pose = RigidPose(tuple(q), (1.0, -2.0, 3.0), 1.1, (0.5, 0.5, 0.5))
        assert RigidPose.from_dict(json.loads(json.dumps(pose.to_dict()))) == pose

    @pytest.mark.parametrize("kwargs", [{"quaternion": (0.0, 0.0, 0.0, 0.0)}, {"scale": 0.0}])
    def test_invalid(self, kwargs):
        """Test that a zero quaternion or scale is rejected."""
        with pytest.raises(ValueError):
            RigidPose(**kwargs)


class TestRigidAlign:
    """Tests for rigid_align function."""

    def setup_method(self):
        self.canonical = _ellipsoid()
        self.config = FitConfig(rigid_restarts=1, rigid_samples=1000)

    def _target(self, pose: RigidPose) -> LabeledPoints:
        points = sample_surface(pose.apply(self.canonical), 20000, seed=11).points
        return LabeledPoints(points, np.ones(len(points)))

    def test_identity_is_fixed_point(self):
        """Test that an already aligned target gives the identity pose."""
        pose = rigid_align(self.canonical, self._target(RigidPose()), self.config)
        assert np.linalg.norm(pose.translation) <= 0.2
        assert np.degrees(pose.angle) <= 1.0

    def test_recovers_translation(self):
        """Test that a 5 mm shift is recovered."""
        pose = rigid_align(self.canonical, self._target(RigidPose(translation=(5.0, 0.0, 0.0))), self.config)
        assert np.allclose(pose.translation, [5.0, 0.0, 0.0], atol=0.5)
        assert np.degrees(pose.angle) <= 2.0

    def test_recovers_small_rotation(self):
        """Test that a 10 degree tilt about the short axis is recovered."""
        q = axis_angle_quaternion([1.0, 0.0, 0.0], np.radians(10.0))
        truth = RigidPose(tuple(q), translation=(0.0, 2.0, -1.0))
        pose = rigid_align(self.canonical, self._target(truth), self.config)
        relative = quaternion_multiply(np.asarray(truth.quaternion) * [1, -1, -1, -1], np.asarray(pose.quaternion))
        assert np.degrees(rotation_angle(relative)) <= 2.0
        moved = pose.transform_points(self.canonical.vertices)
        assert np.abs(moved - truth.transform_points(self.canonical.vertices)).max() <= 1.5

    def test_recovers_quarter_turn(self):
        """Test that eight restarts recover a 90 degree turn about the long axis."""
        egg = _egg()
        q = axis_angle_quaternion([0.0, 0.0, 1.0], np.radians(90.0))
        truth = RigidPose(tuple(q), translation=(4.0, -3.0, 2.0))
        points = sample_surface(truth.apply(egg), 20000, seed=11).points
        target = LabeledPoints(points, np.ones(len(points)))
        pose = rigid_align(egg, target, self.config.replace(rigid_restarts=8))
        inverse = np.asarray(truth.quaternion) * [1, -1, -1, -1]
        relative = quaternion_multiply(inverse, np.asarray(pose.quaternion))
        assert np.degrees(rotation_angle(relative)) <= 2.0
        moved = pose.transform_points(egg.vertices)
        assert np.abs(moved - truth.transform_points(egg.vertices)).max() <= 1.5

    def test_restarts_escape_wrong_basin(self):
        """Test that a half turn is missed from a single start and found with restarts."""
        egg = _egg()
        q = axis_angle_quaternion([0.0, 0.0, 1.0], np.pi)
        truth = RigidPose(tuple(q))
        points = sample_surface(truth.apply(egg), 20000, seed=12).points
        target = LabeledPoints(points, np.ones(len(points)))

        def error(pose: RigidPose) -> float:
            inverse = np.asarray(truth.quaternion) * [1, -1, -1, -1]
            return np.degrees(rotation_angle(quaternion_multiply(inverse, np.asarray(pose.quaternion))))

        assert error(rigid_align(egg, target, self.config)) >= 45.0
        assert error(rigid_align(egg, target, self.config.replace(rigid_restarts=4))) <= 2.0

    def test_restarts_pick_lowest_loss(self):
        """Test that more restarts never end at a higher loss."""
        target = self._target(RigidPose(translation=(3.0, 1.0, 0.0)))
        samples = sample_surface(self.canonical, 1000, seed=0).points
        one = rigid_align(self.canonical, target, self.config)
        many = rigid_align(self.canonical, target, self.config.replace(rigid_restarts=4))
        loss_one = one_sided_chamfer(one.transform_points(samples), target.foreground)
        loss_many = one_sided_chamfer(many.transform_points(samples), target.foreground)
        assert loss_many <= loss_one + 1e-9

    def test_deterministic(self):
        """Test that the same seed gives the same pose."""
        target = self._target(RigidPose(translation=(1.0, 1.0, 1.0)))
        config = self.config.replace(rigid_iterations=30)
        assert rigid_align(self.canonical, target, config) == rigid_align(self.canonical, target, config)

    def test_empty_target(self):
        """Test that a target without foreground points is rejected."""
        target = LabeledPoints(np.zeros((4, 3)), np.zeros(4))
        with pytest.raises(EmptySupervisionError):
            rigid_align(self.canonical, target, self.config)


class TestEvaluate:
    """Tests for evaluate function."""

    def test_self_consistency(self, sphere, sphere_volume):
        """Test that a mesh scores almost perfectly against its own voxelization."""
        metrics = evaluate(sphere, sphere_volume)
        assert metrics["dice_3d"] >= 0.99
        assert metrics["good_angle_ratio"] == good_angle_ratio(sphere)
        assert "chamfer" not in metrics

    @pytest.mark.parametrize("method", ["parity", "occupancy"])
    def test_mismatched_meshes(self, coarse_shell, method):
        """Test that a shell against a sphere scores below either self Dice."""
        config = FitConfig(dice_method=method, eval_spacing=1.0, eval_samples=2000)
        ball = make_icosphere(3, 25.0)
        mixed = evaluate(coarse_shell, ball, config)
        assert mixed["dice_3d"] < evaluate(coarse_shell, coarse_shell, config)["dice_3d"]
        assert mixed["dice_3d"] < evaluate(ball, ball, config)["dice_3d"]
        assert mixed["chamfer"] > 0.0
        assert mixed["hausdorff"] > 0.0

    def test_slices(self, sphere, sphere_volume):
        """Test that a slice reference gives one Dice per slice."""
        stack = extract_slices(sphere_volume, "z", spaced_slice_indices(sphere_volume, "z", 4))
        metrics = evaluate(sphere, stack)
        assert len(metrics["dice_slices"]) == 4
        assert metrics["dice_slices_mean"] == pytest.approx(np.mean(metrics["dice_slices"]))
        assert min(metrics["dice_slices"]) >= 0.9

    def test_rigid_invariance(self, small_sphere):
        """Test that surface distances survive a common rigid transform within 1%."""
        config = FitConfig(eval_spacing=1.0, eval_samples=20000)
        target = small_sphere.with_vertices(small_sphere.vertices * [1.2, 1.0, 0.9])
        pose = RigidPose(tuple(axis_angle_quaternion([1.0, -1.0, 2.0], 0.9)), (4.0, -7.0, 2.0))
        before = evaluate(small_sphere, target, config)
        after = evaluate(pose.apply(small_sphere), pose.apply(target), config)
        assert after["chamfer"] == pytest.approx(before["chamfer"], rel=0.01)
        assert after["hausdorff"] == pytest.approx(before["hausdorff"], rel=0.01)


class TestEjectionFraction:
    """Tests for ejection_fraction function."""

    def test_value(self):
        """Test a textbook ejection fraction."""
        assert ejection_fraction(100.0, 40.0) == pytest.approx(0.6)

    def test_invalid_end_diastolic(self):
        """Test that a non-positive end-diastolic volume is rejected."""
        with pytest.raises(InvalidVolumeError):
            ejection_fraction(0.0, 10.0)

    def test_out_of_range_warns(self, caplog):
        """Test that an end-systolic volume above end-diastolic is computed with a warning."""
        assert ejection_fraction(50.0, 60.0) == pytest.approx(-0.2)
        assert "outside" in caplog.text


class TestFitGhd:
    """Tests for fit_ghd function."""

    def setup_method(self):
        self.canonical = make_icosphere(1, 9.0)
        self.config = FitConfig(**QUICK)

    def test_zero_iterations(self, sphere_volume):
        """Test that no iterations returns the aligned canonical mesh unchanged."""
        mesh, coefficients, report = fit_ghd(self.canonical, sphere_volume, self.config.replace(iterations=0))
        assert report["iterations"] == 0
        assert report["loss_trace"] == []
        assert report["stop_reason"] == "budget"
        assert report["converged"]
        assert not coefficients.values.any()
        assert np.allclose(mesh.vertices, aligned_canonical(self.canonical, report).vertices)

    def test_report(self, sphere_volume):
        """Test that a short run fills every report field."""
        mesh, coefficients, report = fit_ghd(self.canonical, sphere_volume, self.config)
        assert np.array_equal(mesh.faces, self.canonical.faces)
        assert report["iterations"] == len(report["loss_trace"]) == 5
        assert report["parameterization"] == "ghd"
        assert report["num_modes"] == coefficients.num_modes == 9
        assert 0.0 <= report["dice_3d"] <= 1.0
        assert report["chamfer"] is None
        assert report["gar_before"] == pytest.approx(good_angle_ratio(aligned_canonical(self.canonical, report)))
        assert report["enclosed_volume"] > 0.0
        assert report["seed"] == 0
        assert set(report["timing"]) == {"wall_clock_seconds", "finished_at"}

    def test_loss_decreases(self, sphere_volume):
        """Test that the data loss goes down over a short run."""
        _, _, report = fit_ghd(self.canonical, sphere_volume, self.config.replace(iterations=30))
        assert report["loss_trace"][-1] < report["loss_trace"][0]

    def test_loss_non_increasing_over_windows(self, sphere_volume):
        """Test that without thickness the loss never rises across a 25 iteration window after warm-up."""
        config = self.config.replace(
            iterations=90, learning_rate=0.005, thickness_weight=0.0,
            beta_start=100.0, beta_end=100.0, beta_ramp_iterations=1, tolerance=1e-12,
        )
        _, _, report = fit_ghd(self.canonical, sphere_volume, config)
        trace = np.asarray(report["loss_trace"])
        assert len(trace) == 90
        warm_up, window = 20, 25
        later, earlier = trace[warm_up + window:], trace[warm_up:-window]
        assert np.all(later <= earlier + 1e-3 * trace[0])

    def test_deterministic(self, sphere_volume):
        """Test that two runs with the same seed give identical reports apart from timing."""
        a = fit_ghd(self.canonical, sphere_volume, self.config)
        b = fit_ghd(self.canonical, sphere_volume, self.config)
        assert np.array_equal(a.mesh.vertices, b.mesh.vertices)
        assert report_to_json(a.report, include_timing=False) == report_to_json(b.report, include_timing=False)

    def test_coefficients_reproduce_mesh(self, sphere_volume):
        """Test that the returned coefficients deform the aligned mesh into the result."""
        mesh, coefficients, report = fit_ghd(self.canonical, sphere_volume, self.config)
        aligned = aligned_canonical(self.canonical, report)
        basis = ghd_basis(build_laplacian(aligned, "mixed", 0.1, 0.05, True), 9)
        assert np.allclose(apply_ghd(aligned, basis, coefficients).vertices, mesh.vertices, atol=1e-8)

    def test_vertex_parameterization(self, sphere_volume):
        """Test that per-vertex fitting returns one displacement per vertex."""
        config = self.config.replace(parameterization="vertex")
        mesh, coefficients, report = fit_ghd(self.canonical, sphere_volume, config)
        aligned = aligned_canonical(self.canonical, report)
        assert report["parameterization"] == "vertex"
        assert coefficients.values.shape == (self.canonical.num_vertices, 3)
        assert np.allclose(mesh.vertices - aligned.vertices, coefficients.values, atol=1e-9)

    def test_slice_supervision(self, sphere_volume):
        """Test that slice supervision reports per-slice Dice."""
        stack = extract_slices(sphere_volume, "z", spaced_slice_indices(sphere_volume, "z", 5))
        _, _, report = fit_ghd(self.canonical, stack, self.config)
        assert len(report["dice_slices"]) == 5
        assert report["dice_3d"] is None

    def test_mesh_target(self):
        """Test that a target mesh drives the Chamfer term and reports surface distances."""
        _, _, report = fit_ghd(self.canonical, make_icosphere(2, 11.0), self.config)
        assert report["chamfer"] is not None
        assert report["hausdorff"] >= 0.0
        assert report["dice_3d"] is not None

    def test_open_canonical(self, sphere_volume):
        """Test that an open canonical mesh is rejected."""
        box = make_box()
        with pytest.raises(OpenMeshError):
            fit_ghd(TriMesh(box.vertices, box.faces[:-1]), sphere_volume, self.config)

    def test_empty_supervision(self):
        """Test that a volume without labels is rejected."""
        empty = LabelVolume.empty(GridSpec((8, 8, 8), (1.0, 1.0, 1.0), (-4.0, -4.0, -4.0)))
        with pytest.raises(EmptySupervisionError):
            fit_ghd(self.canonical, empty, self.config)


class TestFitOutputs:
    """Tests for report, trace and coefficient files."""

    def setup_method(self):
        self.report = {
            "loss_trace": [0.5, 0.25, 0.125],
            "iterations": 3,
            "converged": True,
            "stop_reason": "budget",
            "timing": {"wall_clock_seconds": 1.0, "finished_at": "2024-01-01T00:00:00+00:00"},
        }

    def test_report_json(self, tmp_path):
        """Test that the report is written as sorted JSON and timing can be left out."""
        path = tmp_path / "report.json"
        save_report(self.report, path)
        assert json.loads(path.read_text())["iterations"] == 3
        assert "timing" not in json.loads(report_to_json(self.report, include_timing=False))

    def test_trace_csv(self, tmp_path):
        """Test the iteration and loss columns of the trace."""
        path = tmp_path / "trace.csv"
        save_trace_csv(self.report, path)
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["iteration", "loss"]
        assert rows[1:] == [["1", "0.5"], ["2", "0.25"], ["3", "0.125"]]

    def test_coefficients_round_trip(self, tmp_path):
        """Test that coefficients survive save then load."""
        coefficients = GhdCoefficients(np.random.default_rng(0).standard_normal((6, 3)))
        path = tmp_path / "coefficients.json"
        save_coefficients(coefficients, path)
        assert np.array_equal(load_coefficients(path).values, coefficients.values)

    def test_coefficients_wrong_format(self, tmp_path):
        """Test that another document is rejected as a coefficient file."""
        path = tmp_path / "coefficients.json"
        path.write_text(json.dumps({"format": "ghd-basis"}))
        with pytest.raises(BasisFormatError):
            load_coefficients(path)


@pytest.mark.slow
class TestReconstruction:
    """Full-budget reconstructions of synthetic phantoms."""

    @pytest.fixture(scope="class")
    def truth(self, shell):
        return _perturbed_shell(shell)

    @pytest.fixture(scope="class")
    def volume(self, truth):
        return voxelize_oracle(truth, grid_around(truth, 0.5))

    @pytest.fixture(scope="class")
    def stack(self, volume):
        return extract_slices(volume, "z", spaced_slice_indices(volume, "z", 5))

    def setup_method(self):
        self.config = FitConfig(seed=3)

    def test_dense_fit(self, shell, volume):
        """Test a dense-volume fit of a deformed shell."""
        _, _, report = fit_ghd(shell, volume, self.config)
        assert report["dice_3d"] >= 0.95
        assert good_angle_ratio(shell) - report["gar_after"] <= 0.05
        assert report["converged"]

    def test_sparse_fit(self, shell, volume, stack):
        """Test that five short-axis slices reconstruct the held-out volume."""
        mesh, _, report = fit_ghd(shell, stack, self.config)
        assert evaluate(mesh, volume, self.config)["dice_3d"] >= 0.88
        assert min(report["dice_slices"]) >= 0.92

    def test_vertex_morphing_degrades_quality(self, shell, stack):
        """Test that per-vertex morphing loses far more triangle quality than harmonic deformation."""
        before = good_angle_ratio(shell)
        _, _, harmonic = fit_ghd(shell, stack, self.config)
        _, _, morphing = fit_ghd(shell, stack, self.config.replace(parameterization="vertex"))
        assert before - harmonic["gar_after"] <= 0.05
        assert before - morphing["gar_after"] >= 0.2

    def test_deterministic(self, shell, volume):
        """Test that repeated fits give identical reports apart from timing."""
        a = fit_ghd(shell, volume, self.config).report
        b = fit_ghd(shell, volume, self.config).report
        assert report_to_json(a, include_timing=False) == report_to_json(b, include_timing=False)

    def test_ejection_fraction(self):
        """Test that fitted cavity volumes give the analytic ejection fraction."""
        canonical = make_cavity_phantom((22.0, 22.0, 42.0), 0.7)
        volumes = []
        expected = []
        for radii in ((24.0, 23.0, 44.0), (18.0, 17.0, 36.0)):
            phase = make_cavity_phantom(radii, 0.7)
            labels = voxelize_oracle(phase, grid_around(phase, 0.5))
            mesh, _, _ = fit_ghd(canonical, labels, self.config)
            volumes.append(enclosed_volume(mesh))
            expected.append(truncated_spheroid_volume(radii, base_plane(radii, 0.7)))
        analytic = (expected[0] - expected[1]) / expected[0]
        assert ejection_fraction(*volumes) == pytest.approx(analytic, abs=0.02)
