"""
End-to-end reconstruction.

Contains fit_ghd (rigid pre-alignment followed by Adam on graph harmonic
coefficients under the combined loss), its schedules, and the writers for
reports, loss traces and coefficients.
"""

import csv
import json
import logging
import math
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .adam import AdamState, adam_update
from .basis import GhdBasis, GhdCoefficients, ghd_basis
from .config import FitConfig
from .evaluate import evaluate
from .exceptions import BasisFormatError, EmptySupervisionError, NonFiniteGradientError, OpenMeshError
from .laplacian import build_laplacian
from .loss import ChamferTarget, LossWeights, combined_loss
from .mesh import TriMesh, is_closed
from .quality import good_angle_ratio
from .rigid import RigidPose, one_sided_chamfer, rigid_align
from .sampling import sample_points
from .surface_sampling import sample_surface
from .types import FitReport, FitTiming, Parameterization, PathLike
from .volume import LabeledPoints, LabelVolume, SliceStack

logger = logging.getLogger(__name__)

COEFFICIENTS_FORMAT = "ghd-coefficients"

Supervision = Union[LabelVolume, SliceStack, TriMesh]


class FitResult(NamedTuple):
    """Deformed mesh, its coefficients and the fit report."""
    mesh: TriMesh
    coefficients: GhdCoefficients
    report: FitReport


def beta_at(config: FitConfig, iteration: int) -> float:
    """
    Occupancy sharpness at an iteration.

    Geometric ramp from ``beta_start`` to ``beta_end`` over
    ``beta_ramp_iterations``, then constant.

    Example:
        >>> beta_at(FitConfig(), 100)
        # 10 * 100**0.5 = 100
    """
    fraction = min(iteration, config.beta_ramp_iterations) / config.beta_ramp_iterations
    return config.beta_start * (config.beta_end / config.beta_start) ** fraction


def learning_rate_at(config: FitConfig, iteration: int) -> float:
    """Learning rate decayed geometrically to ``final_lr_fraction`` at the last iteration."""
    span = max(config.iterations - 1, 1)
    return config.learning_rate * config.final_lr_fraction ** (min(iteration, span) / span)


def _plateaued(trace: Sequence[float], config: FitConfig) -> bool:
    window = config.tolerance_window
    if len(trace) <= window or len(trace) - 1 - window < config.beta_ramp_iterations:
        return False
    before, now = trace[-1 - window], trace[-1]
    return abs(now - before) <= config.tolerance * max(abs(before), 1e-12)


def _training_points(supervision: Supervision, config: FitConfig) -> LabeledPoints:
    if isinstance(supervision, TriMesh):
        target = sample_surface(supervision, max(config.n_fg, 1), config.seed).points
        return LabeledPoints(target, np.ones(len(target), dtype=np.uint8))
    points = sample_points(
        supervision, config.n_fg, config.n_bg, config.bg_band, config.seed, {"jitter": config.jitter}
    )
    if len(points.foreground) == 0:
        raise EmptySupervisionError()
    return points


def fit_ghd(
    canonical: TriMesh,
    supervision: Supervision,
    config: Optional[FitConfig] = None,
) -> FitResult:
    """
    Reconstruct a surface by deforming a canonical mesh.

    The pipeline samples labeled points from the supervision, rigidly aligns
    the canonical mesh to the foreground, builds the Laplacian and harmonic
    basis on the aligned mesh, then runs Adam on the coefficients with the
    sharpness ramp of ``beta_at``. Label supervision drives a soft Dice data
    term; a mesh target drives the surface Chamfer term instead.

    The optimization variable z is dimensionless: Phi = D * sqrt(n) * z for
    the harmonic parameterization and X = X0 + D * z for per-vertex
    displacements, D being the aligned mesh's bounding-box diagonal, so the
    learning rate is a fraction of the mesh size either way.

    Args:
        canonical: Closed template mesh
        supervision: Label volume, slice stack or target mesh
        config: Fit configuration, defaults to ``FitConfig()``

    Returns:
        FitResult: Deformed mesh, coefficients (per-vertex displacements for
        the vertex parameterization) and report

    Raises:
        OpenMeshError: When the canonical mesh is not closed
        EmptySupervisionError: When the supervision has no foreground

    Example:
        >>> mesh, coefficients, report = fit_ghd(make_shell_phantom(), volume, FitConfig(seed=3))
        >>> report["dice_3d"]
    """
    if config is None:
        config = FitConfig()
    if not is_closed(canonical):
        raise OpenMeshError("canonical mesh")
    started = time.perf_counter()

    points = _training_points(supervision, config)
    logger.info(
        "Sampled %d foreground and %d background points",
        len(points.foreground), len(points.background),
    )
    pose = rigid_align(canonical, LabeledPoints(points.foreground, np.ones(len(points.foreground))), config)
    aligned = pose.apply(canonical)
    rigid_loss = one_sided_chamfer(
        pose.transform_points(sample_surface(canonical, config.rigid_samples, config.seed).points),
        points.foreground,
    )

    parameterization = Parameterization(config.parameterization)
    diameter = aligned.diameter()
    basis: Optional[GhdBasis] = None
    if parameterization is Parameterization.GHD:
        laplacian = build_laplacian(
            aligned, config.laplacian_kind, config.norm_weight, config.unw_weight, config.normalize_laplacian
        )
        basis = ghd_basis(laplacian, config.num_modes)
        variable_scale = diameter * math.sqrt(aligned.num_vertices)
        z = np.zeros((basis.num_modes, 3))
    else:
        variable_scale = diameter
        z = np.zeros((aligned.num_vertices, 3))

    def deformed(variable: np.ndarray) -> TriMesh:
        displacement = variable_scale * variable
        if basis is not None:
            displacement = basis.modes @ displacement
        return aligned.with_vertices(aligned.vertices + displacement)

    if isinstance(supervision, TriMesh):
        target = ChamferTarget(points.positions, sample_surface(aligned, len(points), config.seed))
    else:
        target = points
    weights = LossWeights(
        thickness=config.thickness_weight,
        min_thickness=config.min_thickness,
        normal_weight=config.normal_weight,
        volume=config.volume_weight,
        target_volume=config.target_volume,
        incompressibility=config.incompressibility_weight,
    )

    trace = []
    stop_reason = "budget"
    state = AdamState.zeros_like(z)
    for iteration in range(config.iterations):
        beta = beta_at(config, iteration)
        loss = combined_loss(
            deformed(z), target, weights, beta, config.quadrature,
            reference=aligned, frozen_geometry=config.frozen_geometry,
        )
        gradient = loss.vertex_gradient if basis is None else basis.modes.T @ loss.vertex_gradient
        if not math.isfinite(loss.value):
            stop_reason = "non_finite"
            logger.warning("Loss became non-finite at iteration %d; stopping", iteration + 1)
            break
        try:
            state, step = adam_update(
                state, variable_scale * gradient, learning_rate_at(config, iteration),
                config.adam_beta1, config.adam_beta2, config.adam_eps,
            )
        except NonFiniteGradientError as error:
            stop_reason = "non_finite"
            logger.warning("%s; stopping", error)
            break
        trace.append(loss.value)
        z = z + step
        logger.debug("Iteration %d: loss %.8g (beta %.4g) %s", iteration + 1, loss.value, beta, loss.terms)
        if _plateaued(trace, config):
            stop_reason = "tolerance"
            break

    mesh = deformed(z)
    if basis is not None:
        coefficients = GhdCoefficients(variable_scale * z)
    else:
        coefficients = GhdCoefficients(mesh.vertices - aligned.vertices)
    converged = stop_reason != "non_finite"
    if not converged:
        logger.warning("Fit did not converge after %d iterations", len(trace))
    logger.info("Fit stopped after %d iterations (%s)", len(trace), stop_reason)

    metrics = evaluate(mesh, supervision, config)
    elapsed = time.perf_counter() - started
    report = FitReport(
        loss_trace=[float(v) for v in trace],
        iterations=len(trace),
        converged=converged,
        stop_reason=stop_reason,
        parameterization=parameterization.value,
        num_modes=coefficients.num_modes,
        rigid_pose=pose.to_dict(),
        rigid_loss=rigid_loss,
        dice_3d=metrics.get("dice_3d"),
        dice_slices=metrics.get("dice_slices", []),
        dice_slices_mean=metrics.get("dice_slices_mean"),
        chamfer=metrics.get("chamfer"),
        hausdorff=metrics.get("hausdorff"),
        gar_before=good_angle_ratio(aligned),
        gar_after=metrics["good_angle_ratio"],
        enclosed_volume=metrics["enclosed_volume"],
        seed=config.seed,
        timing=FitTiming(
            wall_clock_seconds=elapsed,
            finished_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        ),
    )
    return FitResult(mesh, coefficients, report)


def aligned_canonical(canonical: TriMesh, report: FitReport) -> TriMesh:
    """Canonical mesh under the rigid pose recorded in a report."""
    return RigidPose.from_dict(report["rigid_pose"]).apply(canonical)


def report_to_json(report: FitReport, include_timing: bool = True) -> str:
    data = dict(report)
    if not include_timing:
        data.pop("timing", None)
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def save_report(report: FitReport, path: PathLike) -> None:
    """Write a report as sorted JSON; only the ``timing`` field varies between identical runs."""
    Path(path).write_text(report_to_json(report), encoding="utf-8")


def save_trace_csv(report: FitReport, path: PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["iteration", "loss"])
        for iteration, value in enumerate(report["loss_trace"], start=1):
            writer.writerow([iteration, repr(float(value))])


def save_coefficients(coefficients: GhdCoefficients, path: PathLike) -> None:
    document = {
        "format": COEFFICIENTS_FORMAT,
        "version": 1,
        "num_modes": coefficients.num_modes,
        "values": coefficients.values.tolist(),
    }
    Path(path).write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


def load_coefficients(path: PathLike) -> GhdCoefficients:
    """
    Read coefficients written by ``save_coefficients``.

    Raises:
        BasisFormatError: When the document is not a coefficient file
    """
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (FileNotFoundError, json.JSONDecodeError) as error:
        raise BasisFormatError(f"cannot read coefficients: {error}", str(path))
    if not isinstance(document, dict) or document.get("format") != COEFFICIENTS_FORMAT:
        raise BasisFormatError(f'expected a "{COEFFICIENTS_FORMAT}" document', str(path))
    try:
        return GhdCoefficients(np.asarray(document["values"], dtype=float).reshape(-1, 3))
    except (KeyError, TypeError, ValueError) as error:
        raise BasisFormatError(f"invalid coefficients: {error}", str(path))
