"""
Command-line front end.

Subcommands generate phantoms, fit meshes, score results and dump
intermediate quantities. Exit codes: 0 success, 1 usage or format error,
2 fit did not converge.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from . import __version__
from .config import FitConfig
from .enclosed_volume import enclosed_volume
from .evaluate import ejection_fraction, evaluate
from .exceptions import GhdReconError
from .fit import fit_ghd, save_coefficients, save_report, save_trace_csv
from .mesh import TriMesh
from .mesh_io import load_mesh, save_mesh
from .occupancy import occupancy
from .primitives import make_cavity_phantom, make_icosphere, make_shell_phantom
from .quality import good_angle_ratio
from .sampling import extract_slices, spaced_slice_indices
from .volume import LabelVolume, SliceStack
from .volume_io import SLICES_FORMAT, VOLUME_FORMAT, load_slices, load_volume, save_slices, save_volume
from .voxelize import grid_around, voxelize_oracle

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

EXIT_CODES_HELP = (
    "exit codes: 0 success, including a fit that used its whole iteration budget; "
    "1 usage or format error; "
    "2 fit stopped on a non-finite loss or gradient (off when fail_on_nonconvergence is false)"
)


class UsageError(Exception):
    """Raised instead of argparse's own exit so usage errors map to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _floats(text: str, count: int) -> List[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected {count} comma-separated numbers, got "{text}"')
    if len(values) != count:
        raise argparse.ArgumentTypeError(f'expected {count} comma-separated numbers, got "{text}"')
    return values


def _triple(text: str) -> List[float]:
    return _floats(text, 3)


def _indices(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated integers, got "{text}"')


def _emit(document: dict, out: Optional[str]) -> None:
    text = json.dumps(document, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def load_supervision(path: str) -> Union[TriMesh, LabelVolume, SliceStack]:
    """Load a mesh (.obj), label volume or slice stack by file content."""
    source = Path(path)
    if source.suffix.lower() == ".obj":
        return load_mesh(source)
    try:
        header = json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as error:
        raise GhdReconError(f"{path}: not a mesh, volume or slice stack ({error})")
    kind = header.get("format") if isinstance(header, dict) else None
    if kind == VOLUME_FORMAT:
        return load_volume(source)
    if kind == SLICES_FORMAT:
        return load_slices(source)
    raise GhdReconError(f'{path}: unknown document format "{kind}"')


def _config(args: argparse.Namespace) -> FitConfig:
    config = FitConfig.load(args.config) if getattr(args, "config", None) else FitConfig()
    return config.replace(seed=args.seed, iterations=getattr(args, "iterations", None))


def cmd_synth(args: argparse.Namespace) -> int:
    if args.kind == "icosphere":
        mesh = make_icosphere(args.subdiv, args.radius)
    elif args.kind == "shell":
        mesh = make_shell_phantom(args.outer, args.wall, args.cut, args.resolution)
    else:
        mesh = make_cavity_phantom(args.radii, args.cut, args.resolution)
    save_mesh(mesh, args.output)
    summary = {
        "mesh": str(args.output),
        "num_vertices": mesh.num_vertices,
        "num_faces": mesh.num_faces,
        "enclosed_volume": enclosed_volume(mesh),
        "good_angle_ratio": good_angle_ratio(mesh),
    }
    if args.voxelize is not None:
        volume = voxelize_oracle(mesh, grid_around(mesh, args.voxelize))
        target = args.volume or str(Path(args.output).with_suffix("")) + ".lvh.json"
        save_volume(volume, target)
        summary["volume"] = str(target)
        summary["labeled_volume"] = volume.labeled_volume()
    _emit(summary, None)
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    config = _config(args)
    canonical = load_mesh(args.canonical)
    supervision = load_supervision(args.supervision)
    mesh, coefficients, report = fit_ghd(canonical, supervision, config)

    prefix = args.output
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    save_mesh(mesh, f"{prefix}.obj")
    save_coefficients(coefficients, f"{prefix}.coefficients.json")
    save_report(report, f"{prefix}.report.json")
    save_trace_csv(report, f"{prefix}.trace.csv")
    logger.info("Wrote %s.{obj,coefficients.json,report.json,trace.csv}", prefix)

    if not report["converged"] and config.fail_on_nonconvergence:
        print(f"Fit did not converge ({report['stop_reason']})", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    config = _config(args)
    mesh = load_mesh(args.mesh)
    reference = load_supervision(args.reference)
    _emit(dict(evaluate(mesh, reference, config)), args.output)
    return EXIT_OK


def cmd_slice(args: argparse.Namespace) -> int:
    volume = load_volume(args.volume)
    indices = args.indices if args.indices else spaced_slice_indices(volume, args.axis, args.count)
    stack = extract_slices(volume, args.axis, indices)
    save_slices(stack, args.output)
    _emit({"slices": str(args.output), "axis": args.axis, "indices": indices}, None)
    return EXIT_OK


def _read_points(path: str) -> np.ndarray:
    document = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(document, dict):
        document = document.get("points", [])
    points = np.asarray(document, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3:
        raise GhdReconError(f"{path}: expected a list of [x, y, z] points")
    return points


def cmd_occupancy(args: argparse.Namespace) -> int:
    mesh: TriMesh = load_mesh(args.mesh)
    result = occupancy(mesh, _read_points(args.points), args.beta, args.quadrature)
    _emit(
        {
            "beta": result.beta,
            "quadrature": args.quadrature,
            "raw": result.raw.tolist(),
            "smooth": result.smooth.tolist(),
            "flagged": np.flatnonzero(result.flagged).tolist(),
        },
        args.output,
    )
    return EXIT_OK


def cmd_ef(args: argparse.Namespace) -> int:
    print(f"{ejection_fraction(args.v_ed, args.v_es):.2f}")
    return EXIT_OK


def cmd_config(args: argparse.Namespace) -> int:
    config = FitConfig().replace(seed=args.seed)
    if args.output:
        config.save(args.output)
    else:
        sys.stdout.write(config.to_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ghd-recon",
        description="Mesh reconstruction by graph harmonic deformation.",
        epilog=EXIT_CODES_HELP,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for every iteration")
    parser.add_argument("-q", "--quiet", action="store_true", help="only report errors")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    synth = commands.add_parser("synth", help="generate a phantom mesh and optional oracle volume")
    synth.add_argument("kind", choices=["icosphere", "shell", "cavity"])
    synth.add_argument("-o", "--output", required=True, help="output OBJ")
    synth.add_argument("--subdiv", type=int, default=3)
    synth.add_argument("-r", "--radius", type=float, default=10.0)
    synth.add_argument("--outer", type=_triple, default=[30.0, 30.0, 50.0], help="outer radii a,b,c in mm")
    synth.add_argument("--radii", type=_triple, default=[22.0, 22.0, 42.0], help="cavity radii a,b,c in mm")
    synth.add_argument("--wall", type=float, default=8.0)
    synth.add_argument("--cut", type=float, default=0.7, help="retained fraction of the long axis")
    synth.add_argument("--resolution", type=int, default=20)
    synth.add_argument("--voxelize", type=float, default=None, metavar="SPACING", help="write an oracle volume")
    synth.add_argument("--volume", default=None, help="oracle volume header (.lvh.json)")
    synth.set_defaults(handler=cmd_synth)

    fit = commands.add_parser("fit", help="fit a canonical mesh to supervision", epilog=EXIT_CODES_HELP)
    fit.add_argument("canonical", help="canonical OBJ")
    fit.add_argument("supervision", help="label volume, slice stack or target OBJ")
    fit.add_argument("-c", "--config", default=None, help="FitConfig JSON (all fields required)")
    fit.add_argument("-o", "--output", required=True, help="output prefix")
    fit.add_argument("--iterations", type=int, default=None)
    fit.set_defaults(handler=cmd_fit)

    metrics = commands.add_parser("metrics", help="score a mesh against a reference")
    metrics.add_argument("mesh")
    metrics.add_argument("reference", help="label volume, slice stack or OBJ")
    metrics.add_argument("-c", "--config", default=None)
    metrics.add_argument("-o", "--output", default=None, help="JSON output, default standard output")
    metrics.set_defaults(handler=cmd_metrics)

    slices = commands.add_parser("slice", help="extract axis-aligned slices from a volume")
    slices.add_argument("volume")
    slices.add_argument("--axis", choices=["x", "y", "z"], default="z")
    group = slices.add_mutually_exclusive_group(required=True)
    group.add_argument("--indices", type=_indices, help="comma-separated voxel indices")
    group.add_argument("--count", type=int, help="evenly spaced slices across the labeled extent")
    slices.add_argument("-o", "--output", required=True, help="slice stack manifest (.json)")
    slices.set_defaults(handler=cmd_slice)

    occ = commands.add_parser("occupancy", help="dump raw and smooth occupancy of points")
    occ.add_argument("mesh")
    occ.add_argument("points", help="JSON list of [x, y, z]")
    occ.add_argument("--beta", type=float, default=1e3)
    occ.add_argument("--quadrature", choices=["facet", "vertex"], default="facet")
    occ.add_argument("-o", "--output", default=None)
    occ.set_defaults(handler=cmd_occupancy)

    ef = commands.add_parser("ef", help="ejection fraction of two volumes")
    ef.add_argument("v_ed", type=float)
    ef.add_argument("v_es", type=float)
    ef.set_defaults(handler=cmd_ef)

    config = commands.add_parser("config", help="write the default FitConfig")
    config.add_argument("-o", "--output", default=None)
    config.set_defaults(handler=cmd_config)
    return parser


def _configure_logging(verbose: int, quiet: bool) -> None:
    if quiet:
        level = logging.ERROR
    else:
        level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the command line.

    Returns:
        int: Exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as error:
        print(f"ghd-recon: error: {error}", file=sys.stderr)
        return EXIT_ERROR
    _configure_logging(args.verbose, args.quiet)
    try:
        return args.handler(args)
    except (GhdReconError, OSError, ValueError) as error:
        print(f"ghd-recon: error: {error}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
