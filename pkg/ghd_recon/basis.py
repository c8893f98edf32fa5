"""
Graph harmonic basis and deformation.

Contains the low-frequency eigenbasis of a mesh Laplacian, the graph Fourier
transform and the harmonic deformation X = X0 + U @ Phi.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from scipy import linalg
from scipy.sparse import linalg as sparse_linalg

from .exceptions import BasisFormatError, DimensionMismatchError, EigenSolverError
from .laplacian import GraphLaplacian
from .mesh import TriMesh
from .types import LaplacianKind, PathLike

logger = logging.getLogger(__name__)

# Largest problem solved with a dense symmetric eigensolver.
DENSE_LIMIT = 3000

# Residual bound ||L u - lambda u|| <= RESIDUAL_TOLERANCE * max(1, lambda).
RESIDUAL_TOLERANCE = 1e-6

BASIS_FORMAT = "ghd-basis"


@dataclass(frozen=True)
class GhdBasis:
    """
    Lowest-frequency orthonormal eigenvectors of a graph Laplacian.

    Attributes:
        modes: (n, m) matrix U, columns in ascending eigenvalue order
        eigenvalues: (m,) ascending eigenvalues
        kind: Laplacian the basis was computed from
    """
    modes: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray
    kind: LaplacianKind = LaplacianKind.MIXED
    norm_weight: float = 0.0
    unw_weight: float = 0.0

    def __post_init__(self) -> None:
        modes = np.array(self.modes, dtype=np.float64, copy=True)
        eigenvalues = np.array(self.eigenvalues, dtype=np.float64, copy=True).reshape(-1)
        if modes.ndim != 2 or modes.shape[1] != len(eigenvalues):
            raise DimensionMismatchError("basis modes", ("n", len(eigenvalues)), modes.shape)
        modes.flags.writeable = False
        eigenvalues.flags.writeable = False
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "eigenvalues", eigenvalues)
        object.__setattr__(self, "kind", LaplacianKind(self.kind))

    @property
    def num_vertices(self) -> int:
        return int(self.modes.shape[0])

    @property
    def num_modes(self) -> int:
        return int(self.modes.shape[1])


@dataclass(frozen=True)
class GhdCoefficients:
    """Per-axis coefficients Phi, an (m, 3) matrix."""
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2 or values.shape[1] != 3:
            raise DimensionMismatchError("coefficients", ("m", 3), values.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("coefficients must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, num_modes: int) -> "GhdCoefficients":
        return cls(np.zeros((num_modes, 3)))

    @property
    def num_modes(self) -> int:
        return int(self.values.shape[0])


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of every column positive."""
    peak = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[peak, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _dense_eigenpairs(laplacian: GraphLaplacian, count: int) -> Tuple[np.ndarray, np.ndarray]:
    return linalg.eigh(laplacian.to_dense(), subset_by_index=[0, count - 1])


def _sparse_eigenpairs(laplacian: GraphLaplacian, count: int) -> Tuple[np.ndarray, np.ndarray]:
    matrix = laplacian.matrix
    shift = -1e-3 * float(np.mean(matrix.diagonal()))
    try:
        values, vectors = sparse_linalg.eigsh(
            matrix, k=count, sigma=shift, which="LM", v0=np.ones(matrix.shape[0])
        )
    except sparse_linalg.ArpackNoConvergence as error:
        raise EigenSolverError([], f"ARPACK did not converge: {error}")
    # Rayleigh-Ritz on the orthonormalized subspace restores exact orthonormality.
    q, _ = np.linalg.qr(vectors)
    small = q.T @ (matrix @ q)
    values, rotation = linalg.eigh(0.5 * (small + small.T))
    return values, q @ rotation


def ghd_basis(laplacian: GraphLaplacian, num_modes: int, dense_limit: int = DENSE_LIMIT) -> GhdBasis:
    """
    Extract the lowest eigenpairs of a Laplacian.

    Problems up to ``dense_limit`` nodes use a dense symmetric solver; larger
    ones use shift-invert Lanczos followed by a Rayleigh-Ritz cleanup. Each
    eigenvector is signed so its largest-magnitude entry is positive.

    Args:
        laplacian: Symmetric graph Laplacian
        num_modes: Number of modes m, 1 <= m <= n
        dense_limit: Size threshold of the dense solver

    Returns:
        GhdBasis: Orthonormal modes in ascending eigenvalue order

    Raises:
        DimensionMismatchError: When m is outside 1..n
        EigenSolverError: When the solver fails or a residual exceeds the bound

    Example:
        >>> basis = ghd_basis(build_laplacian(make_icosphere(2)), 16)
        >>> basis.modes.shape
        (162, 16)
    """
    n = laplacian.size
    if not 1 <= num_modes <= n:
        raise DimensionMismatchError("mode count", f"1..{n}", num_modes)
    if n <= dense_limit or num_modes >= n - 1:
        values, vectors = _dense_eigenpairs(laplacian, num_modes)
    else:
        values, vectors = _sparse_eigenpairs(laplacian, num_modes)

    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = _fix_signs(vectors[:, order])
    values = np.where((values < 0) & (values > -1e-10), 0.0, values)

    residuals = np.linalg.norm(laplacian.matrix @ vectors - vectors * values, axis=0)
    bound = RESIDUAL_TOLERANCE * np.maximum(1.0, np.abs(values))
    if np.any(residuals > bound):
        raise EigenSolverError(residuals, "Eigenpairs violate the residual bound")
    logger.debug(
        "Basis of %d modes on %d nodes, eigenvalues %.3e..%.3e, worst residual %.2e",
        num_modes, n, values[0], values[-1], float(residuals.max()),
    )
    return GhdBasis(vectors, values, laplacian.kind, laplacian.norm_weight, laplacian.unw_weight)


def _check_rows(basis: GhdBasis, array: np.ndarray, what: str) -> None:
    if array.shape[0] != basis.num_vertices:
        raise DimensionMismatchError(what, basis.num_vertices, array.shape[0])


def gft_forward(basis: GhdBasis, signal: np.ndarray) -> np.ndarray:
    """Graph Fourier coefficients U^T f of a per-vertex signal (n,) or (n, k)."""
    f = np.asarray(signal, dtype=float)
    _check_rows(basis, f, "signal length")
    return basis.modes.T @ f


def gft_inverse(basis: GhdBasis, coefficients: np.ndarray) -> np.ndarray:
    """Per-vertex signal U c from coefficients (m,) or (m, k)."""
    c = np.asarray(coefficients, dtype=float)
    if c.shape[0] != basis.num_modes:
        raise DimensionMismatchError("coefficient count", basis.num_modes, c.shape[0])
    return basis.modes @ c


def gft_lowpass(basis: GhdBasis, signal: np.ndarray, keep: int) -> np.ndarray:
    """Reconstruct a signal from its first ``keep`` graph Fourier coefficients."""
    f = np.asarray(signal, dtype=float)
    _check_rows(basis, f, "signal length")
    u = basis.modes[:, :keep]
    return u @ (u.T @ f)


def apply_ghd(
    canonical: TriMesh,
    basis: GhdBasis,
    coefficients: Union[GhdCoefficients, np.ndarray],
) -> TriMesh:
    """
    Deform a canonical mesh by graph harmonic coefficients.

    Args:
        canonical: Mesh the basis was computed on
        basis: (n, m) harmonic basis
        coefficients: (m, 3) per-axis coefficients

    Returns:
        TriMesh: Same connectivity, vertices X0 + U @ Phi

    Raises:
        DimensionMismatchError: When vertex or mode counts disagree
    """
    phi = coefficients.values if isinstance(coefficients, GhdCoefficients) else np.asarray(coefficients, dtype=float)
    if canonical.num_vertices != basis.num_vertices:
        raise DimensionMismatchError("canonical vertex count", basis.num_vertices, canonical.num_vertices)
    if phi.shape != (basis.num_modes, 3):
        raise DimensionMismatchError("coefficients", (basis.num_modes, 3), phi.shape)
    return canonical.with_vertices(canonical.vertices + basis.modes @ phi)


def _basis_payload(path: Path) -> Path:
    name = path.name
    stem = name[: -len(".json")] if name.endswith(".json") else path.stem
    return path.with_name(stem + ".f64")


def save_basis(basis: GhdBasis, path: PathLike) -> Path:
    """Write a basis as a JSON header and a raw little-endian float64 payload (row-major U)."""
    header_path = Path(path)
    payload_path = _basis_payload(header_path)
    header = {
        "format": BASIS_FORMAT,
        "version": 1,
        "n": basis.num_vertices,
        "m": basis.num_modes,
        "kind": basis.kind.value,
        "norm_weight": basis.norm_weight,
        "unw_weight": basis.unw_weight,
        "eigenvalues": basis.eigenvalues.tolist(),
        "dtype": "<f8",
        "payload": payload_path.name,
    }
    header_path.write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")
    payload_path.write_bytes(basis.modes.astype("<f8").tobytes(order="C"))
    return payload_path


def load_basis(path: PathLike) -> GhdBasis:
    """
    Read a basis written by ``save_basis``.

    Raises:
        BasisFormatError: When the header is malformed or the payload size is wrong
    """
    header_path = Path(path)
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
    except (FileNotFoundError, json.JSONDecodeError) as error:
        raise BasisFormatError(f"cannot read header: {error}", str(header_path))
    if not isinstance(header, dict) or header.get("format") != BASIS_FORMAT:
        raise BasisFormatError(f'expected a "{BASIS_FORMAT}" document', str(header_path))
    try:
        n, m = int(header["n"]), int(header["m"])
        eigenvalues = np.asarray(header["eigenvalues"], dtype=float)
        payload = header_path.with_name(header.get("payload", _basis_payload(header_path).name))
    except (KeyError, TypeError, ValueError) as error:
        raise BasisFormatError(f"invalid header: {error}", str(header_path))
    try:
        raw = payload.read_bytes()
    except FileNotFoundError:
        raise BasisFormatError(f"payload {payload.name} not found", str(header_path))
    if len(raw) != 8 * n * m:
        raise BasisFormatError(
            f"payload {payload.name} has {len(raw)} bytes, header requires {8 * n * m}", str(header_path)
        )
    if len(eigenvalues) != m:
        raise BasisFormatError(f"header lists {len(eigenvalues)} eigenvalues for {m} modes", str(header_path))
    modes = np.frombuffer(raw, dtype="<f8").reshape(n, m)
    return GhdBasis(
        modes,
        eigenvalues,
        LaplacianKind(header.get("kind", LaplacianKind.MIXED.value)),
        float(header.get("norm_weight", 0.0)),
        float(header.get("unw_weight", 0.0)),
    )
