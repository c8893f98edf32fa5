"""
GHD reconstruction exceptions.

Contains custom exception classes for mesh, volume, spectral and fitting errors.
"""

from typing import Iterable, List, Optional, Sequence, Tuple


class GhdReconError(Exception):
    """Base class for all ghd_recon errors."""
    pass


class MeshError(GhdReconError):
    """Base class for invalid mesh topology or geometry."""
    pass


class InvalidFaceError(MeshError):
    """Raised when a face references a missing vertex or repeats a vertex."""

    def __init__(self, face_index: int, face: Sequence[int], num_vertices: int):
        self.face_index = face_index
        self.face = tuple(int(i) for i in face)
        self.num_vertices = num_vertices
        message = (
            f"Face {face_index} {self.face} is invalid for a mesh "
            f"with {num_vertices} vertices"
        )
        super().__init__(message)


class MeshParseError(MeshError):
    """Raised when an OBJ record cannot be parsed."""

    def __init__(self, line_number: int, message: str, path: Optional[str] = None):
        self.line_number = line_number
        self.path = path
        self.reason = message
        location = f"{path}:{line_number}" if path else f"line {line_number}"
        super().__init__(f"{location}: {message}")


class FaceIndexError(MeshParseError):
    """Raised when an OBJ face references a vertex that does not exist."""

    def __init__(
        self,
        line_number: int,
        index: int,
        num_vertices: int,
        path: Optional[str] = None,
    ):
        self.index = index
        self.num_vertices = num_vertices
        super().__init__(
            line_number,
            f"face index {index} is out of range (1..{num_vertices})",
            path,
        )


class NonManifoldEdgeError(MeshError):
    """Raised when an edge is shared by more than two faces."""

    def __init__(self, edges: Iterable[Tuple[int, int]]):
        self.edges: List[Tuple[int, int]] = [(int(i), int(j)) for i, j in edges]
        shown = ", ".join(f"({i}, {j})" for i, j in self.edges[:10])
        more = f" and {len(self.edges) - 10} more" if len(self.edges) > 10 else ""
        super().__init__(f"Non-manifold edges: {shown}{more}")


class CoincidentVerticesError(MeshError):
    """Raised when an edge has zero length under inverse-distance weighting."""

    def __init__(self, edges: Iterable[Tuple[int, int]]):
        self.edges: List[Tuple[int, int]] = [(int(i), int(j)) for i, j in edges]
        shown = ", ".join(f"({i}, {j})" for i, j in self.edges[:10])
        super().__init__(f"Coincident vertices on edges: {shown}")


class PhantomParameterError(MeshError):
    """Raised when phantom parameters cannot produce a valid closed shell."""

    def __init__(self, message: str):
        super().__init__(message)


class ConnectivityMismatchError(MeshError):
    """Raised when two meshes that must share connectivity do not."""

    def __init__(self, message: str = "Meshes do not share connectivity"):
        super().__init__(message)


class VolumeFormatError(GhdReconError):
    """Raised when a label volume or slice stack file is malformed."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class SliceValidationError(VolumeFormatError):
    """Raised when a slice pose is not orthonormal or a mask is malformed."""

    def __init__(self, slice_index: int, message: str, path: Optional[str] = None):
        self.slice_index = slice_index
        super().__init__(f"slice {slice_index}: {message}", path)


class SliceSelectionError(GhdReconError):
    """Raised when slice extraction is asked for no or invalid indices."""

    def __init__(self, message: str):
        super().__init__(message)


class DimensionMismatchError(GhdReconError):
    """Raised when array shapes do not agree."""

    def __init__(self, what: str, expected: object, received: object):
        self.what = what
        self.expected = expected
        self.received = received
        super().__init__(f"{what}: expected {expected}, received {received}")


class EigenSolverError(GhdReconError):
    """Raised when eigenpairs fail to converge or violate the residual bound."""

    def __init__(self, residuals: Sequence[float], message: str = "Eigensolver failed"):
        self.residuals = [float(r) for r in residuals]
        worst = max(self.residuals) if self.residuals else float("nan")
        super().__init__(f"{message}; worst residual {worst:.3e}")


class NonFiniteGradientError(GhdReconError):
    """Raised when an optimizer receives NaN or infinite gradients."""

    def __init__(self, iteration: int):
        self.iteration = iteration
        super().__init__(f"Non-finite gradient at iteration {iteration}")


class ConfigError(GhdReconError):
    """Raised when a configuration document is invalid."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f'config field "{field}": {message}')


class MissingConfigFieldError(ConfigError):
    """Raised when a strict configuration document omits a field."""

    def __init__(self, field: str):
        super().__init__(field, "value is missing")


class InvalidVolumeError(GhdReconError):
    """Raised when a volume cannot serve as an ejection fraction reference."""

    def __init__(self, value: float):
        self.value = value
        super().__init__(f"End-diastolic volume must be positive, got {value}")


class BasisFormatError(GhdReconError):
    """Raised when a serialized basis is malformed."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class OpenMeshError(MeshError):
    """Raised when an operation needs a closed mesh."""

    def __init__(self, what: str = "mesh"):
        self.what = what
        super().__init__(f"The {what} must be closed: every edge needs exactly two faces")


class EmptySupervisionError(GhdReconError):
    """Raised when supervision contains no foreground."""

    def __init__(self, message: str = "Supervision has no foreground points"):
        super().__init__(message)
