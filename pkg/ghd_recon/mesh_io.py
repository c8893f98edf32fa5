"""
Mesh file input/output.

Contains ASCII OBJ readers and writers. Only `v` and triangular `f` records are
used; normals are always recomputed, never read.
"""

from pathlib import Path
from typing import List

import numpy as np

from .exceptions import FaceIndexError, MeshParseError
from .mesh import TriMesh
from .types import PathLike

# Records that carry no geometry and are skipped.
_IGNORED_RECORDS = {"vn", "vt", "vp", "o", "g", "s", "mtllib", "usemtl", "l"}


def load_mesh(path: PathLike) -> TriMesh:
    """
    Load a triangle mesh from an ASCII OBJ file.

    Args:
        path: OBJ file path

    Returns:
        TriMesh: Mesh with 0-based faces

    Raises:
        MeshParseError: When a record is malformed or a face is not a triangle
        FaceIndexError: When a face references a vertex that does not exist

    Example:
        >>> mesh = load_mesh("shell.obj")
    """
    source = str(path)
    vertices: List[List[float]] = []
    faces: List[List[int]] = []
    pending: List[tuple] = []

    with open(path, "r", encoding="utf-8") as handle:
        for line_number, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            record = tokens[0]
            if record == "v":
                if len(tokens) < 4:
                    raise MeshParseError(line_number, "vertex needs 3 coordinates", source)
                try:
                    vertices.append([float(t) for t in tokens[1:4]])
                except ValueError:
                    raise MeshParseError(line_number, f"invalid vertex coordinates: {line}", source)
            elif record == "f":
                if len(tokens) != 4:
                    raise MeshParseError(
                        line_number,
                        f"face has {len(tokens) - 1} vertices, only triangles are supported",
                        source,
                    )
                try:
                    face = [int(t.split("/", 1)[0]) for t in tokens[1:]]
                except ValueError:
                    raise MeshParseError(line_number, f"invalid face indices: {line}", source)
                faces.append(face)
                pending.append((line_number, face))
            elif record in _IGNORED_RECORDS:
                continue
            else:
                raise MeshParseError(line_number, f'unknown record "{record}"', source)

    num_vertices = len(vertices)
    for line_number, face in pending:
        for index in face:
            if index < 1 or index > num_vertices:
                raise FaceIndexError(line_number, index, num_vertices, source)
        if len(set(face)) != 3:
            raise MeshParseError(line_number, f"face repeats a vertex: {face}", source)

    face_array = np.asarray(faces, dtype=np.int64).reshape(-1, 3) - 1
    return TriMesh(np.asarray(vertices, dtype=np.float64).reshape(-1, 3), face_array)


def save_mesh(mesh: TriMesh, path: PathLike) -> None:
    """
    Save a triangle mesh as ASCII OBJ with 1-based indices.

    Coordinates are written with 17 significant digits, so a save/load round
    trip reproduces vertices exactly.
    """
    lines = [f"# {mesh.num_vertices} vertices, {mesh.num_faces} faces"]
    lines.extend(f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices)
    lines.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
