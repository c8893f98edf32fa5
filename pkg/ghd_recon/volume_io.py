"""
Label volume and slice stack files.

A volume is a JSON header (``*.lvh.json``) next to a raw little-endian uint8
payload (``*.lvr``) with x varying fastest. A slice stack is a JSON manifest
plus one raw uint8 payload per slice, i varying fastest.
"""

import json
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from .exceptions import DimensionMismatchError, SliceValidationError, VolumeFormatError
from .volume import GridSpec, LabelSlice, LabelVolume, SliceStack
from .types import PathLike

VOLUME_FORMAT = "ghd-label-volume"
SLICES_FORMAT = "ghd-slice-stack"
FORMAT_VERSION = 1
HEADER_SUFFIX = ".lvh.json"
PAYLOAD_SUFFIX = ".lvr"


def _payload_path(header: Path) -> Path:
    name = header.name
    stem = name[: -len(HEADER_SUFFIX)] if name.endswith(HEADER_SUFFIX) else header.stem
    return header.with_name(stem + PAYLOAD_SUFFIX)


def _read_header(path: Path, expected_format: str) -> Dict[str, Any]:
    try:
        header = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise VolumeFormatError("file not found", str(path))
    except json.JSONDecodeError as error:
        raise VolumeFormatError(f"invalid JSON header: {error}", str(path))
    if not isinstance(header, dict) or header.get("format") != expected_format:
        raise VolumeFormatError(f'expected a "{expected_format}" document', str(path))
    return header


def _field(header: Dict[str, Any], name: str, path: Path) -> Any:
    if name not in header:
        raise VolumeFormatError(f'header is missing "{name}"', str(path))
    return header[name]


def _read_payload(path: Path, expected: int, owner: Path) -> np.ndarray:
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise VolumeFormatError(f"payload {path.name} not found", str(owner))
    if len(raw) != expected:
        raise VolumeFormatError(
            f"payload {path.name} has {len(raw)} bytes, header requires {expected}", str(owner)
        )
    data = np.frombuffer(raw, dtype="<u1")
    if data.size and data.max() > 1:
        raise VolumeFormatError(f"payload {path.name} contains labels other than 0 and 1", str(owner))
    return data


def save_volume(volume: LabelVolume, path: PathLike) -> Path:
    """
    Write a label volume as a header/payload pair.

    Args:
        volume: Label volume
        path: Header path; the payload is written next to it with the ``.lvr`` suffix

    Returns:
        Path: Payload path
    """
    header_path = Path(path)
    payload_path = _payload_path(header_path)
    header = {
        "format": VOLUME_FORMAT,
        "version": FORMAT_VERSION,
        "dims": list(volume.dims),
        "spacing": list(volume.spacing),
        "origin": list(volume.origin),
        "axis_order": "xyz",
        "dtype": "u8",
        "payload": payload_path.name,
    }
    header_path.write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")
    payload_path.write_bytes(volume.data.astype("<u1").tobytes(order="F"))
    return payload_path


def load_volume(path: PathLike) -> LabelVolume:
    """
    Read a label volume written by ``save_volume``.

    Raises:
        VolumeFormatError: When the header is malformed or the payload size does
            not match the header dims
    """
    header_path = Path(path)
    header = _read_header(header_path, VOLUME_FORMAT)
    if header.get("dtype", "u8") != "u8":
        raise VolumeFormatError(f'unsupported dtype "{header.get("dtype")}"', str(header_path))
    if header.get("axis_order", "xyz") != "xyz":
        raise VolumeFormatError(f'unsupported axis order "{header.get("axis_order")}"', str(header_path))
    try:
        grid = GridSpec(
            tuple(_field(header, "dims", header_path)),
            tuple(_field(header, "spacing", header_path)),
            tuple(header.get("origin", (0.0, 0.0, 0.0))),
        )
    except (TypeError, ValueError) as error:
        raise VolumeFormatError(f"invalid grid: {error}", str(header_path))
    except VolumeFormatError as error:
        raise VolumeFormatError(str(error), str(header_path))
    payload = header_path.with_name(header.get("payload", _payload_path(header_path).name))
    data = _read_payload(payload, grid.num_voxels, header_path)
    return LabelVolume(grid, data.reshape(grid.dims, order="F"))


def save_slices(stack: SliceStack, path: PathLike) -> List[Path]:
    """
    Write a slice stack as a JSON manifest plus one payload per slice.

    Returns:
        List[Path]: Payload paths, in slice order
    """
    manifest_path = Path(path)
    stem = manifest_path.name.split(".", 1)[0]
    entries = []
    payloads = []
    for index, item in enumerate(stack):
        payload = manifest_path.with_name(f"{stem}.{index:03d}{PAYLOAD_SUFFIX}")
        payload.write_bytes(item.mask.astype("<u1").tobytes(order="F"))
        payloads.append(payload)
        entries.append(
            {
                "origin": item.origin.tolist(),
                "u": item.u.tolist(),
                "v": item.v.tolist(),
                "spacing": list(item.spacing),
                "shape": list(item.mask.shape),
                "payload": payload.name,
            }
        )
    manifest = {"format": SLICES_FORMAT, "version": FORMAT_VERSION, "dtype": "u8", "slices": entries}
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return payloads


def load_slices(path: PathLike) -> SliceStack:
    """
    Read a slice stack written by ``save_slices``.

    Raises:
        VolumeFormatError: When the manifest or a payload is malformed
        SliceValidationError: When a slice pose is not orthonormal
    """
    manifest_path = Path(path)
    manifest = _read_header(manifest_path, SLICES_FORMAT)
    entries = _field(manifest, "slices", manifest_path)
    if not isinstance(entries, list) or not entries:
        raise SliceValidationError(0, "manifest lists no slices", str(manifest_path))
    slices = []
    for index, entry in enumerate(entries):
        try:
            shape = tuple(int(s) for s in entry["shape"])
            payload = manifest_path.with_name(entry["payload"])
            data = _read_payload(payload, int(np.prod(shape)), manifest_path)
            item = LabelSlice(
                entry["origin"], entry["u"], entry["v"], tuple(entry["spacing"]),
                data.reshape(shape, order="F"),
            )
        except (KeyError, TypeError, ValueError, DimensionMismatchError) as error:
            raise SliceValidationError(index, f"malformed entry: {error}", str(manifest_path))
        try:
            item.validate(index)
        except SliceValidationError as error:
            raise SliceValidationError(index, str(error).split(": ", 1)[-1], str(manifest_path))
        slices.append(item)
    return SliceStack(tuple(slices))
