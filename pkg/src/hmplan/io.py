"""Grid files (HMVX), tool descriptions (JSON) and plan export."""

from __future__ import annotations

import json
import struct
from pathlib import Path

from .access import AM, SM, Tool
from .gridkit import VoxelGrid, pack_bits, unpack_bits
from .shapes import exposed_boundary

MAGIC = b"HMVX"
VERSION = 1
_HEADER = struct.Struct("<4sI3Id3d3I")


class GridFormatError(ValueError):
    pass


class BadMagicError(GridFormatError):
    pass


class VersionMismatchError(GridFormatError):
    pass


class TruncatedPayloadError(GridFormatError):
    pass


class ToolFileError(ValueError):
    pass


def grid_to_bytes(grid: VoxelGrid) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, *grid.dims, grid.spacing, *grid.origin, *grid.pivot)
    return header + pack_bits(grid.occ)


def grid_from_bytes(data: bytes) -> VoxelGrid:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"bad magic: expected {MAGIC!r}, got {bytes(data[:4])!r}")
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(f"truncated header: {len(data)} of {_HEADER.size} bytes")
    _, version, nx, ny, nz, spacing, ox, oy, oz, px, py, pz = _HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionMismatchError(f"version mismatch: file has {version}, reader supports {VERSION}")
    need = (nx * ny * nz + 7) // 8
    payload = data[_HEADER.size:]
    if len(payload) < need:
        raise TruncatedPayloadError(f"truncated payload: {len(payload)} of {need} bytes")
    occ = unpack_bits(payload[:need], (nx, ny, nz))
    return VoxelGrid(occ, spacing, (ox, oy, oz), (px, py, pz))


def write_grid(grid: VoxelGrid, path) -> None:
    Path(path).write_bytes(grid_to_bytes(grid))


def read_grid(path) -> VoxelGrid:
    return grid_from_bytes(Path(path).read_bytes())


def load_tool(path) -> Tool:
    """Load a tool description; grid paths are relative to the JSON file."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"tool file not found: {path}")
    try:
        spec = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ToolFileError(f"{path}: invalid JSON ({exc})") from None
    for key in ("name", "kind", "passive"):
        if key not in spec:
            raise ToolFileError(f"{path}: missing field {key!r}")
    kind = str(spec["kind"]).lower()
    if kind not in (AM, SM):
        raise ToolFileError(f"{path}: kind must be 'am' or 'sm', got {spec['kind']!r}")
    base = path.parent
    passive = read_grid(base / spec["passive"])
    active = read_grid(base / spec["active"]) if spec.get("active") else None
    if active is not None and active.spacing != passive.spacing:
        raise ToolFileError(f"{path}: spacing mismatch between passive ({passive.spacing}) "
                            f"and active ({active.spacing})")
    sharp = spec.get("sharp_points", "auto")
    if sharp == "auto":
        points = exposed_boundary(passive, active) if kind == SM else []
    else:
        # file coordinates index the active grid (or the passive grid for a tip-only AM tool)
        ref = active if active is not None else passive
        points = [tuple(int(c) - p for c, p in zip(v, ref.pivot)) for v in sharp]
    if kind == SM and active is None:
        active = VoxelGrid.from_voxels((1, 1, 1), [(0, 0, 0)], passive.spacing, pivot=(0, 0, 0))
        if sharp == "auto":
            points = [(0, 0, 0)]
    if kind == SM and not points:
        raise ToolFileError(f"{path}: SM tool {spec['name']!r} has no sharp points")
    return Tool(spec["name"], kind, passive, active, tuple(points))


def save_tool(tool: Tool, path) -> None:
    """Write a tool JSON plus its HMVX grids next to it."""
    path = Path(path)
    stem = path.with_suffix("")
    write_grid(tool.passive, stem.with_name(stem.name + ".passive.hmvx"))
    active = None
    if tool.active is not None:
        active = stem.name + ".active.hmvx"
        write_grid(tool.active, stem.with_name(active))
    ref = tool.active if tool.active is not None else tool.passive
    spec = {
        "name": tool.name,
        "kind": tool.kind,
        "passive": stem.name + ".passive.hmvx",
        "active": active,
        "sharp_points": [[c + p for c, p in zip(k, ref.pivot)] for k in tool.sharp_points],
    }
    path.write_text(json.dumps(spec, indent=2) + "\n")


__all__ = ["MAGIC", "VERSION", "GridFormatError", "BadMagicError", "VersionMismatchError",
           "TruncatedPayloadError", "ToolFileError", "grid_to_bytes", "grid_from_bytes",
           "write_grid", "read_grid", "load_tool", "save_tool"]
