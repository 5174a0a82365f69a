"""Parametric tools and desk-scale parts used by the tests and the demo job."""

from __future__ import annotations

import numpy as np

from .access import AM, SM, Tool
from .gridkit import VoxelGrid

_NEIGHBORS = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]])


def exposed_boundary(passive: VoxelGrid, active: VoxelGrid | None) -> list[tuple[int, int, int]]:
    """Active voxels with a face neighbour outside the whole tool, as tip offsets in (z, y, x) order."""
    if active is None:
        return [(0, 0, 0)]
    k = {tuple(v) for v in active.offsets().tolist()}
    whole = k | {tuple(v) for v in passive.offsets().tolist()}
    out = [v for v in k if any(tuple(np.add(v, n)) not in whole for n in _NEIGHBORS)]
    return sorted(out, key=lambda v: (v[2], v[1], v[0]))


def _box_offsets(lo, hi):
    return np.array([(x, y, z) for x in range(lo[0], hi[0] + 1)
                     for y in range(lo[1], hi[1] + 1) for z in range(lo[2], hi[2] + 1)])


def _grid_from_offsets(offsets, spacing=1.0) -> VoxelGrid:
    offsets = np.asarray(offsets).reshape(-1, 3)
    lo = np.minimum(offsets.min(axis=0), 0)
    hi = np.maximum(offsets.max(axis=0), 0)
    occ = np.zeros(tuple(hi - lo + 1), dtype=bool)
    idx = offsets - lo
    occ[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    return VoxelGrid(occ, spacing, pivot=tuple(int(v) for v in -lo))


def point_tool(kind: str = SM, name: str | None = None, spacing: float = 1.0) -> Tool:
    """A one-voxel tool: H = K = the tip."""
    g = _grid_from_offsets([(0, 0, 0)], spacing)
    return Tool(name or f"point-{kind}", kind, g, g if kind == SM else None,
                ((0, 0, 0),) if kind == SM else ())


def end_mill(width: int = 3, cutter_length: int = 3, shank_length: int = 12,
             holder_width: int | None = None, holder_length: int = 0,
             name: str = "end-mill", spacing: float = 1.0) -> Tool:
    """Flat square-section end mill pointing down (-z), tip at the bottom center.

    The cutter (active part) is the bottom ``cutter_length`` layers; shank and
    optional wider holder sit above it.
    """
    lo = -((width - 1) // 2)
    hi = width // 2
    cutter = _box_offsets((lo, lo, 0), (hi, hi, cutter_length - 1))
    parts = [_box_offsets((lo, lo, cutter_length), (hi, hi, cutter_length + shank_length - 1))]
    if holder_length:
        hw = holder_width or width + 4
        hlo, hhi = -((hw - 1) // 2), hw // 2
        z0 = cutter_length + shank_length
        parts.append(_box_offsets((hlo, hlo, z0), (hhi, hhi, z0 + holder_length - 1)))
    passive = _grid_from_offsets(np.vstack(parts), spacing)
    active = _grid_from_offsets(cutter, spacing)
    return Tool(name, SM, passive, active, tuple(exposed_boundary(passive, active)))


def nozzle(length: int = 10, body_width: int = 3, tip_length: int = 2,
           name: str = "nozzle", spacing: float = 1.0) -> Tool:
    """Print head pointing down: a one-voxel tip column under a square body."""
    lo, hi = -((body_width - 1) // 2), body_width // 2
    tip = _box_offsets((0, 0, 0), (0, 0, tip_length - 1))
    body = _box_offsets((lo, lo, tip_length), (hi, hi, length - 1))
    return Tool(name, AM, _grid_from_offsets(np.vstack([tip, body]), spacing), None, ())


# -- parts ---------------------------------------------------------------------


def box(dims, lo, hi, spacing: float = 1.0) -> VoxelGrid:
    """Solid box occupying index range [lo, hi) inside a ``dims`` domain."""
    occ = np.zeros(tuple(dims), dtype=bool)
    occ[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = True
    return VoxelGrid(occ, spacing)


def union(*grids: VoxelGrid) -> VoxelGrid:
    out = grids[0]
    for g in grids[1:]:
        out = out | g
    return out


def table(dims=(12, 12, 8), top_z=3, top_thickness=1, leg=True) -> VoxelGrid:
    """Slab floating at ``top_z`` over an empty region, with an optional corner leg."""
    nx, ny, nz = dims
    top = box(dims, (2, 2, top_z), (nx - 2, ny - 2, top_z + top_thickness))
    if not leg:
        return top
    return top | box(dims, (2, 2, 0), (4, 4, top_z))


def staircase(dims=(12, 6, 10), steps=4, tread=2, rise=2, floating=2) -> VoxelGrid:
    """Stepped block resting on the plate; tread number ``floating`` is lifted off its riser."""
    occ = np.zeros(tuple(dims), dtype=bool)
    for i in range(steps):
        x0 = 1 + i * tread
        z_top = (i + 1) * rise
        z_lo = 0 if i != floating else z_top - 1
        occ[x0:x0 + tread, 1:dims[1] - 1, z_lo:z_top] = True
    return VoxelGrid(occ)


def slotted_wall(dims=(10, 8, 8), slot_x=4, height=6):
    """(target, input): two walls with a one-voxel slot; the input fills the slot."""
    nx, ny, nz = dims
    block = box(dims, (1, 0, 0), (nx - 1, ny, height))
    slot = box(dims, (slot_x, 0, 1), (slot_x + 1, ny, height))
    return block - slot, block


def block_minus_half(dims=(6, 6, 3)):
    """(target, input): a 4x4x1 block on the plate and its left 2x4x1 half."""
    block = box(dims, (1, 1, 0), (5, 5, 1))
    half = box(dims, (1, 1, 0), (3, 5, 1))
    return half, block


def pocketed_plate(dims=(16, 16, 10), pocket=(5, 5, 3), depth=3, thickness=6):
    """(target, input): a plate with an open rectangular pocket, and the solid plate."""
    nx, ny, _ = dims
    plate = box(dims, (2, 2, 0), (nx - 2, ny - 2, thickness))
    x0, y0 = (nx - pocket[0]) // 2, (ny - pocket[1]) // 2
    hole = box(dims, (x0, y0, thickness - depth), (x0 + pocket[0], y0 + pocket[1], thickness))
    return plate - hole, plate


def bracket(n: int = 64) -> VoxelGrid:
    """L-shaped support bracket: a post on the plate with a thick cantilevered arm.

    The arm leaves a gap under it that is half the arm's thickness, so the
    sacrificial support it needs is half the arm's volume.
    """
    s = n / 64.0
    r = lambda v: int(round(v * s))
    dims = (n, n, n)
    post = box(dims, (r(8), r(8), 0), (r(24), r(40), r(24)))
    arm = box(dims, (r(24), r(8), r(8)), (r(48), r(40), r(24)))
    return post | arm


__all__ = ["exposed_boundary", "point_tool", "end_mill", "nozzle", "box", "union", "table",
           "staircase", "slotted_wall", "block_minus_half", "pocketed_plate", "bracket"]
