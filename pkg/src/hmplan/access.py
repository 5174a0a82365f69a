"""Translational C-space obstacles and accessible/inaccessible regions.

The world outside the obstacle grid's domain is treated as empty: a tool may
stick out of the domain (a holder above the part, a cutter reaching a
boundary voxel from outside) without colliding with anything.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .gridkit import Orientation, VoxelGrid, dilate_array, GridMismatchError

AM = "am"
SM = "sm"


@dataclass(frozen=True, eq=False)
class Tool:
    """An AM or SM tool T = H u K.

    ``passive`` (H) and ``active`` (K) are aligned by their pivots, which both
    mark the tool tip. ``sharp_points`` are offsets from the tip, ordered;
    their order is the tie-break priority for collateral analysis.
    """

    name: str
    kind: str
    passive: VoxelGrid
    active: VoxelGrid | None = None
    sharp_points: tuple[tuple[int, int, int], ...] = ()

    def __post_init__(self):
        if self.kind not in (AM, SM):
            raise ValueError(f"tool kind must be 'am' or 'sm', got {self.kind!r}")
        if self.active is not None and self.active.spacing != self.passive.spacing:
            raise GridMismatchError(
                f"tool {self.name!r}: spacing mismatch between passive ({self.passive.spacing}) "
                f"and active ({self.active.spacing})")
        pts = tuple(tuple(int(c) for c in p) for p in self.sharp_points)
        object.__setattr__(self, "sharp_points", pts)
        if self.kind == SM:
            if not pts:
                raise ValueError(f"SM tool {self.name!r} needs at least one sharp point")
            active = set(map(tuple, self.active_offsets().tolist()))
            missing = [p for p in pts if p not in active]
            if missing:
                raise ValueError(f"sharp points {missing} lie outside the active portion of {self.name!r}")
            if len(set(pts)) != len(pts):
                raise ValueError(f"duplicate sharp points in {self.name!r}")

    @property
    def spacing(self) -> float:
        return self.passive.spacing

    def active_offsets(self) -> np.ndarray:
        if self.active is None:
            return np.zeros((1, 3), dtype=int)
        return self.active.offsets()

    def tool_offsets(self) -> np.ndarray:
        both = np.vstack([self.passive.offsets(), self.active_offsets()])
        return np.unique(both, axis=0)

    def rotated(self, R: Orientation) -> "RotatedTool":
        return _rotated(self, R.index)

    def __repr__(self):
        return f"Tool({self.name!r}, {self.kind})"


@dataclass(frozen=True, eq=False)
class RotatedTool:
    """Dense arrays of RT and RK in a shared frame with the tip at ``pivot``."""

    tool_arr: np.ndarray
    active_arr: np.ndarray
    pivot: tuple[int, int, int]
    active_offsets: np.ndarray
    sharp_offsets: np.ndarray = field(repr=False)

    @property
    def reflected_tool(self) -> tuple[np.ndarray, tuple[int, int, int]]:
        arr = self.tool_arr[::-1, ::-1, ::-1]
        return arr, tuple(d - 1 - p for d, p in zip(arr.shape, self.pivot))

    def active_margin(self) -> tuple[np.ndarray, np.ndarray]:
        """Padding (lo, hi) so that every translation whose RK meets the domain is represented."""
        lo = np.maximum(0, self.active_offsets.max(axis=0))
        hi = np.maximum(0, -self.active_offsets.min(axis=0))
        return lo, hi

    def active_is_tip(self) -> bool:
        return len(self.active_offsets) == 1 and not self.active_offsets.any()


@lru_cache(maxsize=256)
def _rotated_cached(tool: Tool, r_index: int) -> RotatedTool:
    R = Orientation(r_index)
    t_off = R.apply(tool.tool_offsets())
    k_off = R.apply(tool.active_offsets())
    s_off = R.apply(np.asarray(tool.sharp_points, dtype=int).reshape(-1, 3))
    lo = np.minimum(t_off.min(axis=0), 0)
    hi = np.maximum(t_off.max(axis=0), 0)
    dims = tuple(int(v) for v in hi - lo + 1)
    tool_arr = np.zeros(dims, dtype=bool)
    active_arr = np.zeros(dims, dtype=bool)
    ti, ki = t_off - lo, k_off - lo
    tool_arr[ti[:, 0], ti[:, 1], ti[:, 2]] = True
    active_arr[ki[:, 0], ki[:, 1], ki[:, 2]] = True
    return RotatedTool(tool_arr, active_arr, tuple(int(v) for v in -lo), k_off, s_off)


def _rotated(tool: Tool, r_index: int) -> RotatedTool:
    # Tool hashes by identity, so the cache is keyed per tool object
    return _rotated_cached(tool, r_index)


def _obstacle_array(obstacle: VoxelGrid, extra: VoxelGrid | None) -> np.ndarray:
    if extra is None:
        return obstacle.occ
    obstacle.check_compatible(extra)
    return obstacle.occ | extra.occ


def _padded_free(obs: np.ndarray, rt: RotatedTool):
    lo, hi = rt.active_margin()
    padded = np.pad(obs, [(int(l), int(h)) for l, h in zip(lo, hi)])
    refl, rp = rt.reflected_tool
    cobs = dilate_array(padded, refl, rp)
    return ~cobs, lo


def _crop(arr: np.ndarray, lo, dims) -> np.ndarray:
    return arr[lo[0]:lo[0] + dims[0], lo[1]:lo[1] + dims[1], lo[2]:lo[2] + dims[2]]


def cspace_obstacle(obstacle: VoxelGrid, tool: Tool, R: Orientation,
                    extra: VoxelGrid | None = None) -> VoxelGrid:
    """Tool-tip translations (within the domain) at which RT overlaps the obstacle.

    This is O (+) (-RT), i.e. the dilation of O by the reflected rotated tool.
    """
    rt = tool.rotated(R)
    refl, rp = rt.reflected_tool
    return obstacle.like(dilate_array(_obstacle_array(obstacle, extra), refl, rp))


def accessible_region(obstacle: VoxelGrid, tool: Tool, R: Orientation,
                      extra: VoxelGrid | None = None) -> VoxelGrid:
    """Voxels touched by sweeping RK along collision-free translations of RT.

    The result is clamped to the obstacle's complement.
    """
    if tool.spacing != obstacle.spacing:
        raise GridMismatchError(f"spacing mismatch: tool {tool.spacing} vs grid {obstacle.spacing}")
    obs = _obstacle_array(obstacle, extra)
    rt = tool.rotated(R)
    free, lo = _padded_free(obs, rt)
    if not rt.active_is_tip():
        free = dilate_array(free, rt.active_arr, rt.pivot)
    return obstacle.like(_crop(free, lo, obs.shape) & ~obs)


def inaccessible_region(obstacle: VoxelGrid, tool: Tool, R: Orientation,
                        extra: VoxelGrid | None = None) -> VoxelGrid:
    """Free voxels that the tool cannot touch: O^c - A."""
    acc = accessible_region(obstacle, tool, R, extra)
    obs = _obstacle_array(obstacle, extra)
    return obstacle.like(~obs & ~acc.occ)


__all__ = ["AM", "SM", "Tool", "RotatedTool", "cspace_obstacle", "accessible_region",
           "inaccessible_region"]
