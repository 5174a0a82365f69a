"""Minimal-collision collateral damage for SM tools.

For every query voxel x and sharp point k, the collision measure is the
number of target voxels covered by the tool placed with k at x:

    rho(x, k) = |P  n  (R(T - k) + x)|

Since R(T - k) + x = RT + (x - Rk), every rho(., k) is a shifted copy of a
single overlap field rho0(t) = |P n (RT + t)|. The fused path evaluates that
field once; the per-sharp-point path convolves for each k and serves as a
cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .access import Tool, inaccessible_region
from .gridkit import Orientation, ScalarField, VoxelGrid, conv_counts, dilate_array


@dataclass(frozen=True, eq=False)
class CmfStack:
    """Collision-measure fields per sharp point, their minimum, and the query partition."""

    fields: list[ScalarField]
    rho_min: ScalarField
    partition: list[VoxelGrid]
    sharp_points: tuple[tuple[int, int, int], ...]


class _OverlapField:
    """rho0 over the target domain padded so that x - Rk stays in range."""

    def __init__(self, target: VoxelGrid, tool: Tool, R: Orientation):
        rt = tool.rotated(R)
        self.rt = rt
        self.dims = np.asarray(target.dims)
        self.lo = np.maximum(0, rt.sharp_offsets.max(axis=0))
        hi = np.maximum(0, -rt.sharp_offsets.min(axis=0))
        padded = np.pad(target.occ, [(int(l), int(h)) for l, h in zip(self.lo, hi)])
        refl, rp = rt.reflected_tool
        self.rho0 = np.rint(conv_counts(padded, refl, rp)).astype(np.int64)
        self.padded_shape = padded.shape

    def field(self, j: int) -> np.ndarray:
        s = self.lo - self.rt.sharp_offsets[j]
        d = self.dims
        return self.rho0[s[0]:s[0] + d[0], s[1]:s[1] + d[1], s[2]:s[2] + d[2]]

    def at(self, idx: np.ndarray) -> np.ndarray:
        """rho(x_i, k_j) for query indices ``idx`` (n, 3) -> (n, m)."""
        t = idx[:, None, :] - self.rt.sharp_offsets[None, :, :] + self.lo
        return self.rho0[t[..., 0], t[..., 1], t[..., 2]]


def _sharp_index(tool: Tool, k) -> int:
    k = tuple(int(c) for c in k)
    try:
        return tool.sharp_points.index(k)
    except ValueError:
        if k in set(map(tuple, tool.active_offsets().tolist())):
            return -1
        raise ValueError(f"sharp point {k} is outside the active portion of {tool.name!r}") from None


def cmf(target: VoxelGrid, tool: Tool, R: Orientation, k) -> ScalarField:
    """rho(., k) over the target's domain, as voxel-overlap counts.

    ``k`` is an offset from the tool tip and must lie in the active portion.
    """
    j = _sharp_index(tool, k)
    if j < 0:
        # a non-listed active voxel: evaluate directly
        single = Tool(tool.name, tool.kind, tool.passive, tool.active, (tuple(int(c) for c in k),))
        return cmf(target, single, R, k)
    f = _OverlapField(target, tool, R)
    return ScalarField(f.field(j).astype(float), target.spacing, target.origin)


def _assign(f: _OverlapField, idx: np.ndarray) -> np.ndarray:
    """Index of the minimal-CMF sharp point for each query; ties go to the earliest."""
    if len(idx) == 0:
        return np.zeros(0, dtype=int)
    return np.argmin(f.at(idx), axis=1)


def assign_min_sharp(target: VoxelGrid, queries: VoxelGrid, tool: Tool,
                     R: Orientation) -> CmfStack:
    if not tool.sharp_points:
        raise ValueError(f"tool {tool.name!r} has no sharp points")
    target.check_compatible(queries)
    f = _OverlapField(target, tool, R)
    fields = [f.field(j) for j in range(len(tool.sharp_points))]
    rho_min = np.min(np.stack(fields), axis=0)
    idx = np.argwhere(queries.occ)
    choice = _assign(f, idx)
    parts = []
    for j in range(len(fields)):
        occ = np.zeros(target.dims, dtype=bool)
        sel = idx[choice == j]
        occ[sel[:, 0], sel[:, 1], sel[:, 2]] = True
        parts.append(target.like(occ))
    mk = lambda a: ScalarField(a.astype(float), target.spacing, target.origin)
    return CmfStack([mk(a) for a in fields], mk(rho_min), parts, tool.sharp_points)


def _fused(target: VoxelGrid, tool: Tool, R: Orientation, queries: VoxelGrid,
           field: _OverlapField | None) -> VoxelGrid:
    f = field if field is not None else _OverlapField(target, tool, R)
    idx = np.argwhere(queries.occ)
    if len(idx) == 0:
        return target.like(np.zeros(target.dims, dtype=bool))
    choice = _assign(f, idx)
    t = idx - f.rt.sharp_offsets[choice] + f.lo
    placements = np.zeros(f.padded_shape, dtype=bool)
    placements[t[:, 0], t[:, 1], t[:, 2]] = True
    swept = dilate_array(placements, f.rt.tool_arr, f.rt.pivot)
    d, lo = target.dims, f.lo
    swept = swept[lo[0]:lo[0] + d[0], lo[1]:lo[1] + d[1], lo[2]:lo[2] + d[2]]
    return target.like(swept & target.occ)


def _per_sharp(target: VoxelGrid, tool: Tool, R: Orientation, queries: VoxelGrid) -> VoxelGrid:
    # one convolution per sharp point, as in the textbook loop
    rt = tool.rotated(R)
    lo = np.maximum(0, rt.sharp_offsets.max(axis=0))
    hi = np.maximum(0, -rt.sharp_offsets.min(axis=0))
    pads = [(int(l), int(h)) for l, h in zip(lo, hi)]
    P = np.pad(target.occ, pads)
    remaining = np.pad(queries.occ, pads)
    refl, rp = rt.reflected_tool
    rhos = []
    for k in rt.sharp_offsets:
        # R(T - k) as a structuring element: the tool array with its pivot moved to Rk
        piv = tuple(int(v) for v in np.asarray(rt.pivot) + k)
        rpiv = tuple(d - 1 - p for d, p in zip(refl.shape, piv))
        rhos.append(np.rint(conv_counts(P, refl, rpiv)))
    rho_min = np.min(np.stack(rhos), axis=0)
    acc = np.zeros(P.shape)
    for k, rho in zip(rt.sharp_offsets, rhos):
        q = (rho == rho_min) & remaining
        piv = tuple(int(v) for v in np.asarray(rt.pivot) + k)
        acc += conv_counts(q, rt.tool_arr, piv)
        remaining &= ~q
    d = target.dims
    swept = (acc > 0.5)[lo[0]:lo[0] + d[0], lo[1]:lo[1] + d[1], lo[2]:lo[2] + d[2]]
    return target.like(swept & target.occ)


def collateral_region(obstacle: VoxelGrid, target: VoxelGrid, tool: Tool, R: Orientation,
                      queries: VoxelGrid | None = None, excess: VoxelGrid | None = None,
                      method: str = "fused", field: _OverlapField | None = None) -> VoxelGrid:
    """Target material to remove so that the query voxels become reachable.

    Without explicit ``queries`` the inaccessible region of ``obstacle`` is
    used, restricted to ``excess`` when given.
    """
    target.check_compatible(obstacle)
    if not tool.sharp_points:
        raise ValueError(f"tool {tool.name!r} has no sharp points")
    if queries is None:
        queries = inaccessible_region(obstacle, tool, R)
        if excess is not None:
            queries = queries & excess
    if method == "fused":
        return _fused(target, tool, R, queries, field)
    if method == "per_sharp":
        return _per_sharp(target, tool, R, queries)
    raise ValueError(f"unknown method {method!r}")


__all__ = ["CmfStack", "cmf", "assign_min_sharp", "collateral_region"]
