"""Zero-overhang support analysis.

For a build orientation R, gravity points along -R e_z in the workpiece
frame. ``max_self_supported`` keeps the voxels whose whole column down to the
build plate is material; ``min_self_supported`` adds the shadow of every
voxel down to the plate.

The default plate is the domain's bottom voxel layer along R e_z, so voxels
in that layer have height 0 and rest on the plate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gridkit import Orientation, ScalarField, VoxelGrid, conv_counts


class BelowPlateError(ValueError):
    pass


@dataclass(frozen=True)
class BuildFrame:
    orientation: Orientation
    plate_point: tuple[float, float, float] | None = None

    @property
    def up(self) -> np.ndarray:
        return self.orientation.up

    def plate_for(self, grid: VoxelGrid) -> np.ndarray:
        if self.plate_point is not None:
            return np.asarray(self.plate_point, dtype=float)
        axis, sign = _axis_sign(self.up)
        idx = (np.asarray(grid.dims) - 1) / 2.0
        idx[axis] = 0 if sign > 0 else grid.dims[axis] - 1
        return np.asarray(grid.origin) + idx * grid.spacing


def _axis_sign(up: np.ndarray) -> tuple[int, int]:
    axis = int(np.flatnonzero(up)[0])
    return axis, int(up[axis])


def height_field(frame: BuildFrame, domain: VoxelGrid) -> ScalarField:
    """(x - x_B) . (R e_z) at every voxel center."""
    h = domain.centers() @ frame.up.astype(float) - frame.plate_for(domain) @ frame.up
    return ScalarField(h, domain.spacing, domain.origin)


def _to_columns(arr: np.ndarray, up: np.ndarray) -> np.ndarray:
    """View with the build axis last, increasing index = upwards."""
    axis, sign = _axis_sign(up)
    out = np.moveaxis(arr, axis, -1)
    return out if sign > 0 else out[..., ::-1]


def _from_columns(cols: np.ndarray, up: np.ndarray) -> np.ndarray:
    axis, sign = _axis_sign(up)
    if sign < 0:
        cols = cols[..., ::-1]
    return np.ascontiguousarray(np.moveaxis(cols, -1, axis))


def _plate_layer(shape: VoxelGrid, frame: BuildFrame) -> int:
    """Index of the plate layer in column coordinates; occupied voxels below it are an error."""
    h = _to_columns(height_field(frame, shape).values, frame.up)
    layer_h = h[(0,) * (h.ndim - 1)]
    eps = shape.spacing
    p = int(np.rint(-layer_h[0] / eps))
    cols = _to_columns(shape.occ, frame.up)
    below = cols[..., :max(p, 0)]
    if below.any():
        raise BelowPlateError(f"{int(below.sum())} occupied voxel(s) lie below the build plate")
    return p


def max_self_supported(shape: VoxelGrid, frame: BuildFrame) -> VoxelGrid:
    """Voxels of ``shape`` whose column down to the plate is entirely material."""
    p = _plate_layer(shape, frame)
    cols = _to_columns(shape.occ, frame.up)
    out = np.zeros_like(cols)
    # a plate below the domain leaves an empty gap under every column
    if 0 <= p < cols.shape[-1]:
        out[..., p:] = np.logical_and.accumulate(cols[..., p:], axis=-1)
    return shape.like(_from_columns(out, frame.up))


def min_self_supported(shape: VoxelGrid, frame: BuildFrame) -> VoxelGrid:
    """``shape`` plus every voxel above the plate that has material somewhere above it."""
    p = _plate_layer(shape, frame)
    cols = _to_columns(shape.occ, frame.up)
    out = np.logical_or.accumulate(cols[..., ::-1], axis=-1)[..., ::-1].copy()
    out[..., :max(p, 0)] = False
    return shape.like(_from_columns(out, frame.up))


def _column_element(frame: BuildFrame, length: int, upward: bool) -> tuple[np.ndarray, tuple]:
    """One-voxel-thick half column from the origin along +/- R e_z, as (array, pivot)."""
    up = frame.up
    axis, sign = _axis_sign(up)
    shape = [1, 1, 1]
    shape[axis] = length
    arr = np.ones(shape, dtype=bool)
    pointing_positive = (sign > 0) == upward
    pivot = [0, 0, 0]
    pivot[axis] = 0 if pointing_positive else length - 1
    return arr, tuple(pivot)


def max_self_supported_conv(shape: VoxelGrid, frame: BuildFrame) -> VoxelGrid:
    """Convolution form of :func:`max_self_supported`, kept for cross-validation.

    Convolving with an upward half column counts material at and below x;
    x qualifies when that count matches its height above the plate.
    """
    _plate_layer(shape, frame)
    axis, _ = _axis_sign(frame.up)
    n = shape.dims[axis]
    col, piv = _column_element(frame, n, upward=True)
    count = conv_counts(shape.occ, col, piv)
    h = height_field(frame, shape).values
    eps = shape.spacing
    ok = np.abs(count * eps - (h + eps)) < eps / 2
    return shape.like(shape.occ & ok)


def min_self_supported_conv(shape: VoxelGrid, frame: BuildFrame) -> VoxelGrid:
    """Convolution form of :func:`min_self_supported`: material at or above x, above the plate."""
    _plate_layer(shape, frame)
    axis, _ = _axis_sign(frame.up)
    n = shape.dims[axis]
    col, piv = _column_element(frame, n, upward=False)
    count = conv_counts(shape.occ, col, piv)
    h = height_field(frame, shape).values
    return shape.like((count > 0.5) & (h > -shape.spacing / 2))


def is_self_supported(shape: VoxelGrid, frame: BuildFrame, base: VoxelGrid | None = None) -> bool:
    """Every voxel rests on the plate or on a voxel of ``shape`` (or ``base``) directly below."""
    p = _plate_layer(shape, frame)
    cols = _to_columns(shape.occ, frame.up)
    below = np.zeros_like(cols)
    below[..., 1:] = cols[..., :-1]
    if base is not None:
        b = _to_columns(base.occ, frame.up)
        below[..., 1:] |= b[..., :-1]
    on_plate = np.zeros_like(cols)
    if 0 <= p < cols.shape[-1]:
        on_plate[..., p] = True
    return not np.any(cols & ~below & ~on_plate)


__all__ = ["BuildFrame", "BelowPlateError", "height_field", "max_self_supported",
           "min_self_supported", "max_self_supported_conv", "min_self_supported_conv",
           "is_self_supported"]
