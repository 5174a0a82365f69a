"""Voxel solid kernel.

Grids are dense boolean numpy arrays indexed ``[ix, iy, iz]``. Every grid
carries a *pivot* voxel: the lattice origin used by rotations, reflections
and when the grid acts as a structuring element. For tools the pivot is the
tool tip; for workpiece grids it defaults to the domain center.

Morphology is computed through FFT convolution of indicator arrays and a
count threshold of 0.5 (overlap counts are integers, so the threshold is
maximally robust to round-off).
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import signal

THRESHOLD = 0.5


class GridMismatchError(ValueError):
    """Raised when two grids do not share shape metadata."""


class DomainOverflowError(ValueError):
    """Raised when a lattice motion would push content outside the domain."""


def _default_pivot(dims: Sequence[int]) -> tuple[int, int, int]:
    return tuple(int(d) // 2 for d in dims)  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Boolean occupancy over a uniform lattice.

    ``origin`` is the world coordinate of the center of voxel ``(0, 0, 0)``
    and ``spacing`` the voxel edge length.
    """

    occ: np.ndarray
    spacing: float = 1.0
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    pivot: tuple[int, int, int] | None = None

    def __post_init__(self):
        occ = np.array(self.occ, dtype=bool, copy=True)
        if occ.ndim != 3 or min(occ.shape) < 1:
            raise ValueError(f"occupancy must be a non-empty 3D array, got shape {occ.shape}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        occ.setflags(write=False)
        object.__setattr__(self, "occ", occ)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        pivot = _default_pivot(occ.shape) if self.pivot is None else tuple(int(v) for v in self.pivot)
        object.__setattr__(self, "pivot", pivot)

    # -- construction -------------------------------------------------------

    @classmethod
    def empty(cls, dims, spacing=1.0, origin=(0.0, 0.0, 0.0), pivot=None) -> "VoxelGrid":
        return cls(np.zeros(tuple(dims), dtype=bool), spacing, origin, pivot)

    @classmethod
    def from_voxels(cls, dims, voxels: Iterable[Sequence[int]], spacing=1.0,
                    origin=(0.0, 0.0, 0.0), pivot=None) -> "VoxelGrid":
        occ = np.zeros(tuple(dims), dtype=bool)
        for v in voxels:
            occ[tuple(v)] = True
        return cls(occ, spacing, origin, pivot)

    def like(self, occ: np.ndarray) -> "VoxelGrid":
        """New grid with this grid's metadata and the given occupancy."""
        return VoxelGrid(occ, self.spacing, self.origin, self.pivot)

    # -- queries ------------------------------------------------------------

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.occ.shape  # type: ignore[return-value]

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.occ))

    def voxels(self) -> set[tuple[int, int, int]]:
        return {tuple(int(c) for c in v) for v in np.argwhere(self.occ)}

    def offsets(self) -> np.ndarray:
        """Occupied voxel coordinates relative to the pivot, shape (n, 3)."""
        return np.argwhere(self.occ) - np.asarray(self.pivot)

    def centers(self) -> np.ndarray:
        """World coordinates of all voxel centers, shape dims + (3,)."""
        idx = np.indices(self.dims, dtype=float)
        return np.moveaxis(idx, 0, -1) * self.spacing + np.asarray(self.origin)

    def same_shape(self, other: "VoxelGrid") -> bool:
        return (self.dims == other.dims and self.spacing == other.spacing
                and self.origin == other.origin)

    def check_compatible(self, other: "VoxelGrid") -> None:
        for name in ("dims", "spacing", "origin"):
            if getattr(self, name) != getattr(other, name):
                raise GridMismatchError(
                    f"{name} mismatch: {getattr(self, name)} vs {getattr(other, name)}")

    def __eq__(self, other):
        if not isinstance(other, VoxelGrid):
            return NotImplemented
        return self.same_shape(other) and bool(np.array_equal(self.occ, other.occ))

    def __hash__(self):
        return hash((self.dims, self.spacing, self.origin, self.occ.tobytes()))

    def __repr__(self):
        return f"VoxelGrid(dims={self.dims}, count={self.count}, spacing={self.spacing})"

    # -- Boolean algebra ----------------------------------------------------

    def __or__(self, other):
        return boolean_combine(self, other, "union")

    def __and__(self, other):
        return boolean_combine(self, other, "intersect")

    def __sub__(self, other):
        return boolean_combine(self, other, "difference")

    def __invert__(self):
        return complement(self)

    def issubset(self, other: "VoxelGrid") -> bool:
        self.check_compatible(other)
        return not np.any(self.occ & ~other.occ)

    def isdisjoint(self, other: "VoxelGrid") -> bool:
        self.check_compatible(other)
        return not np.any(self.occ & other.occ)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values over the same kind of lattice as :class:`VoxelGrid`."""

    values: np.ndarray
    spacing: float = 1.0
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def dims(self):
        return self.values.shape

    def rounded(self) -> np.ndarray:
        return np.rint(self.values).astype(np.int64)


# -- orientations -------------------------------------------------------------


def _enumerate_rotations() -> list[np.ndarray]:
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            m = np.zeros((3, 3), dtype=int)
            for row, (col, s) in enumerate(zip(perm, signs)):
                m[row, col] = s
            if round(np.linalg.det(m)) == 1:
                mats.append(m)
    return mats


_ROTATIONS = _enumerate_rotations()


@dataclass(frozen=True)
class Orientation:
    """One of the 24 axis-aligned rotations; ``index`` is its canonical id."""

    index: int

    def __post_init__(self):
        if not 0 <= self.index < 24:
            raise ValueError(f"orientation index must be in [0, 24), got {self.index}")

    @property
    def matrix(self) -> np.ndarray:
        return _ROTATIONS[self.index].copy()

    @classmethod
    def identity(cls) -> "Orientation":
        return cls(0)

    @classmethod
    def from_matrix(cls, m) -> "Orientation":
        m = np.rint(np.asarray(m)).astype(int)
        for i, r in enumerate(_ROTATIONS):
            if np.array_equal(r, m):
                return cls(i)
        raise ValueError(f"not a cardinal rotation:\n{m}")

    @classmethod
    def about(cls, axis: str, quarter_turns: int) -> "Orientation":
        """Right-handed rotation by ``quarter_turns`` * 90 degrees about x, y or z."""
        q = quarter_turns % 4
        c, s = [1, 0, -1, 0][q], [0, 1, 0, -1][q]
        i = "xyz".index(axis)
        j, k = (i + 1) % 3, (i + 2) % 3
        m = np.zeros((3, 3), dtype=int)
        m[i, i] = 1
        m[j, j], m[j, k] = c, -s
        m[k, j], m[k, k] = s, c
        return cls.from_matrix(m)

    @classmethod
    def all(cls) -> list["Orientation"]:
        return [cls(i) for i in range(24)]

    def __matmul__(self, other: "Orientation") -> "Orientation":
        return Orientation.from_matrix(self.matrix @ other.matrix)

    def inverse(self) -> "Orientation":
        return Orientation.from_matrix(self.matrix.T)

    def apply(self, vectors) -> np.ndarray:
        """Rotate integer row vectors."""
        return np.asarray(vectors) @ self.matrix.T

    @property
    def up(self) -> np.ndarray:
        """Build direction R e_z."""
        return self.matrix[:, 2].copy()


# -- Boolean operations -------------------------------------------------------


def boolean_combine(a: VoxelGrid, b: VoxelGrid, mode: str) -> VoxelGrid:
    a.check_compatible(b)
    if mode == "union":
        occ = a.occ | b.occ
    elif mode == "intersect":
        occ = a.occ & b.occ
    elif mode == "difference":
        occ = a.occ & ~b.occ
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return a.like(occ)


def complement(a: VoxelGrid) -> VoxelGrid:
    return a.like(~a.occ)


def volume(a: VoxelGrid) -> float:
    return a.count * a.spacing ** 3


# -- lattice rigid motions ----------------------------------------------------


def _place(grid: VoxelGrid, new_idx: np.ndarray, dims, pivot, clip: bool) -> VoxelGrid:
    inside = np.all((new_idx >= 0) & (new_idx < np.asarray(dims)), axis=1)
    if not clip and not np.all(inside):
        raise DomainOverflowError(
            f"{int(np.count_nonzero(~inside))} voxel(s) leave the {tuple(dims)} domain; pad first")
    occ = np.zeros(tuple(dims), dtype=bool)
    kept = new_idx[inside]
    occ[kept[:, 0], kept[:, 1], kept[:, 2]] = True
    return VoxelGrid(occ, grid.spacing, grid.origin, pivot)


def rotate_cardinal(a: VoxelGrid, R: Orientation, fit: bool = False) -> VoxelGrid:
    """Rotate occupied voxels by ``R`` about the pivot.

    With ``fit=True`` the domain is reallocated to the rotated bounding box
    (the pivot moves with it); this is how tool grids are rotated. Otherwise
    the domain is kept and content that leaves it raises
    :class:`DomainOverflowError`.
    """
    if fit:
        m = R.matrix
        dims = np.abs(m) @ np.asarray(a.dims)
        # map the box corners to find the new index of the pivot
        hi = np.asarray(a.dims) - 1
        corners = np.array(list(itertools.product(*[(0, h) for h in hi])))
        rc = (corners - a.pivot) @ m.T
        lo = rc.min(axis=0)
        new_pivot = tuple(int(v) for v in -lo)
        new_idx = (np.argwhere(a.occ) - a.pivot) @ m.T - lo
        return _place(a, new_idx, dims, new_pivot, clip=False)
    new_idx = R.apply(np.argwhere(a.occ) - a.pivot) + a.pivot
    return _place(a, new_idx, a.dims, a.pivot, clip=False)


def reflect_origin(a: VoxelGrid, fit: bool = False) -> VoxelGrid:
    """Point reflection x -> -x about the pivot."""
    if fit:
        occ = a.occ[::-1, ::-1, ::-1]
        pivot = tuple(d - 1 - p for d, p in zip(a.dims, a.pivot))
        return VoxelGrid(occ, a.spacing, a.origin, pivot)
    new_idx = 2 * np.asarray(a.pivot) - np.argwhere(a.occ)
    return _place(a, new_idx, a.dims, a.pivot, clip=False)


def translate_lattice(a: VoxelGrid, t: Sequence[int], clip: bool = False) -> VoxelGrid:
    t = np.asarray([int(v) for v in t])
    return _place(a, np.argwhere(a.occ) + t, a.dims, a.pivot, clip=clip)


# -- convolution and morphology ---------------------------------------------


def _check_spacing(a: VoxelGrid, b: VoxelGrid) -> None:
    if a.spacing != b.spacing:
        raise GridMismatchError(f"spacing mismatch: {a.spacing} vs {b.spacing}")


def conv_counts(a: np.ndarray, b: np.ndarray, b_pivot: Sequence[int]) -> np.ndarray:
    """Sum_j a(i - (j - b_pivot)) b(j) for every index i of ``a``.

    ``scipy.signal.fftconvolve`` in ``full`` mode zero-pads both operands,
    so there is no circular wrap-around; the result is cropped back to
    ``a``'s index range.
    """
    if not a.any() or not b.any():
        return np.zeros(a.shape)
    full = signal.fftconvolve(a.astype(np.float64), b.astype(np.float64), mode="full")
    p = [int(v) for v in b_pivot]
    return full[p[0]:p[0] + a.shape[0], p[1]:p[1] + a.shape[1], p[2]:p[2] + a.shape[2]]


def _is_point(b: VoxelGrid) -> bool:
    return b.count == 1 and bool(b.occ[b.pivot])


def convolve_indicator(a: VoxelGrid, b: VoxelGrid) -> ScalarField:
    """Voxel-overlap counts of ``a`` convolved with structuring element ``b``."""
    _check_spacing(a, b)
    return ScalarField(conv_counts(a.occ, b.occ, b.pivot), a.spacing, a.origin)


def dilate_array(a: np.ndarray, b: np.ndarray, b_pivot) -> np.ndarray:
    if b.sum() == 1 and b[tuple(b_pivot)]:
        return a.copy()
    return conv_counts(a, b, b_pivot) > THRESHOLD


def erode_array(a: np.ndarray, b: np.ndarray, b_pivot) -> np.ndarray:
    """{x | x + (b - pivot) is contained in a}; voxels outside ``a`` count as empty."""
    n = int(b.sum())
    if n == 0:
        return np.ones_like(a, dtype=bool)
    rb = b[::-1, ::-1, ::-1]
    rp = [d - 1 - p for d, p in zip(b.shape, b_pivot)]
    return conv_counts(a, rb, rp) > n - THRESHOLD


def dilate(a: VoxelGrid, b: VoxelGrid) -> VoxelGrid:
    """Minkowski sum of ``a`` with ``b`` (offsets relative to ``b``'s pivot), cropped to ``a``."""
    _check_spacing(a, b)
    if _is_point(b):
        return a
    return a.like(dilate_array(a.occ, b.occ, b.pivot))


def erode(a: VoxelGrid, b: VoxelGrid) -> VoxelGrid:
    """Minkowski difference: voxels x with x + b inside ``a``."""
    _check_spacing(a, b)
    if _is_point(b):
        return a
    return a.like(erode_array(a.occ, b.occ, b.pivot))


# -- packing helpers used by IO and hashing -------------------------------


def pack_bits(occ: np.ndarray) -> bytes:
    """x-fastest, LSB-first bit packing."""
    return np.packbits(occ.ravel(order="F"), bitorder="little").tobytes()


def unpack_bits(data: bytes, dims) -> np.ndarray:
    n = int(np.prod(dims))
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little", count=n)
    return bits.astype(bool).reshape(tuple(dims), order="F")


def digest(a: VoxelGrid) -> bytes:
    return hashlib.blake2b(pack_bits(a.occ), digest_size=16).digest()


def pad_grid(a: VoxelGrid, lo: Sequence[int], hi: Sequence[int]) -> VoxelGrid:
    """Zero-pad ``a``; the origin shifts so world positions are preserved."""
    occ = np.pad(a.occ, [(int(l), int(h)) for l, h in zip(lo, hi)])
    origin = tuple(o - l * a.spacing for o, l in zip(a.origin, lo))
    pivot = tuple(p + int(l) for p, l in zip(a.pivot, lo))
    return VoxelGrid(occ, a.spacing, origin, pivot)


__all__ = [
    "THRESHOLD", "VoxelGrid", "ScalarField", "Orientation", "GridMismatchError",
    "DomainOverflowError", "boolean_combine", "complement", "volume", "rotate_cardinal",
    "reflect_origin", "translate_lattice", "convolve_indicator", "dilate", "erode",
    "conv_counts", "dilate_array", "erode_array", "pack_bits", "unpack_bits", "digest",
    "pad_grid",
]
