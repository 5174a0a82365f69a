"""Triangle-mesh input and center-sampled ray-parity voxelization."""

from __future__ import annotations

import struct
from collections import Counter
from pathlib import Path

import numpy as np

from .gridkit import VoxelGrid


class MeshError(ValueError):
    pass


class DegenerateTriangleError(MeshError):
    pass


class OpenMeshError(MeshError):
    def __init__(self, edges):
        self.edges = edges
        shown = ", ".join(f"{a}-{b}" for a, b in edges[:10])
        more = f" (+{len(edges) - 10} more)" if len(edges) > 10 else ""
        super().__init__(f"mesh is not watertight: {len(edges)} open edge(s) between vertices "
                         f"{shown}{more}")


class ZeroExtentError(MeshError):
    pass


def _parse_ascii(text: str) -> np.ndarray:
    verts = []
    for line in text.splitlines():
        parts = line.split()
        if parts and parts[0] == "vertex":
            verts.append([float(v) for v in parts[1:4]])
    if not verts or len(verts) % 3:
        raise MeshError(f"ASCII mesh has {len(verts)} vertices, not a multiple of 3")
    return np.asarray(verts, dtype=float).reshape(-1, 3, 3)


def _parse_binary(data: bytes) -> np.ndarray:
    if len(data) < 84:
        raise MeshError("binary mesh shorter than its 84-byte header")
    (n,) = struct.unpack_from("<I", data, 80)
    if len(data) < 84 + 50 * n:
        raise MeshError(f"binary mesh truncated: {n} triangles declared, "
                        f"{(len(data) - 84) // 50} present")
    rec = np.dtype([("normal", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
    tris = np.frombuffer(data, dtype=rec, count=n, offset=84)
    return tris["v"].astype(float)


def read_mesh(path) -> np.ndarray:
    """Triangles as an (n, 3, 3) array from an ASCII or binary STL file."""
    data = Path(path).read_bytes()
    if len(data) >= 84:
        (n,) = struct.unpack_from("<I", data, 80)
        if len(data) == 84 + 50 * n:
            return _parse_binary(data)
    if data.lstrip()[:5].lower() == b"solid":
        return _parse_ascii(data.decode("ascii", errors="replace"))
    return _parse_binary(data)


def write_mesh(triangles, path, binary: bool = True) -> None:
    tris = np.asarray(triangles, dtype=float).reshape(-1, 3, 3)
    normals = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    normals /= np.maximum(np.linalg.norm(normals, axis=1, keepdims=True), 1e-300)
    if binary:
        rec = np.zeros(len(tris), dtype=[("normal", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
        rec["normal"], rec["v"] = normals, tris
        Path(path).write_bytes(b"\0" * 80 + struct.pack("<I", len(tris)) + rec.tobytes())
        return
    lines = ["solid mesh"]
    for n, t in zip(normals, tris):
        lines.append(f"  facet normal {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}")
        lines.append("    outer loop")
        lines += [f"      vertex {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}" for v in t]
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append("endsolid mesh")
    Path(path).write_text("\n".join(lines) + "\n")


def _weld(tris: np.ndarray) -> np.ndarray:
    """Vertex ids per triangle corner, merging exactly coincident positions."""
    _, inv = np.unique(tris.reshape(-1, 3), axis=0, return_inverse=True)
    return inv.reshape(-1, 3)


def check_mesh(tris: np.ndarray) -> None:
    """Raise on degenerate triangles, zero extent, or edges not shared by exactly two faces."""
    if len(tris) == 0:
        raise ZeroExtentError("mesh has no triangles")
    extent = np.ptp(tris.reshape(-1, 3), axis=0)
    if np.any(extent <= 0):
        raise ZeroExtentError(f"mesh has zero extent along some axis: {extent.tolist()}")
    area2 = np.linalg.norm(np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1)
    bad = np.flatnonzero(area2 <= 1e-12 * extent.max() ** 2)
    if bad.size:
        raise DegenerateTriangleError(f"{bad.size} degenerate triangle(s), first at index {bad[0]}")
    ids = _weld(tris)
    edges = Counter()
    for a, b, c in ids.tolist():
        for u, v in ((a, b), (b, c), (c, a)):
            edges[(min(u, v), max(u, v))] += 1
    open_edges = sorted(e for e, n in edges.items() if n != 2)
    if open_edges:
        raise OpenMeshError(open_edges)


def voxelize(tris, resolution: int, check: bool = True) -> VoxelGrid:
    """Occupancy of voxel centers inside the closed mesh.

    The longest bounding-box edge spans ``resolution`` voxels. Each center
    casts a ray along +z and is inside when it crosses the surface an odd
    number of times, so triangle winding does not matter. Rays are nudged by a
    tiny irrational offset in x and y so they never graze an edge or vertex of
    a mesh built on the voxel lattice.
    """
    tris = np.asarray(tris, dtype=float).reshape(-1, 3, 3)
    if resolution < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    if check:
        check_mesh(tris)
    lo = tris.reshape(-1, 3).min(axis=0)
    extent = np.ptp(tris.reshape(-1, 3), axis=0)
    eps = float(extent.max()) / resolution
    dims = np.maximum(np.ceil(extent / eps - 1e-9).astype(int), 1)
    origin = lo + 0.5 * eps
    nudge = eps * np.array([np.sqrt(2.0), np.sqrt(3.0)]) * 1e-7
    # hits[ix, iy, k]: surface crossings with exactly k voxel centers below them
    hits = np.zeros((dims[0], dims[1], dims[2] + 1), dtype=np.int64)
    ax = tris[:, :, 0] - origin[0] - nudge[0]
    ay = tris[:, :, 1] - origin[1] - nudge[1]
    az = tris[:, :, 2] - origin[2]
    for t in range(len(tris)):
        x, y, z = ax[t], ay[t], az[t]
        i0 = max(int(np.ceil(x.min() / eps)), 0)
        i1 = min(int(np.floor(x.max() / eps)), dims[0] - 1)
        j0 = max(int(np.ceil(y.min() / eps)), 0)
        j1 = min(int(np.floor(y.max() / eps)), dims[1] - 1)
        if i0 > i1 or j0 > j1:
            continue
        px, py = np.meshgrid(np.arange(i0, i1 + 1) * eps, np.arange(j0, j1 + 1) * eps, indexing="ij")
        d = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0])
        if d == 0:
            continue  # vertical facet: parallel to the rays
        l1 = ((px - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (py - y[0])) / d
        l2 = ((x[1] - x[0]) * (py - y[0]) - (px - x[0]) * (y[1] - y[0])) / d
        l0 = 1.0 - l1 - l2
        inside = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
        if not inside.any():
            continue
        zc = l0 * z[0] + l1 * z[1] + l2 * z[2]
        k = np.clip(np.ceil(zc / eps), 0, dims[2]).astype(np.int64)
        ii, jj = np.nonzero(inside)
        np.add.at(hits, (ii + i0, jj + j0, k[ii, jj]), 1)
    # hits strictly above center k = all hits with index > k
    above = hits[..., ::-1].cumsum(axis=-1)[..., ::-1][..., 1:]
    occ = (above % 2 == 1)
    return VoxelGrid(occ, eps, tuple(float(v) for v in origin))


def box_mesh(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Closed axis-aligned box, 12 outward-wound triangles."""
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    v = np.array([[x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
                  [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1]], dtype=float)
    faces = [(0, 2, 1), (0, 3, 2), (4, 5, 6), (4, 6, 7), (0, 1, 5), (0, 5, 4),
             (1, 2, 6), (1, 6, 5), (2, 3, 7), (2, 7, 6), (3, 0, 4), (3, 4, 7)]
    return v[np.array(faces)]


def sphere_mesh(radius: float = 1.0, center=(0.0, 0.0, 0.0), subdivisions: int = 4) -> np.ndarray:
    """Geodesic sphere from a subdivided octahedron (vertices on the sphere)."""
    v = [np.array(p, dtype=float) for p in
         [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]]
    faces = [(0, 2, 4), (2, 1, 4), (1, 3, 4), (3, 0, 4), (2, 0, 5), (1, 2, 5), (3, 1, 5), (0, 3, 5)]
    tris = np.array([[v[a], v[b], v[c]] for a, b, c in faces])
    for _ in range(subdivisions):
        a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
        ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
        tris = np.concatenate([np.stack(t, axis=1) for t in
                               ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))])
        tris /= np.linalg.norm(tris, axis=2, keepdims=True)
    return tris * radius + np.asarray(center, dtype=float)


__all__ = ["MeshError", "DegenerateTriangleError", "OpenMeshError", "ZeroExtentError",
           "read_mesh", "write_mesh", "check_mesh", "voxelize", "box_mesh", "sphere_mesh"]
