"""Per-frame voxel map (Empty / Seen / Unseen) and its projection onto the dome."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .dome import Dome, azimuth_frame

DEFAULT_VOXEL_SIZE = 0.02


class Label(IntEnum):
    EMPTY = 0
    SEEN = 1
    UNSEEN = 2


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned voxel volume; ``origin`` is the low corner of voxel (0, 0, 0)."""

    origin: tuple
    extents: tuple
    resolution: tuple

    def __post_init__(self):
        origin = tuple(float(x) for x in self.origin)
        extents = tuple(float(x) for x in self.extents)
        resolution = tuple(int(x) for x in self.resolution)
        if len(origin) != 3 or len(extents) != 3 or len(resolution) != 3:
            raise ValueError("origin, extents and resolution need 3 components")
        if min(extents) <= 0 or not np.all(np.isfinite(extents)):
            raise ValueError(f"extents must be strictly positive, got {extents}")
        if min(resolution) < 1:
            raise ValueError(f"resolution must be >= 1 per axis, got {resolution}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "resolution", resolution)

    @classmethod
    def from_voxel_size(cls, origin, extents, voxel_size: float = DEFAULT_VOXEL_SIZE):
        res = tuple(max(1, int(round(e / voxel_size))) for e in extents)
        return cls(origin, extents, res)

    @property
    def shape(self) -> tuple:
        return self.resolution

    @property
    def cell_size(self) -> np.ndarray:
        return np.asarray(self.extents) / np.asarray(self.resolution)

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.resolution
        return nx * ny * nz

    def index_of(self, points):
        """Voxel indices of ``points`` and a mask of the in-bounds ones.

        Points on the upper boundary face are clamped into the last voxel.
        """
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        rel = (points - np.asarray(self.origin)) / self.cell_size
        shape = np.asarray(self.resolution)
        inside = np.all((rel >= 0) & (rel <= shape), axis=1)
        idx = np.floor(rel).astype(np.int64)
        idx = np.minimum(idx, shape - 1)
        return idx, inside

    def center_of(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=float)
        return np.asarray(self.origin) + (idx + 0.5) * self.cell_size


@dataclass
class OccupancyGrid:
    spec: GridSpec
    labels: np.ndarray
    out_of_bounds: int = 0
    skipped_rays: int = 0

    @classmethod
    def unseen(cls, spec: GridSpec) -> "OccupancyGrid":
        return cls(spec, np.full(spec.shape, Label.UNSEEN, dtype=np.uint8))

    @property
    def seen_indices(self) -> np.ndarray:
        return np.argwhere(self.labels == Label.SEEN)

    @property
    def seen_centers(self) -> np.ndarray:
        return self.spec.center_of(self.seen_indices)

    def count(self, label: Label) -> int:
        return int(np.count_nonzero(self.labels == label))


def voxelize(points, spec: GridSpec) -> OccupancyGrid:
    """Fresh all-Unseen grid with every voxel holding a point marked Seen."""
    grid = OccupancyGrid.unseen(spec)
    idx, inside = spec.index_of(points)
    idx = idx[inside]
    grid.labels[idx[:, 0], idx[:, 1], idx[:, 2]] = Label.SEEN
    grid.out_of_bounds = int(len(inside) - np.count_nonzero(inside))
    return grid


def _clip_to_box(start, direction, lo, hi):
    """Parametric entry of segments start + t*direction, t in [0, 1], into a box."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / direction
        t_a = (lo - start) * inv
        t_b = (hi - start) * inv
    t_lo = np.where(direction == 0, -np.inf, np.minimum(t_a, t_b))
    t_hi = np.where(direction == 0, np.inf, np.maximum(t_a, t_b))
    # parallel rays outside the slab never enter
    outside = (direction == 0) & ((start < lo) | (start > hi))
    t_lo = np.where(outside, np.inf, t_lo)
    t_enter = np.maximum(0.0, t_lo.max(axis=1))
    t_exit = np.minimum(1.0, t_hi.min(axis=1))
    return t_enter, t_exit


def carve_empty(grid: OccupancyGrid, sensor_origin) -> OccupancyGrid:
    """Mark voxels on each sensor-to-Seen-voxel ray as Empty up to the first Seen hit.

    Uses an exact grid walk (Amanatides & Woo), vectorised over rays.  Only
    Unseen voxels become Empty; Seen labels are never overwritten.
    """
    spec = grid.spec
    labels = grid.labels.copy()
    seen = grid.labels == Label.SEEN
    cell = spec.cell_size
    shape = np.asarray(spec.shape)
    lo = np.asarray(spec.origin)
    hi = lo + np.asarray(spec.extents)

    start = np.asarray(sensor_origin, dtype=float).reshape(3)
    targets = grid.seen_centers
    d = targets - start
    degenerate = ~np.any(d != 0, axis=1)
    d = d[~degenerate]
    skipped = int(np.count_nonzero(degenerate))
    if len(d) == 0:
        return replace(grid, labels=labels, skipped_rays=grid.skipped_rays + skipped)

    s = np.broadcast_to(start, d.shape)
    t_enter, t_exit = _clip_to_box(s, d, lo, hi)
    live = t_enter <= t_exit
    s, d, t_enter = s[live], d[live], t_enter[live]

    entry = s + t_enter[:, None] * d
    voxel = np.clip(np.floor((entry - lo) / cell).astype(np.int64), 0, shape - 1)
    step = np.sign(d).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        boundary = lo + (voxel + (step > 0)) * cell
        t_max = np.where(d != 0, (boundary - s) / d, np.inf)
        t_delta = np.where(d != 0, cell / np.abs(d), np.inf)

    active = np.ones(len(d), dtype=bool)
    rows = np.arange(len(d))
    while True:
        r = rows[active]
        if len(r) == 0:
            break
        v = voxel[r]
        hit = seen[v[:, 0], v[:, 1], v[:, 2]]
        free = v[~hit]
        labels[free[:, 0], free[:, 1], free[:, 2]] = Label.EMPTY
        active[r[hit]] = False
        r = r[~hit]
        axis = np.argmin(t_max[r], axis=1)
        t_next = t_max[r, axis]
        done = t_next > 1.0
        active[r[done]] = False
        r, axis = r[~done], axis[~done]
        voxel[r, axis] += step[r, axis]
        t_max[r, axis] += t_delta[r, axis]
        vr = voxel[r, axis]
        gone = (vr < 0) | (vr >= shape[axis])
        active[r[gone]] = False

    # Empty never overrides Seen
    labels[seen] = Label.SEEN
    return replace(grid, labels=labels, skipped_rays=grid.skipped_rays + skipped)


def build_grid(points, spec: GridSpec, sensor_origins: Iterable = ()) -> OccupancyGrid:
    """Voxelise a fused frame and carve free space from every sensor origin."""
    grid = voxelize(points, spec)
    for origin in sensor_origins:
        grid = carve_empty(grid, origin)
    return grid


@dataclass(frozen=True)
class OcclusionVector:
    """Per-viewpoint occluder counts ``m``; entry k belongs to ``dome.viewpoints[k]``."""

    counts: np.ndarray
    indices: np.ndarray = field(default=None)
    outside: int = 0

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(counts < 0):
            raise ValueError("occlusion counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        idx = self.indices
        idx = np.arange(1, len(counts) + 1) if idx is None else np.asarray(idx, dtype=np.int64)
        if len(idx) != len(counts):
            raise ValueError("indices and counts differ in length")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.counts)

    def occluded(self, m0: int) -> np.ndarray:
        return self.counts >= m0

    @classmethod
    def zeros(cls, dome: Dome) -> "OcclusionVector":
        return cls(np.zeros(len(dome), dtype=np.int64), dome.indices)


def _vertex_faces(faces: np.ndarray, n_vertices: int) -> np.ndarray:
    inc = [[] for _ in range(n_vertices)]
    for fid, f in enumerate(faces):
        for v in f:
            inc[v].append(fid)
    width = max(len(x) for x in inc)
    out = np.full((n_vertices, width), -1, dtype=np.int64)
    for v, fs in enumerate(inc):
        out[v, : len(fs)] = fs
    return out


def project_directions(points, dome: Dome):
    """Radially project points inside the dome onto its surface.

    Returns unit directions of the projected points (dome frame origin at the
    dome centre) together with the mask of points that were inside the dome
    ball and strictly above its base plane.
    """
    e1, e2, n = azimuth_frame(dome.up)
    q = np.asarray(points, dtype=float).reshape(-1, 3) - dome.center
    dist = np.linalg.norm(q, axis=1)
    height = q @ n
    inside = (dist < dome.radius) & (height > 0)
    q, dist = q[inside], dist[inside]
    polar = np.arccos(np.clip(height[inside] / dist, -1.0, 1.0))
    azimuth = np.arctan2(q @ e2, q @ e1)
    sin_p = np.sin(polar)
    dirs = (
        (sin_p * np.cos(azimuth))[:, None] * e1
        + (sin_p * np.sin(azimuth))[:, None] * e2
        + np.cos(polar)[:, None] * n
    )
    return dirs, inside


def assign_faces(dirs: np.ndarray, dome: Dome, method: str = "local-centroid") -> np.ndarray:
    """Hemisphere face id for each projected unit direction.

    Both methods start from the three mesh vertices nearest in geodesic
    distance (largest dot product).  ``"local-centroid"`` picks, among the
    faces touching those vertices, the one with the nearest centroid.
    ``"vertex-triple"`` takes the face spanned by the three vertices, falling
    back to the globally nearest centroid when they span no face.
    """
    mesh = dome.mesh
    if len(dirs) == 0:
        return np.zeros(0, dtype=np.int64)
    centroids = mesh.centroid_directions()
    dots = dirs @ mesh.vertices.T
    if method == "local-centroid":
        # Fast path: the globally nearest centroid is also the local answer
        # whenever its face touches the nearest vertex.
        best = np.argmax(dirs @ centroids.T, axis=1)
        nearest = np.argmax(dots, axis=1)
        ok = np.any(mesh.faces[best] == nearest[:, None], axis=1)
        if ok.all():
            return best
        rest = ~ok
        best[rest] = _local_centroid(dirs[rest], dots[rest], mesh, centroids)
        return best
    near3 = np.argpartition(-dots, 2, axis=1)[:, :3]
    if method == "vertex-triple":
        lookup = {tuple(sorted(f)): fid for fid, f in enumerate(mesh.faces.tolist())}
        out = np.empty(len(dirs), dtype=np.int64)
        for k, tri in enumerate(np.sort(near3, axis=1).tolist()):
            fid = lookup.get(tuple(tri))
            out[k] = int(np.argmax(centroids @ dirs[k])) if fid is None else fid
        return out
    raise ValueError(f"unknown assignment method {method!r}")


def _local_centroid(dirs, dots, mesh, centroids) -> np.ndarray:
    """Nearest centroid among faces incident to the three nearest vertices."""
    near3 = np.argpartition(-dots, 2, axis=1)[:, :3]
    inc = _vertex_faces(mesh.faces, len(mesh.vertices))
    cand = inc[near3].reshape(len(dirs), -1)
    cdot = np.einsum("nk,nck->nc", dirs, centroids[np.maximum(cand, 0)])
    cdot = np.where(cand < 0, -np.inf, cdot)
    # ties -> lowest face id: sort candidates first
    order = np.argsort(cand, axis=1, kind="stable")
    cand = np.take_along_axis(cand, order, axis=1)
    cdot = np.take_along_axis(cdot, order, axis=1)
    return cand[np.arange(len(dirs)), np.argmax(cdot, axis=1)]


def project_to_dome(
    grid: OccupancyGrid, dome: Dome, method: str = "local-centroid"
) -> OcclusionVector:
    """Count Seen voxel centres projecting onto each allowed viewpoint's face."""
    return project_points(grid.seen_centers, dome, method)


def project_points(points, dome: Dome, method: str = "local-centroid") -> OcclusionVector:
    dirs, inside = project_directions(points, dome)
    faces = assign_faces(dirs, dome, method)
    per_face = np.bincount(faces, minlength=dome.mesh.n_faces)
    counts = per_face[[v.face_id for v in dome.viewpoints]]
    return OcclusionVector(counts, dome.indices, outside=int(len(inside) - inside.sum()))


def transform_points(points, pose) -> np.ndarray:
    """Apply a 4x4 rigid transform (sensor-to-world) to ``(N, 3)`` points."""
    pose = np.asarray(pose, dtype=float).reshape(4, 4)
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    return points @ pose[:3, :3].T + pose[:3, 3]


def observe(clouds: Sequence, poses: Sequence, spec: GridSpec, dome: Dome,
            method: str = "local-centroid", carve: bool = True):
    """Rebuild the grid from one frame's per-sensor clouds and project it."""
    world = [transform_points(c, p) for c, p in zip(clouds, poses)]
    points = np.vstack(world) if world else np.zeros((0, 3))
    origins = [np.asarray(p, dtype=float).reshape(4, 4)[:3, 3] for p in poses] if carve else []
    grid = build_grid(points, spec, origins)
    return grid, project_to_dome(grid, dome, method)
