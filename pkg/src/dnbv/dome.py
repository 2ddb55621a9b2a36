"""Tessellated view hemisphere ("dome") over the target point.

Candidate camera positions are the face centres of a subdivided icosahedron,
restricted to the upper hemisphere about the workcell normal ``n`` and to
viewpoint angles ``theta <= theta_lim``.  Viewpoints are numbered 1..K in a
pole-to-equator spiral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

MAX_SUBDIVISION = 8
RING_TOLERANCE = 1e-6
HEMISPHERE_EPS = 1e-12

# Inside the 44-viewpoint window of the edge-up level-2 dome
# ([0.7115, 0.7856) rad); the vertex-up dome gives 45 viewpoints here.
DEFAULT_THETA_LIM = 0.75
DEFAULT_RADIUS = 0.7
DEFAULT_SUBDIVISION = 2

POLE_ORIENTATIONS = ("vertex", "edge")


class DomeError(ValueError):
    """Raised for an invalid or degenerate dome configuration."""


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or norm == 0.0:
        raise DomeError(f"cannot normalise vector {v!r}")
    return v / norm


def _rotation_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Smallest rotation taking unit vector ``a`` onto unit vector ``b``."""
    a = _unit(a)
    b = _unit(b)
    v = np.cross(a, b)
    s = np.linalg.norm(v)
    c = float(a @ b)
    if s < 1e-15:
        if c > 0:
            return np.eye(3)
        # antiparallel: rotate by pi about any axis orthogonal to a
        axis = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-8:
            axis = np.cross(a, [0.0, 1.0, 0.0])
        axis = _unit(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    vx = np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
    return np.eye(3) + vx + vx @ vx * ((1.0 - c) / s**2)


def azimuth_frame(n) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-handed frame (e1, e2, n); e1 is the +x meridian projected off n."""
    n = _unit(n)
    ref = np.array([1.0, 0.0, 0.0])
    e1 = ref - (ref @ n) * n
    if np.linalg.norm(e1) < 1e-8:
        ref = np.array([0.0, 1.0, 0.0])
        e1 = ref - (ref @ n) * n
    e1 = _unit(e1)
    e2 = np.cross(n, e1)
    return e1, e2, n


@dataclass(frozen=True)
class TriMesh:
    """Triangle mesh on the unit sphere with face adjacency."""

    vertices: np.ndarray
    faces: np.ndarray
    adjacency: Tuple[Tuple[int, ...], ...] = field(default=(), compare=False)

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=float).reshape(-1, 3)
        faces = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        vertices.setflags(write=False)
        faces.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)
        if not self.adjacency:
            object.__setattr__(self, "adjacency", _face_adjacency(faces))

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def edges(self) -> set:
        out = set()
        for a, b, c in self.faces:
            for u, v in ((a, b), (b, c), (c, a)):
                out.add((min(u, v), max(u, v)))
        return out

    def centroid_directions(self) -> np.ndarray:
        """Face centroids projected back onto the unit sphere."""
        c = self.vertices[self.faces].mean(axis=1)
        return c / np.linalg.norm(c, axis=1)[:, None]


def _face_adjacency(faces: np.ndarray) -> Tuple[Tuple[int, ...], ...]:
    edge_faces: Dict[Tuple[int, int], List[int]] = {}
    for fid, (a, b, c) in enumerate(faces):
        for u, v in ((a, b), (b, c), (c, a)):
            edge_faces.setdefault((min(u, v), max(u, v)), []).append(fid)
    neighbours: List[set] = [set() for _ in range(len(faces))]
    for fids in edge_faces.values():
        for f in fids:
            neighbours[f].update(g for g in fids if g != f)
    return tuple(tuple(sorted(s)) for s in neighbours)


_ICOSA_FACES = (
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
)


def build_icosahedron(n=(0.0, 0.0, 1.0), pole: str = "vertex") -> TriMesh:
    """Regular icosahedron inscribed in the unit sphere.

    ``pole="vertex"`` puts vertex 0 exactly on ``n`` (5-fold symmetry about
    ``n``).  ``pole="edge"`` keeps the textbook ``(0, +-1, +-phi)`` layout,
    whose 2-fold axis through an edge midpoint is aligned with ``n``.
    """
    if pole not in POLE_ORIENTATIONS:
        raise DomeError(f"pole must be one of {POLE_ORIENTATIONS}, got {pole!r}")
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    raw = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=float,
    )
    verts = raw / np.linalg.norm(raw, axis=1)[:, None]
    z = np.array([0.0, 0.0, 1.0])
    if pole == "vertex":
        verts = verts @ _rotation_between(verts[5], z).T
        # reorder so the polar vertex is vertex 0
        order = [5] + [i for i in range(12) if i != 5]
        remap = {old: new for new, old in enumerate(order)}
        verts = verts[order]
        faces = [tuple(remap[i] for i in f) for f in _ICOSA_FACES]
        verts[0] = z
    else:
        faces = list(_ICOSA_FACES)
    verts = verts @ _rotation_between(z, _unit(n)).T
    if pole == "vertex":
        verts[0] = _unit(n)
    return TriMesh(verts, _orient_outward(verts, np.array(faces)))


def _orient_outward(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    faces = faces.copy()
    a, b, c = (vertices[faces[:, k]] for k in range(3))
    normal = np.cross(b - a, c - a)
    flip = np.einsum("ij,ij->i", normal, a + b + c) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return faces


def subdivide(mesh: TriMesh, levels: int) -> TriMesh:
    """Split every face into four by its edge midpoints, ``levels`` times.

    Midpoints are pushed back onto the unit sphere at every level.
    """
    if levels < 0:
        raise DomeError("levels must be >= 0")
    if levels > MAX_SUBDIVISION:
        raise DomeError(f"levels > {MAX_SUBDIVISION} would overflow the face count")
    vertices = [tuple(v) for v in mesh.vertices]
    faces = [tuple(int(i) for i in f) for f in mesh.faces]
    for _ in range(levels):
        cache: Dict[Tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            idx = cache.get(key)
            if idx is None:
                m = np.add(vertices[a], vertices[b])
                m = m / np.linalg.norm(m)
                vertices.append(tuple(m))
                idx = cache[key] = len(vertices) - 1
            return idx

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    if levels == 0:
        return mesh
    return TriMesh(np.array(vertices), np.array(faces))


def restrict_hemisphere(mesh: TriMesh, n) -> TriMesh:
    """Keep faces whose centroid lies strictly above the plane normal to ``n``.

    Unused vertices are dropped and the remaining ones renumbered in order.
    """
    n = _unit(n)
    centroids = mesh.vertices[mesh.faces].mean(axis=1)
    keep = centroids @ n > HEMISPHERE_EPS
    faces = mesh.faces[keep]
    used = np.unique(faces)
    remap = np.full(len(mesh.vertices), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriMesh(mesh.vertices[used], remap[faces])


@dataclass(frozen=True)
class Viewpoint:
    index: int
    position: np.ndarray
    direction: np.ndarray
    theta: float
    face_id: int
    azimuth: float = 0.0


def _rings(thetas: np.ndarray, tol: float = RING_TOLERANCE) -> np.ndarray:
    """Band polar angles into rings: a gap larger than ``tol`` starts a new ring."""
    order = np.argsort(thetas, kind="stable")
    ring = np.empty(len(thetas), dtype=np.int64)
    current = 0
    prev = None
    for k in order:
        if prev is not None and thetas[k] - prev > tol:
            current += 1
        ring[k] = current
        prev = thetas[k]
    return ring


def spiral_index(
    mesh: TriMesh,
    n=(0.0, 0.0, 1.0),
    center=(0.0, 0.0, 0.0),
    radius: float = 1.0,
) -> List[Viewpoint]:
    """Order face centres from the pole towards the equator.

    Primary key is the polar ring, secondary the azimuth from the +x meridian
    (counter-clockwise about ``n``), then face id.
    """
    e1, e2, n = azimuth_frame(n)
    center = np.asarray(center, dtype=float)
    dirs = mesh.centroid_directions()
    thetas = np.arccos(np.clip(dirs @ n, -1.0, 1.0))
    az = np.arctan2(dirs @ e2, dirs @ e1) % (2.0 * math.pi)
    az = np.where(az > 2.0 * math.pi - 1e-9, 0.0, az)
    rings = _rings(thetas)
    face_ids = np.arange(len(dirs))
    order = np.lexsort((face_ids, np.round(az, 9), rings))
    out = []
    for k, fid in enumerate(order, start=1):
        d = dirs[fid]
        out.append(
            Viewpoint(
                index=k,
                position=center + radius * d,
                direction=d,
                theta=float(thetas[fid]),
                face_id=int(fid),
                azimuth=float(az[fid]),
            )
        )
    return out


@dataclass(frozen=True)
class Dome:
    mesh: TriMesh
    radius: float
    center: np.ndarray
    up: np.ndarray
    theta_lim: float
    spiral: Tuple[Viewpoint, ...]
    viewpoints: Tuple[Viewpoint, ...]
    subdivision_level: int
    pole: str = "vertex"

    def __post_init__(self):
        dirs = np.array([v.direction for v in self.viewpoints]).reshape(-1, 3)
        dirs.setflags(write=False)
        object.__setattr__(self, "_directions", dirs)
        object.__setattr__(
            self, "_by_index", {v.index: k for k, v in enumerate(self.viewpoints)}
        )

    def __len__(self) -> int:
        return len(self.viewpoints)

    @property
    def indices(self) -> np.ndarray:
        return np.array([v.index for v in self.viewpoints], dtype=np.int64)

    @property
    def directions(self) -> np.ndarray:
        return self._directions

    @property
    def thetas(self) -> np.ndarray:
        return np.array([v.theta for v in self.viewpoints])

    @property
    def positions(self) -> np.ndarray:
        return np.array([v.position for v in self.viewpoints]).reshape(-1, 3)

    def position_of(self, index: int) -> int:
        """Row of ``index`` in :attr:`viewpoints`."""
        try:
            return self._by_index[int(index)]
        except KeyError:
            raise DomeError(f"viewpoint {index} is not an allowed viewpoint") from None

    def viewpoint(self, index: int) -> Viewpoint:
        return self.viewpoints[self.position_of(index)]

    def __contains__(self, index) -> bool:
        return int(index) in self._by_index


def allowed_viewpoints(spiral: Sequence[Viewpoint], theta_lim: float) -> List[Viewpoint]:
    """Viewpoints with ``theta <= theta_lim``, renumbered 1..K in spiral order."""
    kept = [v for v in spiral if v.theta <= theta_lim]
    if not kept:
        raise DomeError(
            f"theta_lim={theta_lim!r} is below every face-centre angle; no viewpoints"
        )
    return [
        Viewpoint(k, v.position, v.direction, v.theta, v.face_id, v.azimuth)
        for k, v in enumerate(kept, start=1)
    ]


def build_dome(
    subdiv: int = DEFAULT_SUBDIVISION,
    radius: float = DEFAULT_RADIUS,
    theta_lim: float = DEFAULT_THETA_LIM,
    target=(0.0, 0.0, 0.0),
    up=(0.0, 0.0, 1.0),
    height: float = 0.0,
    pole: str = "vertex",
) -> Dome:
    """Build the constrained dome centred ``height`` above ``target`` along ``up``."""
    if radius <= 0:
        raise DomeError("radius must be positive")
    if not 0 < theta_lim <= math.pi / 2:
        raise DomeError(f"theta_lim must lie in (0, pi/2], got {theta_lim!r}")
    up = _unit(up)
    center = np.asarray(target, dtype=float) + height * up
    sphere = subdivide(build_icosahedron(up, pole), subdiv)
    mesh = restrict_hemisphere(sphere, up)
    spiral = spiral_index(mesh, up, center, radius)
    allowed = allowed_viewpoints(spiral, theta_lim)
    return Dome(
        mesh=mesh,
        radius=float(radius),
        center=center,
        up=up,
        theta_lim=float(theta_lim),
        spiral=tuple(spiral),
        viewpoints=tuple(allowed),
        subdivision_level=int(subdiv),
        pole=pole,
    )


def ring_table(spiral: Sequence[Viewpoint]) -> List[Tuple[float, int]]:
    """(ring angle, cumulative viewpoint count) for each polar ring."""
    thetas = np.array([v.theta for v in spiral])
    rings = _rings(thetas)
    out = []
    for r in range(rings.max() + 1 if len(rings) else 0):
        members = thetas[rings == r]
        out.append((float(members.max()), int((rings <= r).sum())))
    return out


def theta_lim_for_count(spiral: Sequence[Viewpoint], count: int) -> float:
    """Sweep ``theta_lim`` over ring angles until exactly ``count`` viewpoints remain.

    Returns the midpoint between the ring that reaches ``count`` and the next
    ring (pi/2 past the last ring).  Raises :class:`DomeError` if no ring
    boundary gives that count.
    """
    table = ring_table(spiral)
    for k, (angle, cum) in enumerate(table):
        if cum == count:
            upper = table[k + 1][0] if k + 1 < len(table) else math.pi / 2
            return 0.5 * (angle + upper)
    raise DomeError(
        f"no theta_lim yields exactly {count} viewpoints; "
        f"attainable counts are {[c for _, c in table]}"
    )


def geodesic_distance(i: int, j: int, dome: Dome) -> float:
    """Arc length in metres between allowed viewpoints ``i`` and ``j``."""
    a = dome.viewpoint(i).direction
    b = dome.viewpoint(j).direction
    return dome.radius * float(angle_between(a, b))


def angle_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Angle between vectors (broadcasting); atan2 form stays accurate near 0 and pi."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    return np.arctan2(cross, np.sum(a * b, axis=-1))


def load_permutation(path) -> Dict[int, int]:
    """Read ``spiral_index,dataset_index`` rows (header optional)."""
    mapping: Dict[int, int] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if lineno == 1 and not parts[0].lstrip("-").isdigit():
            continue
        if len(parts) != 2:
            raise DomeError(f"{path}:{lineno}: expected 2 columns, got {len(parts)}")
        try:
            src, dst = int(parts[0]), int(parts[1])
        except ValueError:
            raise DomeError(f"{path}:{lineno}: non-integer index") from None
        if src in mapping:
            raise DomeError(f"{path}:{lineno}: duplicate spiral index {src}")
        mapping[src] = dst
    return mapping


def apply_permutation(dome: Dome, mapping: Dict[int, int]) -> Dome:
    """Renumber allowed viewpoints (e.g. to match a published index layout)."""
    k = len(dome)
    if sorted(mapping) != list(range(1, k + 1)) or sorted(mapping.values()) != list(
        range(1, k + 1)
    ):
        raise DomeError(f"permutation must be a bijection on 1..{k}")
    renumbered = sorted(
        (
            Viewpoint(mapping[v.index], v.position, v.direction, v.theta, v.face_id, v.azimuth)
            for v in dome.viewpoints
        ),
        key=lambda v: v.index,
    )
    return Dome(
        mesh=dome.mesh,
        radius=dome.radius,
        center=dome.center,
        up=dome.up,
        theta_lim=dome.theta_lim,
        spiral=dome.spiral,
        viewpoints=tuple(renumbered),
        subdivision_level=dome.subdivision_level,
        pole=dome.pole,
    )


def fmt(x: float) -> str:
    return format(float(x), ".9g")


def write_face_csv(dome: Dome, path) -> None:
    lines = ["index,x,y,z,theta"]
    for v in dome.viewpoints:
        x, y, z = v.position
        lines.append(f"{v.index},{fmt(x)},{fmt(y)},{fmt(z)},{fmt(v.theta)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_obj(dome: Dome, path, faces: Optional[Iterable[Viewpoint]] = None) -> None:
    """ASCII OBJ of the dome surface; faces written in viewpoint-index order."""
    faces = list(dome.viewpoints if faces is None else faces)
    verts = dome.center + dome.radius * dome.mesh.vertices
    lines = [f"# dome r={fmt(dome.radius)} theta_lim={fmt(dome.theta_lim)}"]
    lines += [f"v {fmt(x)} {fmt(y)} {fmt(z)}" for x, y, z in verts]
    for v in sorted(faces, key=lambda v: v.index):
        a, b, c = dome.mesh.faces[v.face_id] + 1
        lines.append(f"# viewpoint {v.index}")
        lines.append(f"f {a} {b} {c}")
    Path(path).write_text("\n".join(lines) + "\n")
