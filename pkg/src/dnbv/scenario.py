"""Scenario manifests: frames of per-sensor PLY clouds, poses, joints, ground truth.

A manifest is flat ``key = value`` text.  ``#`` starts a comment, list keys
(``frames``) repeat, and relative paths resolve against ``root`` (default:
the manifest's directory).  Keys::

    name                   required
    grid.origin            required, 3 numbers (m)
    grid.extents           required, 3 numbers (m)
    grid.resolution        3 integers; default from grid.voxel
    grid.voxel             voxel edge (m), default 0.02
    dome.subdiv            default 2
    dome.radius            default 0.7
    dome.theta_lim         default 0.75 rad
    dome.pole              vertex | edge, default vertex
    dome.height            dome centre offset above target along up, default 0
    target                 3 numbers, default 0 0 0
    up                     3 numbers, default 0 0 1
    m0                     occlusion threshold, default 3
    sensors                required, pose file (one 4x4 sensor-to-world per sensor)
    frames                 required, repeated; one PLY path per sensor
    joints                 required, joint-table CSV
    gt                     optional CSV ``start,expected``
    permutation            optional CSV ``spiral_index,dataset_index``
    root                   optional base directory for relative paths
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional

import numpy as np

from .dome import (
    DEFAULT_RADIUS,
    DEFAULT_SUBDIVISION,
    DEFAULT_THETA_LIM,
    Dome,
    apply_permutation,
    build_dome,
    load_permutation,
)
from .joints import JointMap, load_joint_table
from .objective import DEFAULT_M0
from .occupancy import DEFAULT_VOXEL_SIZE, GridSpec, OcclusionVector, observe
from .ply import read_ply

REQUIRED = ("name", "grid.origin", "grid.extents", "sensors", "frames", "joints")
KNOWN = set(REQUIRED) | {
    "grid.resolution", "grid.voxel", "dome.subdiv", "dome.radius", "dome.theta_lim",
    "dome.pole", "dome.height", "target", "up", "m0", "gt", "permutation", "root",
}
REPEATABLE = {"frames"}


class ManifestError(ValueError):
    pass


def parse_manifest(text: str, source: str = "<manifest>") -> Dict[str, list]:
    """Map each key to a list of ``(line number, raw value)`` entries."""
    entries: Dict[str, list] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ManifestError(f"{source}:{lineno}: expected 'key = value'")
        if key not in KNOWN:
            raise ManifestError(f"{source}:{lineno}: unknown key {key!r}")
        if key in entries and key not in REPEATABLE:
            raise ManifestError(f"{source}:{lineno}: duplicate key {key!r}")
        entries.setdefault(key, []).append((lineno, value))
    return entries


def load_poses(path) -> np.ndarray:
    """Read whitespace/comma separated 4x4 row-major transforms, one per sensor."""
    text = Path(path).read_text().replace(",", " ")
    nums = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        try:
            nums.extend(float(x) for x in line.split())
        except ValueError:
            raise ManifestError(f"{path}:{lineno}: malformed number") from None
    if not nums or len(nums) % 16:
        raise ManifestError(f"{path}: expected a multiple of 16 numbers, got {len(nums)}")
    poses = np.array(nums).reshape(-1, 4, 4)
    if not np.allclose(poses[:, 3], [0, 0, 0, 1]):
        raise ManifestError(f"{path}: last row of each pose must be 0 0 0 1")
    return poses


def write_poses(path, poses) -> None:
    lines = []
    for pose in np.asarray(poses, dtype=float).reshape(-1, 4, 4):
        lines += [" ".join(format(x, ".9g") for x in row) for row in pose]
    Path(path).write_text("\n".join(lines) + "\n")


def load_gt(path) -> Dict[int, int]:
    gt: Dict[int, int] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#") or line.lower().startswith("start"):
            continue
        parts = line.split(",")
        try:
            start, expected = int(parts[0]), int(parts[1])
        except (ValueError, IndexError):
            raise ManifestError(f"{path}:{lineno}: expected 'start,expected'") from None
        if start in gt:
            raise ManifestError(f"{path}:{lineno}: duplicate start {start}")
        gt[start] = expected
    return gt


def write_gt(path, gt: Dict[int, int]) -> None:
    lines = ["start,expected"] + [f"{s},{e}" for s, e in sorted(gt.items())]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class Scenario:
    name: str
    grid_spec: GridSpec
    dome: Dome
    joint_map: JointMap
    poses: np.ndarray
    frames: List[List[Path]]
    gt: Dict[int, int] = field(default_factory=dict)
    m0: int = DEFAULT_M0
    source: Optional[Path] = None
    _cache: Dict[int, OcclusionVector] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.frames)

    def frame_clouds(self, k: int) -> List[np.ndarray]:
        clouds = []
        for path in self.frames[k]:
            try:
                clouds.append(read_ply(path))
            except (OSError, ValueError) as exc:
                raise ManifestError(f"frame {k}: {exc}") from exc
        return clouds

    def occlusion(self, k: int) -> OcclusionVector:
        """Occlusion vector of frame ``k``; each frame is rebuilt from scratch."""
        if k not in self._cache:
            _, m = observe(self.frame_clouds(k), self.poses, self.grid_spec, self.dome)
            self._cache[k] = m
        return self._cache[k]

    def occlusions(self) -> Iterator[OcclusionVector]:
        for k in range(len(self.frames)):
            yield self.occlusion(k)

    def reachable_starts(self) -> List[int]:
        return [int(i) for i in self.dome.indices if self.joint_map.is_reachable(i)]


def _numbers(key, entry, count, cast=float, source="<manifest>"):
    lineno, value = entry
    parts = value.replace(",", " ").split()
    try:
        vals = [cast(p) for p in parts]
    except ValueError:
        raise ManifestError(f"{source}:{lineno}: {key}: malformed number {value!r}") from None
    if count is not None and len(vals) != count:
        raise ManifestError(f"{source}:{lineno}: {key}: expected {count} values, got {len(vals)}")
    return vals


def load_scenario(path) -> Scenario:
    path = Path(path)
    src = str(path)
    entries = parse_manifest(path.read_text(), src)
    for key in REQUIRED:
        if key not in entries:
            raise ManifestError(f"{src}: missing required key {key!r}")

    def one(key):
        return entries[key][0]

    def num(key, default, cast=float):
        if key not in entries:
            return default
        return _numbers(key, one(key), 1, cast, src)[0]

    def vec(key, default=None):
        if key not in entries:
            return default
        return _numbers(key, one(key), 3, float, src)

    root = path.parent
    if "root" in entries:
        root = (path.parent / one("root")[1]).resolve()

    def resolve(key, entry) -> Path:
        lineno, value = entry
        p = Path(value)
        p = p if p.is_absolute() else root / p
        if not p.exists():
            raise ManifestError(f"{src}:{lineno}: {key}: no such file {value!r}")
        return p

    try:
        origin, extents = vec("grid.origin"), vec("grid.extents")
        if "grid.resolution" in entries:
            res = _numbers("grid.resolution", one("grid.resolution"), 3, int, src)
            spec = GridSpec(origin, extents, res)
        else:
            spec = GridSpec.from_voxel_size(origin, extents, num("grid.voxel", DEFAULT_VOXEL_SIZE))
    except ValueError as exc:
        if isinstance(exc, ManifestError):
            raise
        raise ManifestError(f"{src}: grid: {exc}") from None

    try:
        dome = build_dome(
            subdiv=num("dome.subdiv", DEFAULT_SUBDIVISION, int),
            radius=num("dome.radius", DEFAULT_RADIUS),
            theta_lim=num("dome.theta_lim", DEFAULT_THETA_LIM),
            target=vec("target", (0.0, 0.0, 0.0)),
            up=vec("up", (0.0, 0.0, 1.0)),
            height=num("dome.height", 0.0),
            pole=one("dome.pole")[1] if "dome.pole" in entries else "vertex",
        )
        if "permutation" in entries:
            dome = apply_permutation(dome, load_permutation(resolve("permutation", one("permutation"))))
    except ValueError as exc:
        if isinstance(exc, ManifestError):
            raise
        raise ManifestError(f"{src}: dome: {exc}") from None

    poses = load_poses(resolve("sensors", one("sensors")))
    frames = []
    for entry in entries["frames"]:
        lineno, value = entry
        paths = [resolve("frames", (lineno, p)) for p in shlex.split(value.replace(",", " "))]
        if len(paths) != len(poses):
            raise ManifestError(
                f"{src}:{lineno}: frames: {len(paths)} clouds for {len(poses)} sensors"
            )
        frames.append(paths)

    joint_map = load_joint_table(resolve("joints", one("joints")))
    gt = load_gt(resolve("gt", one("gt"))) if "gt" in entries else {}
    for start, expected in gt.items():
        for idx in (start, expected):
            if idx not in dome:
                raise ManifestError(
                    f"{src}:{one('gt')[0]}: gt index {idx} is outside the {len(dome)} allowed viewpoints"
                )
    m0 = num("m0", DEFAULT_M0, int)
    if m0 < 1:
        raise ManifestError(f"{src}:{one('m0')[0]}: m0 must be >= 1")
    return Scenario(one("name")[1], spec, dome, joint_map, poses, frames, gt, m0, path)


def write_manifest(path, values: Dict[str, object], frames: List[List[str]]) -> None:
    """Write a manifest; sequences are space-joined, ``frames`` one line each."""
    lines = []
    for key, value in values.items():
        if isinstance(value, (list, tuple, np.ndarray)):
            value = " ".join(format(float(v), ".9g") if not isinstance(v, (int, np.integer)) else str(v)
                             for v in value)
        lines.append(f"{key} = {value}")
    lines += [f"frames = {' '.join(f)}" for f in frames]
    Path(path).write_text("\n".join(lines) + "\n")
