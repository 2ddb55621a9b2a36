"""Synthetic workcell scenarios with scripted occluder blobs over the dome."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .dome import DEFAULT_RADIUS, DEFAULT_SUBDIVISION, DEFAULT_THETA_LIM, Dome, build_dome
from .joints import synth_joint_table, write_joint_table
from .objective import DEFAULT_M0, ObjectiveWeights
from .occupancy import DEFAULT_VOXEL_SIZE, GridSpec
from .ply import write_ply
from .scenario import write_gt, write_manifest, write_poses

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Blob:
    """Occluder over the dome region within ``radius`` rad of (theta, azimuth)."""

    theta: float
    azimuth: float = 0.0
    radius: float = 0.3
    density: int = 5

    def direction(self, dome: Dome) -> np.ndarray:
        from .dome import azimuth_frame

        e1, e2, n = azimuth_frame(dome.up)
        st = math.sin(self.theta)
        return st * math.cos(self.azimuth) * e1 + st * math.sin(self.azimuth) * e2 + math.cos(self.theta) * n


@dataclass
class OccluderScript:
    frames: List[List[Blob]]
    name: str = "synthetic"
    unreachable: Sequence[int] = (6, 7, 8)


def desk_script() -> OccluderScript:
    """Five key frames: top, moves left, second blob right, both to the top, merged."""
    left, right = math.pi, 0.0
    return OccluderScript(
        name="dynamic",
        frames=[
            [Blob(0.0, 0.0, 0.36)],
            [Blob(0.5, left, 0.3)],
            [Blob(0.5, left, 0.3), Blob(0.5, right, 0.3)],
            [Blob(0.3, left, 0.22), Blob(0.3, right, 0.22)],
            [Blob(0.0, 0.0, 0.42)],
        ],
    )


@dataclass
class WorkcellLayout:
    origin: tuple = (-0.8, -0.8, -DEFAULT_VOXEL_SIZE / 2)
    extents: tuple = (1.6, 1.6, 1.0)
    voxel: float = DEFAULT_VOXEL_SIZE
    table_half: float = 0.6
    table_step: float = 0.02
    sensor_positions: tuple = (
        (1.1, 1.1, 1.2), (-1.1, 1.1, 1.2), (-1.1, -1.1, 1.2), (1.1, -1.1, 1.2)
    )

    @property
    def grid(self) -> GridSpec:
        return GridSpec.from_voxel_size(self.origin, self.extents, self.voxel)


def look_at(position, target=(0.0, 0.0, 0.0), up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Sensor-to-world pose with the sensor z axis pointing at ``target``."""
    position = np.asarray(position, dtype=float)
    z = np.asarray(target, dtype=float) - position
    z /= np.linalg.norm(z)
    x = np.cross(z, up)
    if np.linalg.norm(x) < 1e-9:
        x = np.array([1.0, 0.0, 0.0])
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    pose = np.eye(4)
    pose[:3, :3] = np.column_stack([x, y, z])
    pose[:3, 3] = position
    return pose


def blob_faces(blob: Blob, dome: Dome) -> np.ndarray:
    """Hemisphere face ids whose centre lies inside the blob's angular footprint."""
    c = blob.direction(dome)
    dirs = dome.mesh.centroid_directions()
    return np.flatnonzero(np.arccos(np.clip(dirs @ c, -1.0, 1.0)) <= blob.radius)


def blob_points(blob: Blob, dome: Dome, spec: GridSpec, rng: np.random.Generator) -> np.ndarray:
    """``density`` points per covered face, each in its own voxel whose centre
    projects onto that face (checked against the nearest face centroid)."""
    centroids = dome.mesh.centroid_directions()
    out = []
    used = set()
    for fid in blob_faces(blob, dome):
        placed = 0
        for radius in rng.permutation(np.linspace(0.45, 0.92, 24)) * dome.radius:
            if placed == blob.density:
                break
            p = dome.center + radius * centroids[fid]
            idx, inside = spec.index_of(p)
            key = tuple(idx[0])
            if not inside[0] or key in used:
                continue
            q = spec.center_of(idx[0]) - dome.center
            dist = np.linalg.norm(q)
            if not (dist < dome.radius and q @ dome.up > 0):
                continue
            if int(np.argmax(centroids @ (q / dist))) != fid:
                continue
            used.add(key)
            out.append(spec.center_of(idx[0]))
            placed += 1
        if placed < blob.density:
            log.warning("face %d received only %d of %d occluder points", fid, placed, blob.density)
    return np.array(out).reshape(-1, 3)


def table_points(layout: WorkcellLayout) -> np.ndarray:
    g = np.arange(-layout.table_half, layout.table_half + 1e-9, layout.table_step)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel(), np.zeros(xx.size)])


def generate_synthetic(
    script: OccluderScript,
    out_dir,
    subdiv: int = DEFAULT_SUBDIVISION,
    radius: float = DEFAULT_RADIUS,
    theta_lim: float = DEFAULT_THETA_LIM,
    pole: str = "vertex",
    m0: int = DEFAULT_M0,
    layout: Optional[WorkcellLayout] = None,
    gt_weights: Optional[ObjectiveWeights] = None,
    seed: int = 0,
) -> Path:
    """Write PLY frames, poses, joint table and manifest; return the manifest path.

    With ``gt_weights`` the ground truth of frame 0 is produced by the planner
    itself (useful for self-consistency checks).
    """
    layout = layout or WorkcellLayout()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dome = build_dome(subdiv, radius, theta_lim, pole=pole)
    spec = layout.grid
    rng = np.random.default_rng(seed)

    poses = np.array([look_at(p) for p in layout.sensor_positions])
    write_poses(out_dir / "poses.txt", poses)
    joint_map = synth_joint_table(dome, script.unreachable)
    write_joint_table(joint_map, out_dir / "joints.csv", dome.indices)

    table = table_points(layout)
    frames = []
    for k, blobs in enumerate(script.frames):
        for b in blobs:
            if b.density < m0:
                log.warning("frame %d: blob density %d < m0=%d; faces will not register", k, b.density, m0)
        pts = [table] + [blob_points(b, dome, spec, rng) for b in blobs]
        world = np.vstack(pts)
        names = []
        for s, pose in enumerate(poses):
            part = world[s :: len(poses)]
            rot, t = pose[:3, :3], pose[:3, 3]
            local = (part - t) @ rot
            name = f"frame{k:03d}_sensor{s}.ply"
            write_ply(out_dir / name, local)
            names.append(name)
        frames.append(names)

    values: Dict[str, object] = {
        "name": script.name,
        "grid.origin": list(spec.origin),
        "grid.extents": list(spec.extents),
        "grid.resolution": [int(r) for r in spec.resolution],
        "dome.subdiv": subdiv,
        "dome.radius": format(radius, ".9g"),
        "dome.theta_lim": format(theta_lim, ".9g"),
        "dome.pole": pole,
        "m0": m0,
        "sensors": "poses.txt",
        "joints": "joints.csv",
    }
    manifest = out_dir / "scenario.txt"
    if gt_weights is not None:
        values["gt"] = "gt.csv"
        write_gt(out_dir / "gt.csv", {})
    write_manifest(manifest, values, frames)
    if gt_weights is not None:
        from .planner import PlannerConfig, next_state
        from .objective import PlannerState
        from .scenario import load_scenario

        scn = load_scenario(manifest)
        cfg = PlannerConfig(gt_weights, m0)
        m = scn.occlusion(0)
        gt = {
            s: next_state(PlannerState.at(scn.dome, scn.joint_map, s), m, scn.dome, scn.joint_map, cfg).to_index
            for s in scn.reachable_starts()
        }
        write_gt(out_dir / "gt.csv", gt)
    return manifest
