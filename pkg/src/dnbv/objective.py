"""Four-term viewpoint objective: visibility, non-occlusion, dome travel, joint travel."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dome import Dome, angle_between, fmt
from .joints import JointMap, JointTableError
from .occupancy import OcclusionVector

COMPONENTS = ("vis", "nocc", "dist", "jt")
DEFAULT_M0 = 3


@dataclass(frozen=True)
class ObjectiveWeights:
    vis: float
    nocc: float
    dist: float
    jt: float

    def __post_init__(self):
        w = self.as_array()
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError(f"weights must be finite and non-negative: {w}")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}; use .normalized()")

    @classmethod
    def normalized(cls, vis: float, nocc: float, dist: float, jt: float) -> "ObjectiveWeights":
        w = np.array([vis, nocc, dist, jt], dtype=float)
        if w.sum() <= 0:
            raise ValueError("at least one weight must be positive")
        return cls(*(w / w.sum()))

    @classmethod
    def from_array(cls, w) -> "ObjectiveWeights":
        return cls.normalized(*np.asarray(w, dtype=float))

    def as_array(self) -> np.ndarray:
        return np.array([self.vis, self.nocc, self.dist, self.jt], dtype=float)

    def to_text(self) -> str:
        return "".join(f"w_{k} = {fmt(v)}\n" for k, v in zip(COMPONENTS, self.as_array()))

    @classmethod
    def from_text(cls, text: str) -> "ObjectiveWeights":
        values = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            values[key.strip().removeprefix("w_")] = float(value)
        missing = set(COMPONENTS) - set(values)
        if missing:
            raise ValueError(f"weights file lacks {sorted(missing)}")
        return cls.normalized(*(values[k] for k in COMPONENTS))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "ObjectiveWeights":
        return cls.from_text(Path(path).read_text())


# values reported for [alpha_s, alpha_d, alpha_theta] = [0.5, 1, 2]
DEFAULT_WEIGHTS = ObjectiveWeights.normalized(vis=0.238, nocc=0.080, dist=0.585, jt=0.096)


@dataclass(frozen=True)
class PlannerState:
    viewpoint_index: int
    direction: np.ndarray
    joints: np.ndarray
    occlusion: Optional[OcclusionVector] = None

    @classmethod
    def at(cls, dome: Dome, joint_map: JointMap, index: int, occlusion=None) -> "PlannerState":
        return cls(int(index), dome.viewpoint(index).direction, joint_map.config(index), occlusion)


@dataclass(frozen=True)
class ObjectiveBreakdown:
    indices: np.ndarray
    p_vis: np.ndarray
    p_nocc: np.ndarray
    p_dist: np.ndarray
    p_jt: np.ndarray
    p_total: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)

    def components(self) -> np.ndarray:
        """``(K, 4)`` matrix with columns in :data:`COMPONENTS` order."""
        return np.column_stack([self.p_vis, self.p_nocc, self.p_dist, self.p_jt])

    def row_of(self, index: int) -> int:
        hits = np.flatnonzero(self.indices == index)
        if len(hits) == 0:
            raise KeyError(index)
        return int(hits[0])

    def argmax(self) -> int:
        """Best candidate index; ties go to the lowest viewpoint index."""
        order = np.argsort(self.indices, kind="stable")
        return int(self.indices[order][np.argmax(self.p_total[order])])

    def to_csv(self) -> str:
        lines = ["index,p_vis,p_nocc,p_dist,p_jt,p_total"]
        for k in range(len(self)):
            vals = ",".join(
                fmt(x) for x in (self.p_vis[k], self.p_nocc[k], self.p_dist[k], self.p_jt[k], self.p_total[k])
            )
            lines.append(f"{self.indices[k]},{vals}")
        return "\n".join(lines) + "\n"


def _gaussian_of_angle(angles, theta_lim: float) -> np.ndarray:
    return np.exp(-0.5 * (2.0 * np.asarray(angles, dtype=float) / theta_lim) ** 2)


def p_vis(thetas, theta_lim: float, normalize: bool = True) -> np.ndarray:
    """Viewpoint-quality term; peaks straight above the target."""
    if not theta_lim > 0:
        raise ValueError("theta_lim must be positive")
    u = _gaussian_of_angle(thetas, theta_lim)
    return u / u.sum() if normalize else u


def p_nocc(counts, m0: int = DEFAULT_M0) -> np.ndarray:
    """1 where fewer than ``m0`` occluding voxels project onto the face, else 0."""
    if m0 < 1:
        raise ValueError("m0 must be >= 1")
    return (np.asarray(counts) < m0).astype(float)


def p_dist(current_direction, directions, theta_lim: float, normalize: bool = True) -> np.ndarray:
    """Dome-travel term; the scale theta_lim/2 * r cancels the radius."""
    if not theta_lim > 0:
        raise ValueError("theta_lim must be positive")
    u = _gaussian_of_angle(angle_between(np.asarray(directions), current_direction), theta_lim)
    return u / u.sum() if normalize else u


def p_jt(current_joints, joints, sigma_sq: float, normalize: bool = True) -> np.ndarray:
    """Joint-travel term with isotropic covariance ``sigma_sq * I``."""
    if not sigma_sq > 0:
        raise ValueError("sigma_sq must be positive")
    diff = np.asarray(joints, dtype=float) - np.asarray(current_joints, dtype=float)
    u = np.exp(-0.5 * np.einsum("ij,ij->i", diff, diff) / sigma_sq)
    return u / u.sum() if normalize else u


def candidate_indices(dome: Dome, joint_map: JointMap, current: Optional[int] = None) -> np.ndarray:
    """Allowed and reachable viewpoints, plus the current one, ascending."""
    idx = {int(i) for i in dome.indices if joint_map.is_reachable(i)}
    if current is not None:
        idx.add(int(current))
    return np.array(sorted(idx), dtype=np.int64)


def p_total(
    state: PlannerState,
    dome: Dome,
    joint_map: JointMap,
    weights: ObjectiveWeights,
    m0: int = DEFAULT_M0,
    candidates: Optional[Sequence[int]] = None,
) -> ObjectiveBreakdown:
    """Evaluate every term and their weighted sum over the candidate set."""
    if candidates is None:
        candidates = candidate_indices(dome, joint_map, state.viewpoint_index)
    candidates = np.asarray(candidates, dtype=np.int64)
    if len(candidates) == 0:
        raise ValueError("empty candidate set")
    rows = np.array([dome.position_of(i) for i in candidates])
    bad = [int(i) for i in candidates if not joint_map.is_reachable(i)]
    if bad:
        raise JointTableError(f"unreachable candidates {bad}")
    occlusion = state.occlusion if state.occlusion is not None else OcclusionVector.zeros(dome)
    if len(occlusion) != len(dome):
        raise ValueError("occlusion vector length does not match the dome")

    vis = p_vis(dome.thetas[rows], dome.theta_lim)
    nocc = p_nocc(occlusion.counts[rows], m0)
    dist = p_dist(state.direction, dome.directions[rows], dome.theta_lim)
    jt = p_jt(state.joints, joint_map.stack(candidates), joint_map.sigma_sq)
    comps = np.column_stack([vis, nocc, dist, jt])
    total = comps @ weights.as_array()
    return ObjectiveBreakdown(candidates, vis, nocc, dist, jt, total)
