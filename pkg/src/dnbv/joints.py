"""Robot joint configurations per viewpoint and the joint-space variance."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional

import numpy as np

N_JOINTS = 6
HEADER = ["index"] + [f"j{k}" for k in range(1, N_JOINTS + 1)] + ["reachable"]


class JointTableError(ValueError):
    pass


class DegenerateJointMap(JointTableError):
    """Joint distances have zero variance, so the joint term is undefined."""


def as_joint_config(values) -> np.ndarray:
    j = np.asarray(values, dtype=float).reshape(-1)
    if j.shape != (N_JOINTS,):
        raise JointTableError(f"a joint config has {N_JOINTS} angles, got {j.shape[0]}")
    if not np.all(np.isfinite(j)):
        raise JointTableError("joint angles must be finite")
    return j


def joint_distance(a, b) -> float:
    """Euclidean norm of the joint displacement (no angle wrapping)."""
    return float(np.linalg.norm(np.asarray(b, dtype=float) - np.asarray(a, dtype=float)))


def compute_sigma_sq(configs: Mapping[int, np.ndarray]) -> float:
    """Population variance of all pairwise joint distances."""
    if len(configs) < 3:
        raise DegenerateJointMap(
            f"need at least 3 reachable configs for the joint variance, got {len(configs)}"
        )
    keys = sorted(configs)
    dists = np.array([joint_distance(configs[a], configs[b]) for a, b in combinations(keys, 2)])
    var = float(np.var(dists))
    # relative floor: rounding noise on equal distances is not real spread
    if not var > 1e-12 * float(np.mean(dists)) ** 2:
        raise DegenerateJointMap("joint distances have zero variance")
    return var


@dataclass(frozen=True)
class JointMap:
    """Viewpoint index -> joint config; missing indices are unreachable."""

    configs: Dict[int, np.ndarray]
    sigma_sq: float
    unreachable: frozenset = frozenset()

    @classmethod
    def from_configs(cls, configs: Mapping[int, Iterable[float]], unreachable=()):
        cfg = {int(k): as_joint_config(v) for k, v in configs.items()}
        return cls(cfg, compute_sigma_sq(cfg), frozenset(int(u) for u in unreachable))

    @property
    def reachable(self) -> list:
        return sorted(self.configs)

    def is_reachable(self, index: int) -> bool:
        return int(index) in self.configs

    def config(self, index: int) -> np.ndarray:
        try:
            return self.configs[int(index)]
        except KeyError:
            raise JointTableError(f"viewpoint {index} is unreachable") from None

    def stack(self, indices) -> np.ndarray:
        return np.array([self.config(i) for i in indices]).reshape(-1, N_JOINTS)


def load_joint_table(path) -> JointMap:
    """Parse ``index,j1..j6,reachable`` CSV.  Unreachable rows may leave joints blank."""
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        raise JointTableError(f"{path}: empty joint table")
    reader = csv.reader(text.splitlines())
    header = [h.strip() for h in next(reader)]
    if header != HEADER:
        raise JointTableError(f"{path}:1: expected header {','.join(HEADER)}")
    configs: Dict[int, np.ndarray] = {}
    seen = set()
    unreachable = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != len(HEADER):
            raise JointTableError(f"{path}:{lineno}: expected {len(HEADER)} fields, got {len(row)}")
        try:
            index = int(row[0])
            reachable = int(row[-1])
        except ValueError:
            raise JointTableError(f"{path}:{lineno}: malformed index or reachable flag") from None
        if reachable not in (0, 1):
            raise JointTableError(f"{path}:{lineno}: reachable must be 0 or 1")
        if index in seen:
            raise JointTableError(f"{path}:{lineno}: duplicate index {index}")
        seen.add(index)
        if not reachable:
            unreachable.add(index)
            continue
        try:
            configs[index] = as_joint_config([float(x) for x in row[1:-1]])
        except ValueError as exc:
            raise JointTableError(f"{path}:{lineno}: {exc}") from None
    if not seen:
        raise JointTableError(f"{path}: no rows")
    try:
        sigma_sq = compute_sigma_sq(configs)
    except DegenerateJointMap as exc:
        raise DegenerateJointMap(f"{path}: {exc}") from None
    return JointMap(configs, sigma_sq, frozenset(unreachable))


def write_joint_table(joint_map: JointMap, path, indices: Optional[Iterable[int]] = None) -> None:
    listed = set() if indices is None else {int(i) for i in indices}
    indices = sorted(listed | set(joint_map.configs) | set(joint_map.unreachable))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for i in indices:
            if joint_map.is_reachable(i):
                w.writerow([i] + [format(x, ".9g") for x in joint_map.config(i)] + [1])
            else:
                w.writerow([i] + [""] * N_JOINTS + [0])


def synth_joint_table(dome, unreachable=(6, 7, 8)) -> JointMap:
    """Smooth, plausible UR-style joint angles for each allowed viewpoint.

    Base rotation follows the viewpoint azimuth wrapped to (-pi, pi], so
    crossing the -x meridian costs a near-full base turn (an arm flip).
    Shoulder, elbow and wrist angles vary linearly with elevation.
    """
    unreachable = {int(u) for u in unreachable}
    configs = {}
    for v in dome.viewpoints:
        if v.index in unreachable:
            continue
        base = math.atan2(math.sin(v.azimuth), math.cos(v.azimuth))
        t = v.theta
        configs[v.index] = np.array(
            [
                base,
                -math.pi / 2 + 1.1 * t,
                1.4 * t,
                -math.pi / 2 - 0.5 * t,
                -math.pi / 2,
                0.3 * t,
            ]
        )
    return JointMap.from_configs(configs, unreachable & {v.index for v in dome.viewpoints})
