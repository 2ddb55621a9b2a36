"""Per-frame inference of the next viewpoint and replay over a frame sequence."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

import numpy as np

from .dome import Dome, angle_between, fmt
from .joints import JointMap, joint_distance
from .objective import (
    DEFAULT_M0,
    DEFAULT_WEIGHTS,
    ObjectiveBreakdown,
    ObjectiveWeights,
    PlannerState,
    p_total,
)
from .occupancy import OcclusionVector

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlannerConfig:
    weights: ObjectiveWeights = DEFAULT_WEIGHTS
    m0: int = DEFAULT_M0


@dataclass(frozen=True)
class Decision:
    from_index: int
    to_index: int
    breakdown: ObjectiveBreakdown
    geodesic_moved: float
    joint_moved: float
    angle_to: float
    all_occluded: bool = False

    @property
    def moved(self) -> bool:
        return self.to_index != self.from_index

    def to_record(self) -> str:
        """Flat ``key: value`` text record of the decision."""
        fields = [
            ("from_index", self.from_index),
            ("to_index", self.to_index),
            ("moved", int(self.moved)),
            ("geodesic_moved", fmt(self.geodesic_moved)),
            ("joint_moved", fmt(self.joint_moved)),
            ("angle_to", fmt(self.angle_to)),
            ("p_total", fmt(self.breakdown.p_total[self.breakdown.row_of(self.to_index)])),
            ("all_occluded", int(self.all_occluded)),
        ]
        return "".join(f"{k}: {v}\n" for k, v in fields)


def next_state(
    state: PlannerState,
    occlusion: OcclusionVector,
    dome: Dome,
    joint_map: JointMap,
    config: PlannerConfig = PlannerConfig(),
) -> Decision:
    """Enumerate allowed, reachable viewpoints and return the objective's argmax."""
    state = PlannerState(state.viewpoint_index, state.direction, state.joints, occlusion)
    bd = p_total(state, dome, joint_map, config.weights, config.m0)
    best = bd.argmax()
    all_occluded = not np.any(bd.p_nocc > 0)
    if all_occluded:
        log.warning("every candidate viewpoint is occluded; keeping the best anyway")
    to_vp = dome.viewpoint(best)
    return Decision(
        from_index=state.viewpoint_index,
        to_index=best,
        breakdown=bd,
        geodesic_moved=dome.radius * float(angle_between(state.direction, to_vp.direction)),
        joint_moved=joint_distance(state.joints, joint_map.config(best)),
        angle_to=to_vp.theta,
        all_occluded=all_occluded,
    )


@dataclass
class Trajectory:
    decisions: List[Decision] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.decisions)

    def __iter__(self):
        return iter(self.decisions)

    @property
    def path(self) -> List[int]:
        if not self.decisions:
            return []
        return [self.decisions[0].from_index] + [d.to_index for d in self.decisions]

    @property
    def jumps(self) -> int:
        return sum(d.moved for d in self.decisions)

    def to_csv(self) -> str:
        lines = ["frame,from,to,geodesic_moved,joint_moved,all_occluded"]
        for k, d in enumerate(self.decisions):
            lines.append(
                f"{k},{d.from_index},{d.to_index},{fmt(d.geodesic_moved)},"
                f"{fmt(d.joint_moved)},{int(d.all_occluded)}"
            )
        return "\n".join(lines) + "\n"


def run_sequence(
    occlusions: Iterable[OcclusionVector],
    start_index: int,
    dome: Dome,
    joint_map: JointMap,
    config: PlannerConfig = PlannerConfig(),
) -> Trajectory:
    """One decision per frame; the state's joints come from the table."""
    if start_index not in dome or not joint_map.is_reachable(start_index):
        raise ValueError(f"start viewpoint {start_index} is not allowed and reachable")
    state = PlannerState.at(dome, joint_map, start_index)
    traj = Trajectory()
    for m in occlusions:
        decision = next_state(state, m, dome, joint_map, config)
        traj.decisions.append(decision)
        state = PlannerState.at(dome, joint_map, decision.to_index)
    return traj


def replay(scenario, start_index: int, config: Optional[PlannerConfig] = None) -> Trajectory:
    """Replay a scenario: rebuild and project every frame, then decide.

    ``scenario`` needs ``dome``, ``joint_map``, ``m0`` and ``occlusions()``
    (see :class:`dnbv.scenario.Scenario`).
    """
    if config is None:
        config = PlannerConfig(m0=scenario.m0)
    return run_sequence(scenario.occlusions(), start_index, scenario.dome, scenario.joint_map, config)
