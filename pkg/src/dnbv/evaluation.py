"""Ground-truth comparison of single next-view decisions and dome exports."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from .dome import Dome, fmt, write_obj
from .joints import joint_distance
from .objective import PlannerState
from .occupancy import OcclusionVector
from .planner import Decision, PlannerConfig, next_state

JOINT_LIMIT = "joint-limit"
JOINT_FLIP = "joint-flip"
OTHER = "other"
FLIP_RATIO = 2.0


@dataclass(frozen=True)
class Mismatch:
    scenario: str
    start: int
    expected: int
    chosen: int
    reason: str
    expected_joint_distance: Optional[float]
    chosen_joint_distance: float
    decision: Decision = field(repr=False, compare=False, default=None)


@dataclass
class EvalReport:
    total: int = 0
    matches: int = 0
    mismatches: List[Mismatch] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        return self.matches / self.total if self.total else 1.0

    def by_reason(self) -> dict:
        out = {JOINT_LIMIT: 0, JOINT_FLIP: 0, OTHER: 0}
        for m in self.mismatches:
            out[m.reason] += 1
        return out

    def to_text(self) -> str:
        reasons = self.by_reason()
        lines = [
            f"total: {self.total}",
            f"matches: {self.matches}",
            f"mismatches: {len(self.mismatches)}",
        ] + [f"{k}: {v}" for k, v in reasons.items()]
        return "\n".join(lines) + "\n"

    def mismatches_csv(self) -> str:
        lines = ["scenario,start,expected,chosen,reason,expected_joint_distance,chosen_joint_distance"]
        for m in self.mismatches:
            ej = "" if m.expected_joint_distance is None else fmt(m.expected_joint_distance)
            lines.append(
                f"{m.scenario},{m.start},{m.expected},{m.chosen},{m.reason},{ej},{fmt(m.chosen_joint_distance)}"
            )
        return "\n".join(lines) + "\n"


def classify(decision: Decision, expected: int, joint_map, state: PlannerState) -> tuple:
    """Reason class for a decision that disagrees with ``expected``.

    Unreachable ground truth is a joint-limit case; a ground truth whose joint
    move exceeds ``FLIP_RATIO`` times the chosen move is a joint-flip case.
    """
    if not joint_map.is_reachable(expected):
        return JOINT_LIMIT, None
    exp_jd = joint_distance(state.joints, joint_map.config(expected))
    if exp_jd > FLIP_RATIO * decision.joint_moved:
        return JOINT_FLIP, exp_jd
    return OTHER, exp_jd


def evaluate(scenarios, config: Optional[PlannerConfig] = None, frame: int = 0) -> EvalReport:
    """Run one decision per reachable start on ``frame`` of each scenario and compare to GT."""
    report = EvalReport()
    for scn in scenarios:
        if not scn.gt:
            continue
        cfg = config or PlannerConfig(m0=scn.m0)
        m = scn.occlusion(frame)
        for start in scn.reachable_starts():
            if start not in scn.gt:
                continue
            expected = scn.gt[start]
            state = PlannerState.at(scn.dome, scn.joint_map, start)
            decision = next_state(state, m, scn.dome, scn.joint_map, cfg)
            report.total += 1
            if decision.to_index == expected:
                report.matches += 1
                continue
            reason, exp_jd = classify(decision, expected, scn.joint_map, state)
            report.mismatches.append(
                Mismatch(scn.name, start, expected, decision.to_index, reason, exp_jd, decision.joint_moved, decision)
            )
    return report


def occlusion_csv(m: OcclusionVector, m0: int) -> str:
    lines = ["index,count,occluded"]
    for idx, c in zip(m.indices, m.counts):
        lines.append(f"{int(idx)},{int(c)},{int(c >= m0)}")
    return "\n".join(lines) + "\n"


def export_dome_occlusion(m: OcclusionVector, dome: Dome, path, m0: int = 3) -> tuple:
    """Write an OBJ of the allowed faces and a sidecar CSV ``index,count,occluded``.

    Returns the two written paths.
    """
    if len(m) != len(dome):
        raise ValueError("occlusion vector length does not match the dome")
    path = Path(path)
    obj = path if path.suffix == ".obj" else path.with_suffix(".obj")
    csv = obj.with_suffix(".csv")
    write_obj(dome, obj)
    csv.write_text(occlusion_csv(m, m0))
    return obj, csv
