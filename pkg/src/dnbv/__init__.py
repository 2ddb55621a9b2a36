"""Dynamic next-best-view planning on a tessellated dome over a robot workcell."""

from .dome import Dome, DomeError, Viewpoint, build_dome, geodesic_distance
from .joints import JointMap, load_joint_table, synth_joint_table
from .objective import DEFAULT_WEIGHTS, ObjectiveWeights, PlannerState, p_total
from .occupancy import GridSpec, Label, OccupancyGrid, OcclusionVector, carve_empty, project_to_dome, voxelize
from .planner import Decision, PlannerConfig, Trajectory, next_state, replay, run_sequence
from .scenario import Scenario, load_scenario
from .training import DEFAULT_ALPHAS, ScoringWeights, cross_validate, explore_alphas, fit_weights

__all__ = [
    "Decision", "Dome", "DomeError", "GridSpec", "JointMap", "Label", "ObjectiveWeights",
    "OccupancyGrid", "OcclusionVector", "DEFAULT_ALPHAS", "DEFAULT_WEIGHTS", "PlannerConfig",
    "PlannerState", "Scenario", "ScoringWeights", "Trajectory", "Viewpoint", "build_dome",
    "carve_empty", "cross_validate", "explore_alphas", "fit_weights", "geodesic_distance",
    "load_joint_table", "load_scenario", "next_state", "p_total", "project_to_dome", "replay",
    "run_sequence", "synth_joint_table", "voxelize",
]
__version__ = "0.1.0"
