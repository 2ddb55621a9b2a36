import logging

import numpy as np
import pytest

from dnbv.dome import geodesic_distance
from dnbv.objective import DEFAULT_WEIGHTS, ObjectiveWeights, PlannerState
from dnbv.occupancy import OcclusionVector
from dnbv.planner import PlannerConfig, next_state, replay, run_sequence


def occlusion_with(dome, free, count=5):
    counts = np.full(len(dome), count)
    for i in free:
        counts[dome.position_of(i)] = 0
    return OcclusionVector(counts, dome.indices)


def test_stay_when_only_current_is_free(edge_dome, edge_joints):
    for cur in (1, 11, 22, 40):
        d = next_state(PlannerState.at(edge_dome, edge_joints, cur), occlusion_with(edge_dome, [cur]),
                       edge_dome, edge_joints)
        assert d.to_index == cur and not d.moved and not d.all_occluded


def test_move_to_the_only_free_candidate(edge_dome, edge_joints):
    # exhaustive over (current, free) pairs with the default weights
    for cur in edge_joints.reachable:
        for free in edge_joints.reachable[::5]:
            if free == cur:
                continue
            d = next_state(PlannerState.at(edge_dome, edge_joints, cur), occlusion_with(edge_dome, [free]),
                           edge_dome, edge_joints)
            assert d.to_index == free


def test_all_occluded_sets_flag(edge_dome, edge_joints, caplog):
    with caplog.at_level(logging.WARNING, logger="dnbv.planner"):
        d = next_state(PlannerState.at(edge_dome, edge_joints, 11), occlusion_with(edge_dome, []),
                       edge_dome, edge_joints)
    assert d.all_occluded and "occluded" in caplog.text
    assert d.to_index in edge_joints.reachable


def test_decision_fields_and_tie_disjunction(edge_dome, edge_joints):
    rng = np.random.default_rng(0)
    for _ in range(60):
        cur = int(rng.choice(edge_joints.reachable))
        m = OcclusionVector(rng.integers(0, 6, len(edge_dome)), edge_dome.indices)
        d = next_state(PlannerState.at(edge_dome, edge_joints, cur), m, edge_dome, edge_joints)
        bd = d.breakdown
        best = bd.p_total[bd.row_of(d.to_index)]
        assert best == bd.p_total.max()
        if d.moved:
            here = bd.p_total[bd.row_of(cur)]
            assert best > here or (best == here and d.to_index < cur)
        assert d.geodesic_moved == pytest.approx(geodesic_distance(cur, d.to_index, edge_dome), abs=1e-12)
        assert d.angle_to == edge_dome.viewpoint(d.to_index).theta
        rec = d.to_record()
        assert f"to_index: {d.to_index}\n" in rec and f"from_index: {cur}\n" in rec


def test_exact_ties_resolved_to_lowest_index(edge_dome, edge_joints):
    cfg = PlannerConfig(ObjectiveWeights(0, 1, 0, 0))
    d = next_state(PlannerState.at(edge_dome, edge_joints, 30), occlusion_with(edge_dome, [12, 30, 5]),
                   edge_dome, edge_joints, cfg)
    assert d.to_index == 5


def test_sequence_chains_and_is_deterministic(edge_dome, edge_joints):
    rng = np.random.default_rng(1)
    frames = [OcclusionVector(rng.integers(0, 6, len(edge_dome)), edge_dome.indices) for _ in range(6)]
    a = run_sequence(frames, 22, edge_dome, edge_joints)
    b = run_sequence(frames, 22, edge_dome, edge_joints)
    assert a.to_csv() == b.to_csv()
    for prev, nxt in zip(a.decisions, a.decisions[1:]):
        assert prev.to_index == nxt.from_index
    assert a.path[0] == 22 and len(a.path) == 7
    assert a.jumps == sum(1 for x, y in zip(a.path, a.path[1:]) if x != y)


def test_single_frame_equals_next_state(edge_dome, edge_joints):
    m = occlusion_with(edge_dome, [3, 9, 17])
    traj = run_sequence([m], 3 + 8, edge_dome, edge_joints)
    d = next_state(PlannerState.at(edge_dome, edge_joints, 11), m, edge_dome, edge_joints)
    assert len(traj) == 1 and traj.decisions[0].to_index == d.to_index
    assert np.array_equal(traj.decisions[0].breakdown.p_total, d.breakdown.p_total)


def test_start_must_be_reachable(edge_dome, edge_joints):
    with pytest.raises(ValueError):
        run_sequence([], 7, edge_dome, edge_joints)
    with pytest.raises(ValueError):
        run_sequence([], 99, edge_dome, edge_joints)


def test_unoccluded_replay_never_moves(empty_scenario):
    for start in empty_scenario.reachable_starts():
        assert replay(empty_scenario, start).jumps == 0


def test_desk_replay_avoids_occlusion(desk_scenario):
    cfg = PlannerConfig(DEFAULT_WEIGHTS, desk_scenario.m0)
    for start in (11, 3, 22):
        traj = replay(desk_scenario, start, cfg)
        assert len(traj) == 5
        for k, d in enumerate(traj):
            m = desk_scenario.occlusion(k)
            assert m.counts[desk_scenario.dome.position_of(d.to_index)] < desk_scenario.m0
        assert traj.to_csv() == replay(desk_scenario, start, cfg).to_csv()
