import math

import numpy as np
import pytest

from oracles import best_grid_residual

from dnbv.objective import DEFAULT_WEIGHTS, ObjectiveWeights
from dnbv.occupancy import OcclusionVector
from dnbv.training import (
    DEFAULT_ALPHAS,
    Design,
    NonIdentifiableError,
    ScoringWeights,
    TrainingSet,
    alpha_grid,
    behavior_table_csv,
    cross_validate,
    cv_splits,
    explore_alphas,
    fit_weights,
    frame_block,
    residual,
    score_from_terms,
    score_tilde,
    select_alphas,
    simplex_lstsq,
)


def test_score_examples():
    a = ScoringWeights(0.5, 1.0, 2.0)
    assert score_from_terms(1, 0.0, 0.0, a) == pytest.approx(3.5, abs=1e-15)
    assert score_from_terms(0, 0.0, 0.0, a) == pytest.approx(3.0, abs=1e-15)
    value = float(score_from_terms(1, 0.30, 0.44, a))
    assert value == pytest.approx(0.5 + math.exp(-0.30) + 2 * math.exp(-0.44), abs=1e-12)
    # 0.5 + 0.7408182207 + 2 * 0.6440364211
    assert value == pytest.approx(2.5288910628, abs=1e-9)


def test_score_tilde_on_dome(edge_dome):
    a = DEFAULT_ALPHAS
    free = OcclusionVector.zeros(edge_dome)
    top = edge_dome.viewpoint(1)
    # current = candidate: d = 0
    assert score_tilde(1, 1, edge_dome, free, a) == pytest.approx(0.5 + 1 + 2 * math.exp(-top.theta), abs=1e-12)
    counts = np.zeros(len(edge_dome), dtype=int)
    counts[edge_dome.position_of(9)] = 3
    blocked = OcclusionVector(counts, edge_dome.indices)
    assert score_tilde(4, 9, edge_dome, free, a) - score_tilde(4, 9, edge_dome, blocked, a) == pytest.approx(0.5)
    v4, v9 = edge_dome.viewpoint(4), edge_dome.viewpoint(9)
    d = 0.7 * math.acos(float(np.clip(v4.direction @ v9.direction, -1, 1)))
    expected = 0.5 + math.exp(-d) + 2 * math.exp(-v9.theta)
    assert score_tilde(4, 9, edge_dome, free, a) == pytest.approx(expected, abs=1e-9)


def test_score_monotone():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = ScoringWeights(*rng.uniform(0.1, 3, 3))
        d, t = rng.uniform(0, 1.5, 2)
        base = score_from_terms(1, d, t, a)
        assert score_from_terms(1, d * rng.uniform(), t, a) >= base
        assert score_from_terms(1, d, t * rng.uniform(), a) >= base
        assert score_from_terms(1, d, t, a) - score_from_terms(0, d, t, a) == pytest.approx(a.s, abs=1e-12)


def test_alpha_grid_has_64_rows():
    grid = alpha_grid()
    assert len(grid) == 64 and len({g.as_tuple() for g in grid}) == 64
    assert all(set(g.as_tuple()) <= {0.5, 1.0, 1.5, 2.0} for g in grid)
    with pytest.raises(ValueError):
        ScoringWeights(0.0, 1.0, 1.0)


def test_simplex_lstsq_against_grid():
    rng = np.random.default_rng(1)
    for _ in range(5):
        A = rng.uniform(0, 1, (60, 4))
        b = rng.uniform(0.2, 1.2, 60)
        w = simplex_lstsq(A, b)
        assert np.all(w >= 0) and abs(w.sum() - 1) < 1e-12
        res = residual(A, b, w)
        assert res <= best_grid_residual(A, b, 0.02) + 1e-9
        for k in range(4):
            assert res <= residual(A, b, np.eye(4)[k]) + 1e-12


def test_fit_recovers_interior_weights():
    rng = np.random.default_rng(2)
    A = rng.uniform(0, 1, (80, 4))
    w_star = np.array([0.3, 0.1, 0.45, 0.15])
    fit = fit_weights(Design(A, A @ w_star))
    assert np.allclose(fit.weights.as_array(), w_star, atol=1e-9)
    assert fit.train_residual < 1e-20


def test_free_gain_recovers_scale():
    rng = np.random.default_rng(3)
    A = rng.uniform(0, 1, (80, 4))
    w_star = np.array([0.2, 0.2, 0.5, 0.1])
    fit = fit_weights(Design(A, 2.5 * A @ w_star), free_gain=True)
    assert fit.gain == pytest.approx(2.5, rel=1e-9)
    assert np.allclose(fit.weights.as_array(), w_star, atol=1e-9)


def test_fit_errors():
    A = np.tile([0.2, 0.3, 0.1, 0.4], (10, 1))
    with pytest.raises(NonIdentifiableError):
        fit_weights(Design(A, np.ones(10)))
    with pytest.raises(ValueError, match="4"):
        fit_weights(Design(np.eye(4)[:3], np.ones(3)))


def test_cv_splits_counts():
    assert len(cv_splits(8, 0.5)) == 70
    assert len(cv_splits(2, 0.5)) == 2
    for train, test in cv_splits(6, 0.5):
        assert sorted(train + test) == list(range(6)) and len(train) == 3
    with pytest.raises(ValueError):
        cv_splits(1, 0.5)


def test_frame_block_matches_score_tilde(desk_scenario):
    scn = desk_scenario
    m = scn.occlusion(1)
    blk = frame_block(scn.dome, scn.joint_map, m, scn.m0)
    b = blk.targets(DEFAULT_ALPHAS)
    rng = np.random.default_rng(4)
    for _ in range(40):
        s, c = rng.integers(len(blk.starts), size=2)
        expected = score_tilde(int(blk.starts[s]), int(blk.candidates[c]), scn.dome, m, DEFAULT_ALPHAS, scn.m0)
        assert b[s, c] == pytest.approx(expected, abs=1e-12)
    assert blk.A.shape == (41, 41, 4)


@pytest.fixture(scope="module")
def desk_set(desk_scenario):
    return TrainingSet([desk_scenario])


def test_behavior_matches_replay(desk_scenario, desk_set):
    from dnbv.planner import PlannerConfig, replay

    cfg = PlannerConfig(DEFAULT_WEIGHTS, desk_scenario.m0)
    jumps = sum(replay(desk_scenario, s, cfg).jumps for s in desk_scenario.reachable_starts())
    metrics = desk_set.behavior(DEFAULT_WEIGHTS)
    assert metrics.jump_count == jumps
    assert metrics.decisions == 41 * len(desk_scenario)


def test_duplicated_scenarios_give_equal_train_and_test_residuals(desk_scenario):
    cv = cross_validate([desk_scenario] * 8, DEFAULT_ALPHAS, 0.5)
    assert len(cv.fits) == 70
    assert np.allclose(cv.train_residuals, cv.test_residuals, rtol=1e-9, atol=1e-9)
    summary = cv.summary()
    assert summary["splits"] == 70
    lines = cv.to_csv().splitlines()
    assert len(lines) == 71 and lines[0].startswith("split,train,test,w_vis")


def test_explore_rows_and_selection(desk_set):
    rows = explore_alphas(desk_set, values=(0.5, 2.0))
    assert len(rows) == 8
    best = select_alphas(rows)
    key = (best.metrics.jump_count, best.metrics.avg_distance, -best.metrics.avg_z_increase)
    assert all(key <= (r.metrics.jump_count, r.metrics.avg_distance, -r.metrics.avg_z_increase) for r in rows)
    table = behavior_table_csv(rows).splitlines()
    assert len(table) == 9 and table[0].startswith("alpha_s,alpha_d,alpha_theta")
    for r in rows:
        assert r.metrics.jump_count >= 0 and math.isfinite(r.metrics.avg_distance)
        assert abs(r.fit.weights.as_array().sum() - 1) < 1e-9


def test_explore_on_unoccluded_scenario_never_jumps(empty_scenario):
    rows = explore_alphas([empty_scenario])
    assert len(rows) == 64
    jumps = {r.alphas.as_tuple(): r.metrics.jump_count for r in rows}
    assert all(j == 0 for j in jumps.values()), f"alpha rows with jumps: {sum(j > 0 for j in jumps.values())}"


def test_fitted_weights_prefer_travel_over_visibility(eight_scenarios):
    fit = fit_weights(TrainingSet(eight_scenarios).design(DEFAULT_ALPHAS))
    w = fit.weights
    assert w.dist > w.vis, f"fitted {w}"


def test_default_weights_meet_behavior_targets(empty_scenario):
    # the reference weights keep still on a scene without occluders
    metrics = TrainingSet([empty_scenario]).behavior(DEFAULT_WEIGHTS)
    assert metrics.jump_count == 0
    one_hot = TrainingSet([empty_scenario]).behavior(ObjectiveWeights(0, 0, 1, 0))
    assert one_hot.jump_count == 0
