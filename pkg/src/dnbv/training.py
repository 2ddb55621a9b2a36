"""Fitting the objective weights to a prescribed score, and behaviour exploration.

The prescribed score of moving from viewpoint i to candidate j is

    alpha_s * [j unoccluded] + alpha_d * exp(-d_ij) + alpha_theta * exp(-theta_j)

with ``d_ij`` the geodesic distance in metres.  Because the objective is
linear in its weights, fitting it to the score over all (i, j) pairs is a
least-squares problem on the probability simplex.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .dome import Dome, angle_between, fmt
from .objective import COMPONENTS, DEFAULT_M0, ObjectiveWeights, PlannerState, p_total
from .occupancy import OcclusionVector

ALPHA_VALUES = (0.5, 1.0, 1.5, 2.0)


class NonIdentifiableError(ValueError):
    """The design cannot distinguish weightings on the simplex."""


@dataclass(frozen=True)
class ScoringWeights:
    s: float
    d: float
    theta: float

    def __post_init__(self):
        if min(self.s, self.d, self.theta) <= 0:
            raise ValueError("scoring weights must be positive")

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.s, self.d, self.theta)


DEFAULT_ALPHAS = ScoringWeights(0.5, 1.0, 2.0)


def alpha_grid(values: Sequence[float] = ALPHA_VALUES) -> List[ScoringWeights]:
    """All ordered triples with repetition: 4**3 = 64 for the default values."""
    return [ScoringWeights(*t) for t in itertools.product(values, repeat=3)]


def score_from_terms(unoccluded, d, theta, alphas: ScoringWeights):
    """Prescribed score from its raw features (broadcasting); ``d`` in metres."""
    return (alphas.s * np.asarray(unoccluded, dtype=float) + alphas.d * np.exp(-np.asarray(d, dtype=float))
            + alphas.theta * np.exp(-np.asarray(theta, dtype=float)))


def score_tilde(
    current: int, candidate: int, dome: Dome, occlusion: OcclusionVector,
    alphas: ScoringWeights, m0: int = DEFAULT_M0,
) -> float:
    """Prescribed score for moving from ``current`` to ``candidate``.

    The angle term uses the candidate's viewpoint angle (the current angle
    cannot influence which candidate wins).
    """
    a = dome.viewpoint(current)
    b = dome.viewpoint(candidate)
    unoccluded = float(occlusion.counts[dome.position_of(candidate)] < m0)
    d = dome.radius * float(angle_between(a.direction, b.direction))
    return float(score_from_terms(unoccluded, d, b.theta, alphas))


@dataclass
class Design:
    """Stacked training pairs: component values (N, 4) and target scores (N,)."""

    A: np.ndarray
    b: np.ndarray
    groups: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.b)

    def subset(self, groups: Iterable[int]) -> "Design":
        if self.groups is None:
            raise ValueError("design has no group labels")
        mask = np.isin(self.groups, list(groups))
        return Design(self.A[mask], self.b[mask], self.groups[mask])


@dataclass
class FrameBlock:
    """Every (current, candidate) pair of one frame.

    ``A[s]`` holds the components for current viewpoint ``starts[s]`` over
    ``candidates``; ``terms[s]`` holds the three score features
    (unoccluded flag, exp(-d), exp(-theta)).
    """

    starts: np.ndarray
    candidates: np.ndarray
    A: np.ndarray
    terms: np.ndarray
    occluded: np.ndarray

    def targets(self, alphas: ScoringWeights) -> np.ndarray:
        return self.terms @ np.array(alphas.as_tuple())

    def decide(self, start_row: int, w: np.ndarray) -> int:
        """Candidate row of the argmax; ties to the lowest index (candidates ascend)."""
        return int(np.argmax(self.A[start_row] @ w))


def frame_block(dome: Dome, joint_map, occlusion: OcclusionVector, m0: int = DEFAULT_M0) -> FrameBlock:
    starts = np.array([int(i) for i in dome.indices if joint_map.is_reachable(i)], dtype=np.int64)
    rows = np.array([dome.position_of(i) for i in starts])
    dirs = dome.directions[rows]
    unocc = (occlusion.counts[rows] < m0).astype(float)
    angle_term = np.exp(-dome.thetas[rows])
    uniform = ObjectiveWeights(0.25, 0.25, 0.25, 0.25)
    A, terms = [], []
    for i in starts:
        state = PlannerState.at(dome, joint_map, i, occlusion)
        A.append(p_total(state, dome, joint_map, uniform, m0, candidates=starts).components())
        d = dome.radius * angle_between(dirs, state.direction)
        terms.append(np.column_stack([unocc, np.exp(-d), angle_term]))
    return FrameBlock(starts, starts, np.array(A), np.array(terms), unocc == 0)


def frame_design(
    dome: Dome, joint_map, occlusion: OcclusionVector, alphas: ScoringWeights, m0: int = DEFAULT_M0
) -> Tuple[np.ndarray, np.ndarray]:
    """All ordered pairs (current i, candidate j) over allowed, reachable viewpoints."""
    block = frame_block(dome, joint_map, occlusion, m0)
    return block.A.reshape(-1, 4), block.targets(alphas).reshape(-1)


class TrainingSet:
    """Frame blocks of several scenarios, built once and reused for every alpha row."""

    def __init__(self, scenarios):
        self.scenarios = list(scenarios)
        if not self.scenarios:
            raise ValueError("need at least one scenario")
        self.blocks: List[List[FrameBlock]] = [
            [frame_block(s.dome, s.joint_map, m, s.m0) for m in s.occlusions()] for s in self.scenarios
        ]

    def __len__(self) -> int:
        return len(self.scenarios)

    def design(self, alphas: ScoringWeights) -> Design:
        """Design over every frame of every scenario; ``groups`` is the scenario position."""
        As, bs, gs = [], [], []
        for g, blocks in enumerate(self.blocks):
            for blk in blocks:
                As.append(blk.A.reshape(-1, 4))
                bs.append(blk.targets(alphas).reshape(-1))
                gs.append(np.full(len(bs[-1]), g))
        return Design(np.vstack(As), np.concatenate(bs), np.concatenate(gs))

    def behavior(self, weights: ObjectiveWeights) -> "BehaviorMetrics":
        """Replay every (scenario, start viewpoint) case from the cached blocks."""
        w = weights.as_array()
        jumps, dist, dz, total = 0, 0.0, 0.0, 0
        for scn, blocks in zip(self.scenarios, self.blocks):
            dome = scn.dome
            for start in scn.reachable_starts():
                cur = start
                for blk in blocks:
                    row = int(np.searchsorted(blk.starts, cur))
                    nxt = int(blk.candidates[blk.decide(row, w)])
                    total += 1
                    if nxt != cur:
                        a, b = dome.viewpoint(cur), dome.viewpoint(nxt)
                        jumps += 1
                        dist += dome.radius * float(angle_between(a.direction, b.direction))
                        dz += float((b.position - a.position) @ dome.up)
                    cur = nxt
        if jumps == 0:
            return BehaviorMetrics(0, 0.0, 0.0, total)
        return BehaviorMetrics(jumps, dist / jumps, dz / jumps, total)


def scenario_design(scenarios, alphas: ScoringWeights) -> Design:
    return TrainingSet(scenarios).design(alphas)


def residual(A: np.ndarray, b: np.ndarray, w) -> float:
    r = A @ np.asarray(w, dtype=float) - b
    return float(r @ r)


def _check_identifiable(A: np.ndarray) -> None:
    # directions within the simplex: e_k - e_0
    k = A.shape[1]
    basis = np.eye(k)[1:] - np.eye(k)[0]
    M = A @ basis.T
    scale = max(1.0, float(np.abs(A).max()))
    if np.linalg.matrix_rank(M, tol=1e-10 * scale * math.sqrt(len(A))) < k - 1:
        raise NonIdentifiableError(
            "component columns are linearly dependent on the simplex; weights are not identifiable"
        )


def simplex_lstsq(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """argmin ||A w - b||^2 subject to w >= 0, sum(w) = 1.

    Exact: for every support the equality-constrained problem is solved
    through its KKT system, and the best feasible candidate wins.  The
    convex optimum always lies in the relative interior of some face, so one
    of the supports reproduces it.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    k = A.shape[1]
    G = A.T @ A
    h = A.T @ b
    best, best_res = None, math.inf
    for size in range(1, k + 1):
        for support in itertools.combinations(range(k), size):
            s = list(support)
            kkt = np.zeros((size + 1, size + 1))
            kkt[:size, :size] = 2.0 * G[np.ix_(s, s)]
            kkt[:size, size] = 1.0
            kkt[size, :size] = 1.0
            rhs = np.concatenate([2.0 * h[s], [1.0]])
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:size]
            if np.any(sol < -1e-12):
                continue
            w = np.zeros(k)
            w[s] = np.clip(sol, 0.0, None)
            w /= w.sum()
            res = residual(A, b, w)
            if res < best_res - 1e-15:
                best, best_res = w, res
    return best


@dataclass
class FitResult:
    weights: ObjectiveWeights
    train_residual: float
    test_residual: Optional[float] = None
    gain: float = 1.0


def fit_weights(design: Design, free_gain: bool = False) -> FitResult:
    """Fit the objective weights to the prescribed score.

    Minimises ||A w - b||^2 over the simplex.  The objective is a mixture of
    normalised distributions while the score lives on the scale of the
    alphas, so ``free_gain=True`` also fits a positive gain ``c``:
    minimise ||c A w - b||^2 (non-negative least squares on ``u = c w``).
    """
    A, b = design.A, design.b
    if len(b) < 4:
        raise ValueError("need at least 4 training pairs")
    _check_identifiable(A)
    if not free_gain:
        w = simplex_lstsq(A, b)
        return FitResult(ObjectiveWeights.from_array(w), residual(A, b, w))
    u = _nnls(A, b)
    if u.sum() <= 0:
        raise NonIdentifiableError("all fitted weights are zero")
    gain = float(u.sum())
    w = u / gain
    return FitResult(ObjectiveWeights.from_array(w), residual(A, b, u), gain=gain)


def _nnls(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Non-negative least squares by exhaustive support search (4 columns)."""
    k = A.shape[1]
    best, best_res = np.zeros(k), residual(A, b, np.zeros(k))
    for size in range(1, k + 1):
        for support in itertools.combinations(range(k), size):
            s = list(support)
            sol = np.linalg.lstsq(A[:, s], b, rcond=None)[0]
            if np.any(sol < -1e-12):
                continue
            u = np.zeros(k)
            u[s] = np.clip(sol, 0.0, None)
            res = residual(A, b, u)
            if res < best_res - 1e-15:
                best, best_res = u, res
    return best


def evaluate_residual(design: Design, fit: FitResult) -> float:
    return residual(design.A, design.b, fit.gain * fit.weights.as_array())


@dataclass(frozen=True)
class BehaviorMetrics:
    jump_count: int
    avg_distance: float
    avg_z_increase: float
    decisions: int = 0


def behavior_metrics(scenarios, weights: ObjectiveWeights) -> BehaviorMetrics:
    """Run every (scenario, start viewpoint) case and summarise the moves."""
    data = scenarios if isinstance(scenarios, TrainingSet) else TrainingSet(scenarios)
    return data.behavior(weights)


@dataclass
class AlphaRow:
    alphas: ScoringWeights
    fit: FitResult
    metrics: BehaviorMetrics


def explore_alphas(scenarios, values: Sequence[float] = ALPHA_VALUES, free_gain: bool = False) -> List[AlphaRow]:
    """Fit weights for every alpha triple and measure the planner's behaviour."""
    data = scenarios if isinstance(scenarios, TrainingSet) else TrainingSet(scenarios)
    rows = []
    for alphas in alpha_grid(values):
        fit = fit_weights(data.design(alphas), free_gain)
        rows.append(AlphaRow(alphas, fit, data.behavior(fit.weights)))
    return rows


def select_alphas(rows: Sequence[AlphaRow]) -> AlphaRow:
    """Fewest jumps, then shortest average move, then largest upward move."""
    return min(
        rows,
        key=lambda r: (r.metrics.jump_count, r.metrics.avg_distance, -r.metrics.avg_z_increase),
    )


def behavior_table_csv(rows: Sequence[AlphaRow]) -> str:
    lines = ["alpha_s,alpha_d,alpha_theta," + ",".join(f"w_{c}" for c in COMPONENTS)
             + ",jump_count,avg_distance,avg_z_increase,residual"]
    for r in rows:
        w = ",".join(fmt(x) for x in r.fit.weights.as_array())
        lines.append(
            f"{fmt(r.alphas.s)},{fmt(r.alphas.d)},{fmt(r.alphas.theta)},{w},"
            f"{r.metrics.jump_count},{fmt(r.metrics.avg_distance)},"
            f"{fmt(r.metrics.avg_z_increase)},{fmt(r.fit.train_residual)}"
        )
    return "\n".join(lines) + "\n"


@dataclass
class CrossValidation:
    splits: List[Tuple[Tuple[int, ...], Tuple[int, ...]]]
    fits: List[FitResult]

    @property
    def train_residuals(self) -> np.ndarray:
        return np.array([f.train_residual for f in self.fits])

    @property
    def test_residuals(self) -> np.ndarray:
        return np.array([f.test_residual for f in self.fits])

    def summary(self) -> dict:
        tr, te = self.train_residuals, self.test_residuals
        W = np.array([f.weights.as_array() for f in self.fits])
        return {
            "splits": len(self.fits),
            "train_mean": float(tr.mean()), "train_min": float(tr.min()), "train_max": float(tr.max()),
            "test_mean": float(te.mean()), "test_min": float(te.min()), "test_max": float(te.max()),
            "weights_mean": W.mean(axis=0),
        }

    def to_csv(self) -> str:
        lines = ["split,train,test," + ",".join(f"w_{c}" for c in COMPONENTS)
                 + ",train_residual,test_residual"]
        for k, ((tr, te), f) in enumerate(zip(self.splits, self.fits)):
            w = ",".join(fmt(x) for x in f.weights.as_array())
            lines.append(
                f"{k},{' '.join(map(str, tr))},{' '.join(map(str, te))},{w},"
                f"{fmt(f.train_residual)},{fmt(f.test_residual)}"
            )
        return "\n".join(lines) + "\n"


def cv_splits(n: int, split: float = 0.5) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    """Every train/test partition with ``round(n * split)`` training scenarios."""
    k = int(round(n * split))
    if not 0 < k < n:
        raise ValueError(f"split {split} of {n} scenarios leaves an empty side")
    out = []
    for train in itertools.combinations(range(n), k):
        test = tuple(i for i in range(n) if i not in train)
        out.append((train, test))
    return out


def cross_validate(
    scenarios, alphas: ScoringWeights = DEFAULT_ALPHAS, split: float = 0.5,
    free_gain: bool = False, design: Optional[Design] = None,
) -> CrossValidation:
    data = scenarios if isinstance(scenarios, TrainingSet) else TrainingSet(scenarios)
    if design is None:
        design = data.design(alphas)
    splits = cv_splits(len(data), split)
    fits = []
    for train, test in splits:
        fit = fit_weights(design.subset(train), free_gain)
        fit.train_residual = evaluate_residual(design.subset(train), fit)
        fit.test_residual = evaluate_residual(design.subset(test), fit)
        fits.append(fit)
    return CrossValidation(splits, fits)
