"""Reference Pareto frontier construction.

Per instance: solve both anchor problems, run two epsilon-constraint
sweeps between the anchor objective values, then post-process the pooled
solutions (round to the output grid, recompute objectives, dedup, drop
infeasible and dominated points) and resample the surviving front to K
points at uniform normalized arc length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import round_to
from .problems import ProblemInstance, check_feasible, evaluate
from .solver import SolverConfig, minimize_eps_batch, minimize_scalarized_batch


class FrontierBuildError(RuntimeError):
    """Reference construction could not satisfy the frontier contract."""


@dataclass(frozen=True)
class PipelineConfig:
    num_eps: int = 100
    k: int = 20
    decimals: int = 4
    obj_tol: float = 1e-4
    feas_tol: float = 1e-4
    solver_seed: int = 42
    solver: SolverConfig = SolverConfig()

    def __post_init__(self):
        if self.k < 2:
            raise FrontierBuildError("k must be at least 2")
        if self.num_eps < self.k:
            raise FrontierBuildError("num_eps must be at least k")
        if self.decimals < 0:
            raise FrontierBuildError("decimals must be non-negative")
        if self.obj_tol <= 0 or self.feas_tol <= 0:
            raise FrontierBuildError("tolerances must be positive")


@dataclass(frozen=True)
class Frontier:
    """Rounded decision vectors with objectives recomputed from them.

    Points are ordered by ascending f1. Mutual non-domination and
    feasibility are guaranteed by the constructors (build_reference
    enforces both; the fusion fallback may legitimately keep dominated
    points), so neither is re-checked here.
    """

    decisions: np.ndarray     # (m, n)
    objectives: np.ndarray    # (m, 2)
    instance_id: str = ""
    shortfall: bool = False

    def __post_init__(self):
        dec = np.asarray(self.decisions, dtype=float)
        obj = np.asarray(self.objectives, dtype=float)
        if dec.ndim != 2 or obj.ndim != 2 or obj.shape != (dec.shape[0], 2):
            raise FrontierBuildError("decisions (m, n) and objectives (m, 2) required")
        if dec.size and not (np.isfinite(dec).all() and np.isfinite(obj).all()):
            raise FrontierBuildError("frontier values must be finite")
        if np.any(np.diff(obj[:, 0]) < 0):
            raise FrontierBuildError("points must be ordered by ascending f1")
        dec.setflags(write=False)
        obj.setflags(write=False)
        object.__setattr__(self, "decisions", dec)
        object.__setattr__(self, "objectives", obj)

    def __len__(self) -> int:
        return self.decisions.shape[0]


def nondominated_mask(objectives) -> np.ndarray:
    """Boolean mask of points no other point dominates.

    Dominance is component-wise <= with at least one strict inequality.
    Exact duplicate pairs keep only their first occurrence.
    """
    obj = np.asarray(objectives, dtype=float).reshape(-1, 2)
    m = obj.shape[0]
    if m == 0:
        return np.zeros(0, dtype=bool)
    if not np.isfinite(obj).all():
        raise FrontierBuildError("objective pairs must be finite")
    order = np.lexsort((np.arange(m), obj[:, 1], obj[:, 0]))
    f = obj[order]
    # first sorted position of each distinct f1 holds that group's best f2
    starts = np.flatnonzero(np.r_[True, f[1:, 0] != f[:-1, 0]])
    group_best = f[starts, 1]
    best_before = np.r_[np.inf, np.minimum.accumulate(group_best)[:-1]]
    mask = np.zeros(m, dtype=bool)
    mask[order[starts[group_best < best_before]]] = True
    return mask


def nondominated_filter(objectives) -> np.ndarray:
    """Non-dominated subset in stable (original) order."""
    obj = np.asarray(objectives, dtype=float).reshape(-1, 2)
    return obj[nondominated_mask(obj)]


def arc_select(objectives, k: int, ideal, nadir) -> np.ndarray:
    """Indices of k points at uniform normalized arc-length positions.

    ``objectives`` must be sorted by ascending f1. Both endpoints are
    always selected and the returned indices are strictly increasing;
    |points| <= k returns every index. Positions snap to the nearest
    existing point (ties to the earlier one) — no interpolation.
    """
    if k < 2:
        raise FrontierBuildError("k must be at least 2")
    obj = np.asarray(objectives, dtype=float).reshape(-1, 2)
    m = obj.shape[0]
    if m == 0:
        raise FrontierBuildError("cannot select from an empty front")
    if m <= k:
        return np.arange(m)
    span = np.maximum(np.asarray(nadir, float) - np.asarray(ideal, float), 1e-12)
    z = (obj - ideal) / span
    cum = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(z, axis=0), axis=1))]
    targets = np.linspace(0.0, cum[-1], k)
    pos = np.clip(np.searchsorted(cum, targets), 1, m - 1)
    nearest = np.where(targets - cum[pos - 1] <= cum[pos] - targets, pos - 1, pos)
    sel = np.empty(k, dtype=int)
    sel[0], sel[-1] = 0, m - 1
    prev = 0
    for j in range(1, k - 1):
        # clip into the window that leaves room for the slots after j
        sel[j] = prev = min(max(int(nearest[j]), prev + 1), m - k + j)
    return sel


def clean_candidates(
    instance: ProblemInstance,
    decisions,
    *,
    decimals: int = 4,
    obj_tol: float = 1e-4,
    feas_tol: float = 1e-4,
):
    """Shared candidate filters: round, recompute, dedup, drop infeasible.

    Rounds decisions to the output grid, recomputes objectives exactly
    from the rounded vectors, drops exact decision-vector duplicates and
    points whose objective pair lies within obj_tol (Euclidean, raw
    space) of an earlier kept one, then drops points failing
    check_feasible at feas_tol. Returns (decisions, objectives) in
    first-occurrence order.
    """
    X = np.asarray(decisions, dtype=float)
    if X.ndim != 2:
        raise FrontierBuildError("decisions must be a (m, n) array")
    if X.size == 0:
        return X.reshape(0, instance.n), np.zeros((0, 2))
    X = round_to(X, decimals)

    _, first = np.unique(X, axis=0, return_index=True)
    X = X[np.sort(first)]
    F = evaluate(instance, X)

    kept: list[int] = []
    for i in range(X.shape[0]):
        if kept:
            d = np.linalg.norm(F[kept] - F[i], axis=1)
            if d.min() <= obj_tol:
                continue
        kept.append(i)
    X, F = X[kept], F[kept]

    feas = check_feasible(instance, X, feas_tol)
    return X[feas], F[feas]


def postprocess(
    instance: ProblemInstance, decisions, config: PipelineConfig = PipelineConfig()
) -> Frontier:
    """Filter + resample pass over candidate decisions (idempotent).

    Applies clean_candidates, keeps the non-dominated subset, sorts by
    f1 and arc-resamples to exactly config.k points. Errors when fewer
    than k candidates survive.
    """
    dec, obj = clean_candidates(
        instance,
        decisions,
        decimals=config.decimals,
        obj_tol=config.obj_tol,
        feas_tol=config.feas_tol,
    )
    mask = nondominated_mask(obj)
    dec, obj = dec[mask], obj[mask]
    if dec.shape[0] < config.k:
        raise FrontierBuildError(
            f"only {dec.shape[0]} points survived filtering; need {config.k}"
        )
    order = np.argsort(obj[:, 0], kind="stable")
    dec, obj = dec[order], obj[order]
    sel = arc_select(obj, config.k, obj.min(axis=0), obj.max(axis=0))
    dec, obj = dec[sel], obj[sel]
    if not nondominated_mask(obj).all():
        raise FrontierBuildError("resampling broke mutual non-domination")
    return Frontier(decisions=dec, objectives=obj, instance_id=instance.instance_id)


def build_reference(
    instance: ProblemInstance, config: PipelineConfig = PipelineConfig()
) -> Frontier:
    """K-point reference frontier via anchors plus two epsilon sweeps.

    Unconverged sweep rows are dropped from the candidate pool (the
    surviving-count check still guards quality); a failed anchor solve is
    an error because the sweep ranges depend on it.
    """
    anchors = minimize_scalarized_batch(instance, [1.0, 0.0], config.solver)
    if not (anchors[0].converged and anchors[1].converged):
        bad = "f1" if not anchors[0].converged else "f2"
        raise FrontierBuildError(
            f"anchor solve for {bad} failed on {instance.instance_id or instance.family}"
        )
    pool = [anchors[0].x, anchors[1].x]
    f_anchor = np.array([r.objectives for r in anchors])
    for minimize_index in (0, 1):
        cap_index = 1 - minimize_index
        lo, hi = np.sort(f_anchor[:, cap_index])
        grid = np.linspace(lo, hi, config.num_eps + 2)[1:-1]
        for row in minimize_eps_batch(instance, minimize_index, grid, config.solver):
            if row.converged:
                pool.append(row.x)
    return postprocess(instance, np.vstack(pool), config)


def weighted_sum_predictions(
    instance: ProblemInstance,
    count: int = 20,
    decimals: int = 4,
    solver: SolverConfig = SolverConfig(),
) -> np.ndarray:
    """Baseline predictor: solutions of a uniform weight grid, rounded.

    Returns a (count, n) array of decision vectors, the direct
    competitor the generated frontiers are scored against.
    """
    if count < 2:
        raise FrontierBuildError("count must be at least 2")
    rows = minimize_scalarized_batch(instance, np.linspace(0.0, 1.0, count), solver)
    return round_to(np.stack([r.x for r in rows]), decimals)
