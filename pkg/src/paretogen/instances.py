"""Randomized generation of feasible, conflict-bearing instances.

The recipe per instance: sample a box, sample two separated target points
inside it, then parameterize the family so each objective pulls toward its
own target. Linear rows are sampled to keep the box midpoint strictly
feasible. Every serialized quantity (bounds, parameters, solutions) must fit
the codec range, so parameter scales are tied to the box magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .codec import MAX_ABS, round4, round4_array
from .problems import FAMILIES, ProblemInstance
from .solver import SolverConfig, SolverError, minimize_scalarized_batch

_CENTER_RANGE = 60.0
_BOUND_CLIP = 99.9
_PARAM_CAP = 95.0  # keep headroom below the codec limit
_MIN_SEPARATION = 0.15  # of the box diagonal


class GenerationError(ValueError):
    """Config cannot produce a representable instance."""


@dataclass(frozen=True)
class GenConfig:
    family: str
    n: int
    seed: int = 2024
    num_cons: int = 1
    m_obj_ratio: float = 1.0
    bound_span: tuple[float, float] = (5.0, 35.0)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GenerationError(f"unknown family {self.family!r}")
        if not (1 <= self.n <= 64):
            raise GenerationError("n must lie in [1, 64]")
        if self.num_cons not in (0, 1, 2):
            raise GenerationError("num_cons must be 0, 1, or 2")
        if not (0.0 < self.m_obj_ratio <= 2.0):
            raise GenerationError("m_obj_ratio must lie in (0, 2]")
        lo, hi = self.bound_span
        if not (np.isfinite(lo) and np.isfinite(hi) and 0.0 < lo <= hi):
            raise GenerationError("bound_span must satisfy 0 < min <= max")
        if _CENTER_RANGE + hi - _BOUND_CLIP > _BOUND_CLIP + _BOUND_CLIP:
            raise GenerationError("bound_span cannot produce representable bounds")


def _sample_box(rng: np.random.Generator, config: GenConfig):
    centers = rng.uniform(-_CENTER_RANGE, _CENTER_RANGE, config.n)
    half = rng.uniform(*config.bound_span, config.n)
    lower = round4_array(np.clip(centers - half, -_BOUND_CLIP, _BOUND_CLIP))
    upper = round4_array(np.clip(centers + half, -_BOUND_CLIP, _BOUND_CLIP))
    if not (lower < upper).all():
        raise GenerationError("sampled bounds collapsed after clipping")
    return lower, upper


def _sample_targets(rng: np.random.Generator, lower, upper):
    """Two separated points in the inner 70% of the box."""
    width = upper - lower
    diag = float(np.linalg.norm(width))

    def draw():
        return lower + (0.15 + 0.7 * rng.random(lower.size)) * width

    t1 = draw()
    for _ in range(50):
        t2 = draw()
        if np.linalg.norm(t2 - t1) > _MIN_SEPARATION * diag:
            return t1, t2
    # deterministic fallback: reflect through the center
    center = 0.5 * (lower + upper)
    return t1, np.clip(2.0 * center - t1, lower + 0.15 * width, upper - 0.15 * width)


def _sample_constraints(rng: np.random.Generator, config: GenConfig, lower, upper):
    x0 = 0.5 * (lower + upper)
    rows, rhs = [], []
    for _ in range(config.num_cons):
        raw = rng.uniform(-3.0, 3.0, config.n)
        # l1 norm < 1 so 4-decimal rounding of any point moves a.x by less
        # than the 5e-5 feasibility tolerance (and keeps a.x, rhs in range)
        target = rng.uniform(0.4, 0.9)
        row = round4_array(raw * (target / max(float(np.abs(raw).sum()), 1e-9)))
        slack = rng.uniform(0.5, 5.0)
        rows.append(row)
        rhs.append(round4(float(row @ x0) + slack))
    if not rows:
        return np.zeros((0, config.n)), np.zeros(0)
    return np.array(rows), np.array(rhs)


def _shrink_until(build, t1, t2, lower, upper):
    """Shrink targets toward the center until every parameter fits the codec."""
    center = 0.5 * (lower + upper)
    for _ in range(40):
        params = build(t1, t2)
        worst = max(
            (np.abs(np.asarray(v)).max() for v in params.values()), default=0.0
        )
        if worst <= _PARAM_CAP:
            return params
        t1 = center + 0.8 * (t1 - center)
        t2 = center + 0.8 * (t2 - center)
    raise GenerationError("could not fit parameters into the codec range")


def _family_params(rng, config, lower, upper, t1, t2):
    n = config.n
    fam = config.family
    if fam == "sbqp":
        a = rng.uniform(0.1, 0.5, n)
        alpha = rng.uniform(0.1, 0.5, n)
        return _shrink_until(
            lambda u, v: {"a": a, "b": -2.0 * a * u, "alpha": alpha, "beta": -2.0 * alpha * v},
            t1, t2, lower, upper,
        )
    if fam == "boqp":
        box_mag = max(np.abs(lower).max(), np.abs(upper).max())
        qs = []
        for _ in range(2):
            R = rng.standard_normal((n, n))
            Q = R.T @ R / n + 0.1 * np.eye(n)
            top = float(np.linalg.eigvalsh(Q)[-1])
            # operator norm small enough that q = -Q t fits the codec
            cap = 0.8 * _PARAM_CAP / (np.sqrt(n) * box_mag * top)
            Q *= min(1.0, cap)
            qs.append(0.5 * (Q + Q.T))
        return _shrink_until(
            lambda u, v: {
                "Q1": qs[0], "q1": -qs[0] @ u, "c1": 0.0,
                "Q2": qs[1], "q2": -qs[1] @ v, "c2": 0.0,
            },
            t1, t2, lower, upper,
        )

    m_obj = max(1, round(config.m_obj_ratio * n))
    width = upper - lower
    mats = []
    for target in (t1, t2):
        raw = rng.standard_normal((m_obj, n))
        raw /= np.maximum(np.linalg.norm(raw, axis=1, keepdims=True), 1e-12)
        if fam == "softplus":
            # keep the affine response inside the active nonlinear band
            reach = np.abs(raw) @ np.maximum(upper - target, target - lower)
            rows = raw * (6.0 / np.maximum(reach, 1e-9))[:, None]
        else:
            rows = raw * (0.5 / np.sqrt(n)) * rng.uniform(0.5, 1.5, (m_obj, 1))
        mats.append(rows)

    lam = [0.0, 0.0]
    for i in (0, 1):
        curvature = float(np.trace(mats[i].T @ mats[i]) / n)
        lam[i] = max(0.001, rng.uniform(0.2, 1.0) * curvature)

    def build(u, v):
        params = {
            "A1": mats[0], "b1": mats[0] @ u, "lambda1": lam[0],
            "A2": mats[1], "b2": mats[1] @ v, "lambda2": lam[1],
        }
        if fam == "huber":
            r1 = mats[0] @ (v - u)
            r2 = mats[1] @ (u - v)
            params = {
                "A1": mats[0], "b1": params["b1"],
                "lambda1": lam[0], "delta1": max(0.01, float(np.median(np.abs(r1)))),
                "A2": mats[1], "b2": params["b2"],
                "lambda2": lam[1], "delta2": max(0.01, float(np.median(np.abs(r2)))),
            }
        return params

    return _shrink_until(build, t1, t2, lower, upper)


def generate(config: GenConfig) -> ProblemInstance:
    """Deterministically build one instance; draw order is part of the format.

    Every number in the returned instance lies exactly on the 4-decimal grid,
    so serializing and re-parsing it reproduces the same problem bit-for-bit.
    """
    rng = np.random.default_rng(config.seed)
    lower, upper = _sample_box(rng, config)
    t1, t2 = _sample_targets(rng, lower, upper)
    cons_matrix, cons_rhs = _sample_constraints(rng, config, lower, upper)
    params = {
        name: round4(value) if np.ndim(value) == 0 else round4_array(value)
        for name, value in _family_params(rng, config, lower, upper, t1, t2).items()
    }
    return ProblemInstance(
        family=config.family,
        n=config.n,
        lower=lower,
        upper=upper,
        cons_matrix=cons_matrix,
        cons_rhs=cons_rhs,
        params=params,
        instance_id=f"{config.family}-n{config.n}-c{config.num_cons}-s{config.seed}",
    )


def generate_batch(config: GenConfig, count: int) -> list[ProblemInstance]:
    """count instances seeded seed, seed+1, ... for deterministic parallelism."""
    if count < 1:
        raise GenerationError("count must be positive")
    return [generate(replace(config, seed=config.seed + i)) for i in range(count)]


def anchor_solutions(
    instance: ProblemInstance, config: SolverConfig = SolverConfig()
) -> tuple[np.ndarray, np.ndarray]:
    """(argmin f1, argmin f2) over the feasible set, rounded to 4 decimals."""
    first, second = minimize_scalarized_batch(instance, [1.0, 0.0], config)
    for which, res in (("f1", first), ("f2", second)):
        if not res.converged:
            raise SolverError(
                f"anchor solve for {which} did not converge: "
                f"kkt={res.kkt_residual:.3e} after {res.iterations} iterations"
            )
    return round4_array(first.x), round4_array(second.x)
