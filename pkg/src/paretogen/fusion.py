"""Fusing candidate solutions from several decoding passes into one frontier.

The pooled candidates go through the same four filters as the reference
pipeline (round, recompute, dedup, feasibility), then a non-dominated sort;
the output is filled front-by-front so the first Pareto front is never
sacrificed for spread, topping up from deeper fronts until K points. The
fallback keeps the instance scoreable: a short pool yields a short frontier
with a shortfall flag, never an exception.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frontier import Frontier, arc_select, clean_candidates, nondominated_mask
from .problems import ProblemInstance

_SELECTION_MODES = ("front_by_front", "union")


class FusionError(ValueError):
    """Fusion inputs violate a precondition."""


@dataclass(frozen=True)
class CandidatePool:
    """Decision vectors from N decoding passes, in pass order."""

    passes: tuple[np.ndarray, ...]
    instance_id: str = ""

    def __post_init__(self):
        converted = []
        width = None
        for i, block in enumerate(self.passes):
            arr = np.asarray(block, dtype=float)
            if arr.size == 0:
                arr = arr.reshape(0, width if width is not None else 0)
            if arr.ndim != 2:
                raise FusionError(f"pass {i} must be a (m, n) block of vectors")
            if width is None and arr.shape[0]:
                width = arr.shape[1]
            if width is not None and arr.shape[0] and arr.shape[1] != width:
                raise FusionError("all candidate vectors must share one length")
            arr.setflags(write=False)
            converted.append(arr)
        object.__setattr__(self, "passes", tuple(converted))

    def stacked(self, n: int) -> np.ndarray:
        """All candidates in pass order as one (m, n) block."""
        blocks = [b for b in self.passes if b.shape[0]]
        if not blocks:
            return np.zeros((0, n))
        out = np.vstack(blocks)
        if out.shape[1] != n:
            raise FusionError(f"candidate vectors have length {out.shape[1]}, expected {n}")
        return out


@dataclass(frozen=True)
class FusionConfig:
    k: int = 20
    tol: float = 5e-5
    obj_tol: float = 1e-4
    decimals: int = 4
    selection_mode: str = "front_by_front"

    def __post_init__(self):
        if self.k < 2:
            raise FusionError("k must be at least 2")
        if self.tol < 0 or self.obj_tol <= 0:
            raise FusionError("tolerances must be positive")
        if self.selection_mode not in _SELECTION_MODES:
            raise FusionError(f"selection_mode must be one of {_SELECTION_MODES}")


def nondominated_sort(objectives) -> list[np.ndarray]:
    """Partition into Pareto fronts: each front is the PF of what remains.

    Returns index arrays into ``objectives``; every index appears in
    exactly one front.
    """
    obj = np.asarray(objectives, dtype=float).reshape(-1, 2)
    remaining = np.arange(obj.shape[0])
    fronts = []
    while remaining.size:
        mask = nondominated_mask(obj[remaining])
        fronts.append(remaining[mask])
        remaining = remaining[~mask]
    return fronts


def _arc_pick(objectives, count, ideal, nadir) -> np.ndarray:
    """count arc-spread indices from one f1-sorted front (count >= 1)."""
    if count >= 2:
        return arc_select(objectives, count, ideal, nadir)
    span = np.maximum(np.asarray(nadir, float) - np.asarray(ideal, float), 1e-12)
    z = (np.asarray(objectives, float) - ideal) / span
    cum = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(z, axis=0), axis=1))]
    # a single representative sits nearest the middle of the arc
    return np.array([int(np.argmin(np.abs(cum - 0.5 * cum[-1])))])


def fuse(
    instance: ProblemInstance,
    pool: CandidatePool,
    config: FusionConfig = FusionConfig(),
) -> Frontier:
    """Filter the pooled passes and select K frontier points.

    front_by_front keeps whole fronts while they fit and arc-selects
    representatives from the first front that does not; union sorts all
    feasible survivors by (f1, f2) and arc-selects K directly. Fewer than
    K feasible survivors are all returned with the shortfall flag set
    (dominated points may then remain; zero survivors give an empty
    frontier).
    """
    dec, obj = clean_candidates(
        instance,
        pool.stacked(instance.n),
        decimals=config.decimals,
        obj_tol=config.obj_tol,
        feas_tol=config.tol,
    )
    m = dec.shape[0]
    instance_id = pool.instance_id or instance.instance_id
    if m <= config.k:
        order = np.lexsort((obj[:, 1], obj[:, 0]))
        return Frontier(
            decisions=dec[order],
            objectives=obj[order],
            instance_id=instance_id,
            shortfall=m < config.k,
        )

    if config.selection_mode == "union":
        order = np.lexsort((obj[:, 1], obj[:, 0]))
        sel = order[arc_select(obj[order], config.k, obj.min(axis=0), obj.max(axis=0))]
    else:
        sel = []
        for front in nondominated_sort(obj):
            room = config.k - len(sel)
            if room == 0:
                break
            front = front[np.argsort(obj[front, 0], kind="stable")]
            if front.size <= room:
                sel.extend(front)
            else:
                fo = obj[front]
                sel.extend(front[_arc_pick(fo, room, fo.min(axis=0), fo.max(axis=0))])
        sel = np.array(sel)

    sel = sel[np.lexsort((obj[sel, 1], obj[sel, 0]))]
    return Frontier(
        decisions=dec[sel],
        objectives=obj[sel],
        instance_id=instance_id,
        shortfall=False,
    )
