"""Frontier evaluation: feasibility rate, hypervolume ratio, IGD+.

All normalized quantities use the reference frontier's ideal and nadir
points only, so a prediction can never move the comparison scale, and the
fixed hypervolume reference point (1.1, 1.1) in normalized space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frontier import Frontier
from .problems import DEFAULT_FEAS_TOL, ProblemInstance, check_feasible, evaluate

HV_REFERENCE = (1.1, 1.1)


class MetricsError(ValueError):
    """Metric inputs violate a precondition."""


@dataclass(frozen=True)
class MetricsReport:
    feasibility: float
    hvr: float
    igd_plus: float | None    # None when no feasible prediction exists
    n_feasible: int
    n_parsed: int
    ideal: tuple[float, float]
    nadir: tuple[float, float]


@dataclass(frozen=True)
class MetricsSummary:
    count: int
    feasibility_mean: float
    feasibility_std: float
    hvr_mean: float
    hvr_std: float
    igd_plus_mean: float | None
    igd_plus_std: float | None
    igd_plus_defined: int
    igd_plus_undefined: int


def hypervolume_2d(points, ref=HV_REFERENCE) -> float:
    """Exact area dominated by ``points`` and bounded by ``ref``.

    Union of the closed boxes [y1, r1] x [y2, r2] via a single
    sort-and-sweep; dominated points contribute nothing extra, points at
    or beyond the reference in either coordinate contribute zero area.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    ref = np.asarray(ref, dtype=float)
    if not np.isfinite(ref).all():
        raise MetricsError("reference point must be finite")
    if pts.shape[0] and not np.isfinite(pts).all():
        raise MetricsError("objective pairs must be finite")
    pts = pts[(pts < ref).all(axis=1)]
    if pts.shape[0] == 0:
        return 0.0
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    floor = np.minimum.accumulate(pts[:, 1])
    edges = np.r_[pts[1:, 0], ref[0]]
    return float(np.sum((edges - pts[:, 0]) * (ref[1] - floor)))


def igd_plus_distance(reference_objectives, predicted_objectives, ideal, nadir):
    """Mean over reference points of the one-sided nearest distance.

    Both sets are normalized by (ideal, nadir); the distance from a
    predicted point to a reference point only counts the coordinates
    where the prediction is worse: || max(pred - ref, 0) ||_2. Returns
    None when there are no predictions.
    """
    R = np.asarray(reference_objectives, dtype=float).reshape(-1, 2)
    P = np.asarray(predicted_objectives, dtype=float).reshape(-1, 2)
    if R.shape[0] == 0:
        raise MetricsError("reference set must be non-empty")
    if P.shape[0] == 0:
        return None
    ideal = np.asarray(ideal, dtype=float)
    span = np.asarray(nadir, dtype=float) - ideal
    if not (np.isfinite(span).all() and (span > 0).all()):
        raise MetricsError("degenerate normalization span")
    Zr = (R - ideal) / span
    Zp = (P - ideal) / span
    gaps = np.maximum(Zp[None, :, :] - Zr[:, None, :], 0.0)
    return float(np.linalg.norm(gaps, axis=2).min(axis=1).mean())


def evaluate_prediction(
    instance: ProblemInstance,
    predicted,
    reference: Frontier,
    tol: float = DEFAULT_FEAS_TOL,
) -> MetricsReport:
    """Score predicted decision vectors against a reference frontier.

    Feasibility is the fraction of predictions passing check_feasible at
    ``tol``; objectives of the feasible ones are recomputed exactly.
    hvr is 0 when nothing feasible survives, and igd_plus is the None
    flag in that case so aggregation can exclude it.
    """
    ref_obj = reference.objectives
    if ref_obj.shape[0] < 2:
        raise MetricsError("reference frontier must have at least 2 points")
    ideal = ref_obj.min(axis=0)
    nadir = ref_obj.max(axis=0)
    span = nadir - ideal
    if not (span > 0).all():
        raise MetricsError("degenerate normalization span")

    P = np.asarray(predicted, dtype=float)
    if P.size == 0:
        P = P.reshape(0, instance.n)
    if P.ndim != 2 or P.shape[1] != instance.n:
        raise MetricsError("predicted must be a list of length-n vectors")
    n_parsed = P.shape[0]
    feas = (
        check_feasible(instance, P, tol) if n_parsed else np.zeros(0, dtype=bool)
    )
    X = P[feas]
    n_feasible = X.shape[0]
    F = evaluate(instance, X)

    hv_ref = hypervolume_2d((ref_obj - ideal) / span, HV_REFERENCE)
    hv_pred = hypervolume_2d((F - ideal) / span, HV_REFERENCE)
    return MetricsReport(
        feasibility=n_feasible / n_parsed if n_parsed else 0.0,
        hvr=hv_pred / hv_ref if hv_ref > 0 else 0.0,
        igd_plus=igd_plus_distance(ref_obj, F, ideal, nadir),
        n_feasible=n_feasible,
        n_parsed=n_parsed,
        ideal=(float(ideal[0]), float(ideal[1])),
        nadir=(float(nadir[0]), float(nadir[1])),
    )


def aggregate(reports) -> MetricsSummary:
    """Mean and population std per metric over per-instance reports.

    Undefined igd_plus entries are excluded from its mean and std but
    counted, per the evaluation protocol.
    """
    reports = list(reports)
    if not reports:
        raise MetricsError("aggregate needs at least one report")
    feas = np.array([r.feasibility for r in reports])
    hvr = np.array([r.hvr for r in reports])
    igd = np.array([r.igd_plus for r in reports if r.igd_plus is not None])
    return MetricsSummary(
        count=len(reports),
        feasibility_mean=float(feas.mean()),
        feasibility_std=float(feas.std()),
        hvr_mean=float(hvr.mean()),
        hvr_std=float(hvr.std()),
        igd_plus_mean=float(igd.mean()) if igd.size else None,
        igd_plus_std=float(igd.std()) if igd.size else None,
        igd_plus_defined=int(igd.size),
        igd_plus_undefined=len(reports) - int(igd.size),
    )
