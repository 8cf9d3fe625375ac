"""Three-phase training curriculum: loss-weight schedule plus coarse and
fine numerical alignment losses over per-position token distributions.

Cross-entropy stays with the training stack; ``total_loss`` consumes it as
a plain scalar so everything here remains framework-free and exactly
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# mask codes for PositionBatch.mask
MASK_IGNORE = 0
MASK_INT = 1
MASK_FRAC = 2

_ROW_SUM_TOL = 1e-6


class CurriculumError(ValueError):
    """Schedule or loss inputs violate a precondition."""


@dataclass(frozen=True)
class ScheduleConfig:
    """Milestones and weight ceilings of the three-phase schedule."""

    r1: float = 0.15
    r2: float = 0.50
    lambda_min: float = 0.4
    beta_max: float = 1.0
    gamma_max: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.r1 < self.r2 < 1.0):
            raise CurriculumError(
                f"need 0 < r1 < r2 < 1, got r1={self.r1}, r2={self.r2}"
            )
        if not (0.0 <= self.lambda_min <= 1.0):
            raise CurriculumError(f"lambda_min={self.lambda_min} outside [0, 1]")
        if self.beta_max < 0.0 or self.gamma_max < 0.0:
            raise CurriculumError("beta_max and gamma_max must be nonnegative")


@dataclass(frozen=True)
class PhaseWeights:
    """Multipliers (cross-entropy, coarse alignment, fine alignment)."""

    ce: float
    coarse: float
    fine: float


def schedule(r: float, config: ScheduleConfig = ScheduleConfig()) -> PhaseWeights:
    """Loss weights at training progress ``r`` in [0, 1].

    Phase 1 is cross-entropy only; phase 2 ramps the coarse weight in while
    easing cross-entropy down to ``lambda_min``; phase 3 ramps the fine
    weight. Continuous at both milestones.
    """
    r = float(r)
    if not np.isfinite(r) or r < 0.0 or r > 1.0:
        raise CurriculumError(f"progress r={r} outside [0, 1]")
    if r < config.r1:
        return PhaseWeights(ce=1.0, coarse=0.0, fine=0.0)
    if r < config.r2:
        tau = (r - config.r1) / (config.r2 - config.r1)
        return PhaseWeights(
            ce=1.0 - tau * (1.0 - config.lambda_min),
            coarse=tau * config.beta_max,
            fine=0.0,
        )
    rho = (r - config.r2) / (1.0 - config.r2)
    return PhaseWeights(
        ce=config.lambda_min,
        coarse=config.beta_max,
        fine=rho * config.gamma_max,
    )


@dataclass(frozen=True)
class ValueTable:
    """Token-value maps for a custom vocabulary.

    Any object exposing ``coarse_values`` and ``fine_values`` 1-D arrays
    works where a vocabulary is expected; this is the minimal such carrier
    for synthetic vocabularies in tests and experiments.
    """

    coarse_values: np.ndarray
    fine_values: np.ndarray

    def __post_init__(self):
        for name in ("coarse_values", "fine_values"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 1 or arr.size == 0 or not np.isfinite(arr).all():
                raise CurriculumError(f"{name} must be a nonempty finite 1-D array")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class PositionBatch:
    """Per-position probability rows with targets and a role mask.

    ``distributions`` is (T, V) over one numerical sub-vocabulary; ``mask``
    marks each row MASK_INT, MASK_FRAC, or MASK_IGNORE. Rows must already be
    probabilities: normalization is validated, never repaired.
    """

    distributions: np.ndarray
    targets: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        probs = np.array(self.distributions, dtype=float)
        targets = np.array(self.targets, dtype=np.intp)
        mask = np.array(self.mask, dtype=np.intp)
        if probs.ndim != 2:
            raise CurriculumError("distributions must be a (T, V) matrix")
        t, v = probs.shape
        if targets.shape != (t,) or mask.shape != (t,):
            raise CurriculumError("targets and mask must have length T")
        if not np.isfinite(probs).all() or (probs < 0.0).any():
            raise CurriculumError("distribution entries must be finite and nonnegative")
        if t and np.abs(probs.sum(axis=1) - 1.0).max() > _ROW_SUM_TOL:
            bad = int(np.abs(probs.sum(axis=1) - 1.0).argmax())
            raise CurriculumError(
                f"distribution row {bad} sums to {probs[bad].sum()!r}, not 1"
            )
        if t and (targets.min() < 0 or targets.max() >= v):
            raise CurriculumError(f"targets must index the {v} vocabulary columns")
        if not np.isin(mask, (MASK_IGNORE, MASK_INT, MASK_FRAC)).all():
            raise CurriculumError("mask entries must be 0 (ignore), 1 (int), or 2 (frac)")
        for name, arr in (("distributions", probs), ("targets", targets), ("mask", mask)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _alignment_loss(batch: PositionBatch, kind: int, values: np.ndarray) -> float:
    rows = np.flatnonzero(batch.mask == kind)
    if rows.size == 0:
        return 0.0
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.shape[0] != batch.distributions.shape[1]:
        raise CurriculumError(
            f"value map length {values.shape} does not match the"
            f" {batch.distributions.shape[1]}-column distributions"
        )
    gaps = np.abs(values[None, :] - values[batch.targets[rows], None])
    return float(np.mean(np.sum(batch.distributions[rows] * gaps, axis=1)))


def coarse_loss(batch: PositionBatch, vocab) -> float:
    """Mean over integer-prefix rows of the expected coarse-value gap.

    Equals the 1-Wasserstein distance from each row to a point mass on its
    target under the metric |c(j) - c(k)|; an empty mask contributes 0.
    """
    return _alignment_loss(batch, MASK_INT, vocab.coarse_values)


def fine_loss(batch: PositionBatch, vocab) -> float:
    """Fractional-suffix analogue of ``coarse_loss`` using fine values."""
    return _alignment_loss(batch, MASK_FRAC, vocab.fine_values)


def total_loss(
    ce: float,
    batch: PositionBatch,
    r: float,
    config: ScheduleConfig = ScheduleConfig(),
    vocab=None,
) -> float:
    """Schedule-weighted sum of cross-entropy and both alignment losses."""
    ce = float(ce)
    if not np.isfinite(ce) or ce < 0.0:
        raise CurriculumError(f"cross-entropy must be a finite nonnegative scalar, got {ce}")
    if vocab is None:
        raise CurriculumError("total_loss requires a vocabulary with value maps")
    weights = schedule(r, config)
    return (
        weights.ce * ce
        + weights.coarse * coarse_loss(batch, vocab)
        + weights.fine * fine_loss(batch, vocab)
    )
