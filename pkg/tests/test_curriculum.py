"""Curriculum schedule and alignment-loss tests.

The alignment losses claim to equal the 1-Wasserstein distance to a point
mass on the target. The oracle below computes that distance through the
CDF integral on the real line, a different formula from the module's
expected-gap form, so agreement is a real cross-check.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paretogen.codec import build_vocabulary
from paretogen.curriculum import (
    MASK_FRAC,
    MASK_IGNORE,
    MASK_INT,
    CurriculumError,
    PhaseWeights,
    PositionBatch,
    ScheduleConfig,
    ValueTable,
    coarse_loss,
    fine_loss,
    schedule,
    total_loss,
)


def wasserstein_to_dirac(values, probs, target_value):
    """W1 between the discrete law (values, probs) and a Dirac at target.

    Computed as the integral of |F_p(x) - F_dirac(x)| over the merged
    support, independent of the transport closed form under test.
    """
    support = np.append(np.asarray(values, dtype=float), float(target_value))
    order = np.argsort(support, kind="stable")
    support = support[order]
    mass = np.append(np.asarray(probs, dtype=float), 0.0)[order]
    dirac = np.append(np.zeros(len(values)), 1.0)[order]
    cdf_gap = np.abs(np.cumsum(mass - dirac))[:-1]
    return float(np.sum(cdf_gap * np.diff(support)))


def toy_vocab(coarse=(0.0, 1.0, 2.0), fine=(0.0, 0.1, 0.2)):
    return ValueTable(coarse_values=np.array(coarse), fine_values=np.array(fine))


def single_row_batch(probs, target, kind):
    probs = np.asarray(probs, dtype=float)
    return PositionBatch(
        distributions=probs[None, :],
        targets=np.array([target]),
        mask=np.array([kind]),
    )


class TestSchedule:
    def test_phase_one_is_cross_entropy_only(self):
        assert schedule(0.1) == PhaseWeights(ce=1.0, coarse=0.0, fine=0.0)
        assert schedule(0.0) == PhaseWeights(ce=1.0, coarse=0.0, fine=0.0)

    def test_phase_two_midpoint(self):
        w = schedule(0.325)
        assert w.ce == pytest.approx(0.7, abs=1e-12)
        assert w.coarse == pytest.approx(0.5, abs=1e-12)
        assert w.fine == 0.0

    def test_phase_three_endpoint(self):
        w = schedule(1.0)
        assert w == PhaseWeights(ce=0.4, coarse=1.0, fine=0.5)

    @pytest.mark.parametrize("milestone", [0.15, 0.50])
    def test_continuous_at_milestones(self, milestone):
        lo = schedule(milestone - 1e-9)
        hi = schedule(milestone + 1e-9)
        at = schedule(milestone)
        for a, b in [(lo, at), (at, hi)]:
            assert abs(a.ce - b.ce) <= 1e-6
            assert abs(a.coarse - b.coarse) <= 1e-6
            assert abs(a.fine - b.fine) <= 1e-6

    @pytest.mark.parametrize("r", [-0.01, 1.01, float("nan"), float("inf")])
    def test_progress_outside_unit_interval_rejected(self, r):
        with pytest.raises(CurriculumError, match="outside"):
            schedule(r)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"r1": 0.5, "r2": 0.5},
            {"r1": 0.0},
            {"r2": 1.0},
            {"r1": 0.6, "r2": 0.4},
            {"lambda_min": 1.5},
            {"lambda_min": -0.1},
            {"beta_max": -1.0},
            {"gamma_max": -0.5},
        ],
    )
    def test_config_validation(self, kwargs):
        with pytest.raises(CurriculumError):
            ScheduleConfig(**kwargs)

    @given(
        ra=st.floats(min_value=0.0, max_value=1.0),
        rb=st.floats(min_value=0.0, max_value=1.0),
    )
    def test_weights_move_monotonically_with_progress(self, ra, rb):
        if ra > rb:
            ra, rb = rb, ra
        early, late = schedule(ra), schedule(rb)
        assert late.ce <= early.ce + 1e-12
        assert late.coarse >= early.coarse - 1e-12
        assert late.fine >= early.fine - 1e-12

    def test_custom_config_changes_milestones(self):
        cfg = ScheduleConfig(r1=0.2, r2=0.6, lambda_min=0.5, beta_max=2.0, gamma_max=1.0)
        assert schedule(0.1, cfg) == PhaseWeights(1.0, 0.0, 0.0)
        w = schedule(0.4, cfg)    # tau = 0.5
        assert w.ce == pytest.approx(0.75)
        assert w.coarse == pytest.approx(1.0)
        assert schedule(1.0, cfg) == PhaseWeights(0.5, 2.0, 1.0)


class TestPositionBatch:
    def test_row_sum_validated_not_repaired(self):
        with pytest.raises(CurriculumError, match="sums to"):
            PositionBatch(
                distributions=[[0.5, 0.4]], targets=[0], mask=[MASK_INT]
            )

    def test_negative_probability_rejected(self):
        with pytest.raises(CurriculumError, match="nonnegative"):
            PositionBatch(
                distributions=[[1.5, -0.5]], targets=[0], mask=[MASK_INT]
            )

    def test_target_out_of_vocabulary_rejected(self):
        with pytest.raises(CurriculumError, match="targets"):
            PositionBatch(distributions=[[0.5, 0.5]], targets=[2], mask=[MASK_INT])

    def test_unknown_mask_code_rejected(self):
        with pytest.raises(CurriculumError, match="mask"):
            PositionBatch(distributions=[[0.5, 0.5]], targets=[0], mask=[7])

    def test_ragged_lengths_rejected(self):
        with pytest.raises(CurriculumError, match="length T"):
            PositionBatch(
                distributions=[[0.5, 0.5], [1.0, 0.0]], targets=[0], mask=[1, 1]
            )

    def test_arrays_become_read_only(self):
        batch = single_row_batch([0.5, 0.5], 0, MASK_INT)
        with pytest.raises(ValueError):
            batch.distributions[0, 0] = 1.0

    def test_tiny_normalization_slack_accepted(self):
        row = np.array([0.5, 0.5 + 5e-7])
        batch = single_row_batch(row, 0, MASK_INT)
        assert batch.distributions.shape == (1, 2)


class TestCoarseLoss:
    def test_dirac_on_target_is_zero(self):
        vocab = toy_vocab()
        batch = single_row_batch([0.0, 1.0, 0.0], 1, MASK_INT)
        assert coarse_loss(batch, vocab) == 0.0

    def test_worked_example(self):
        vocab = toy_vocab(coarse=(0.0, 1.0, 2.0))
        batch = single_row_batch([0.5, 0.25, 0.25], 1, MASK_INT)
        assert coarse_loss(batch, vocab) == 0.75

    def test_empty_mask_contributes_zero(self):
        vocab = toy_vocab()
        batch = single_row_batch([0.2, 0.3, 0.5], 0, MASK_FRAC)
        assert coarse_loss(batch, vocab) == 0.0

    def test_width_mismatch_rejected(self):
        vocab = toy_vocab(coarse=(0.0, 1.0))
        batch = single_row_batch([0.2, 0.3, 0.5], 0, MASK_INT)
        with pytest.raises(CurriculumError, match="value map"):
            coarse_loss(batch, vocab)

    def test_mean_over_masked_rows_only(self):
        vocab = toy_vocab()
        batch = PositionBatch(
            distributions=[
                [0.5, 0.25, 0.25],    # int row, loss 0.75
                [0.0, 1.0, 0.0],      # int row, loss 0
                [1.0, 0.0, 0.0],      # ignored
                [1.0, 0.0, 0.0],      # frac row
            ],
            targets=[1, 1, 0, 0],
            mask=[MASK_INT, MASK_INT, MASK_IGNORE, MASK_FRAC],
        )
        assert coarse_loss(batch, vocab) == pytest.approx(0.375, abs=1e-15)

    def test_matches_wasserstein_oracle_on_random_distributions(self):
        rng = np.random.default_rng(7)
        for trial in range(100):
            v = int(rng.integers(2, 40))
            values = np.sort(rng.uniform(-99.9, 99.9, size=v))
            probs = rng.dirichlet(np.ones(v))
            target = int(rng.integers(v))
            vocab = ValueTable(coarse_values=values, fine_values=values)
            batch = single_row_batch(probs, target, MASK_INT)
            expected = wasserstein_to_dirac(values, probs, values[target])
            assert coarse_loss(batch, vocab) == pytest.approx(expected, abs=1e-12)

    @given(
        probs=st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=3, max_size=3),
        shift=st.floats(min_value=0.0, max_value=1.0),
    )
    @settings(max_examples=60)
    def test_moving_mass_toward_target_never_raises_loss(self, probs, shift):
        # coarse grid 0,1,2 with target value 1: column 2 is never farther
        # from the target than column 0, so shifting mass 0 -> 2 cannot help
        # and shifting 0 -> 1 cannot hurt
        vocab = toy_vocab(coarse=(0.0, 1.0, 2.0))
        p = np.asarray(probs) / np.sum(probs)
        moved = p.copy()
        delta = shift * p[0]
        moved[0] -= delta
        moved[1] += delta
        base = coarse_loss(single_row_batch(p, 1, MASK_INT), vocab)
        after = coarse_loss(single_row_batch(moved, 1, MASK_INT), vocab)
        assert after <= base + 1e-12

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        values = rng.uniform(-5, 5, size=11)
        probs = rng.dirichlet(np.ones(11))
        perm = rng.permutation(11)
        base = coarse_loss(
            single_row_batch(probs, 4, MASK_INT),
            ValueTable(coarse_values=values, fine_values=values),
        )
        inverse = np.argsort(perm)
        permuted = coarse_loss(
            single_row_batch(probs[inverse], int(np.flatnonzero(perm == 4)[0]), MASK_INT),
            ValueTable(coarse_values=values[inverse], fine_values=values[inverse]),
        )
        assert permuted == pytest.approx(base, abs=1e-14)


class TestFineLoss:
    def test_dirac_on_target_is_zero(self):
        vocab = toy_vocab()
        batch = single_row_batch([0.0, 0.0, 1.0], 2, MASK_FRAC)
        assert fine_loss(batch, vocab) == 0.0

    def test_worked_example(self):
        vocab = ValueTable(coarse_values=[0.0, 1.0], fine_values=[0.0, 0.999])
        batch = single_row_batch([0.9, 0.1], 0, MASK_FRAC)
        assert fine_loss(batch, vocab) == pytest.approx(0.0999, abs=1e-15)

    def test_matches_wasserstein_oracle_on_random_distributions(self):
        rng = np.random.default_rng(11)
        for trial in range(100):
            v = int(rng.integers(2, 30))
            values = rng.uniform(0.0, 0.1, size=v)
            probs = rng.dirichlet(np.full(v, 0.7))
            target = int(rng.integers(v))
            vocab = ValueTable(coarse_values=values, fine_values=values)
            batch = single_row_batch(probs, target, MASK_FRAC)
            expected = wasserstein_to_dirac(values, probs, values[target])
            assert fine_loss(batch, vocab) == pytest.approx(expected, abs=1e-12)


class TestRealVocabulary:
    def test_coarse_gap_between_sign_mirrored_tokens(self):
        vocab = build_vocabulary()
        probs = np.zeros(len(vocab.int_tokens))
        probs[vocab.int_index("<s0i012>")] = 0.75
        probs[vocab.int_index("<s1i012>")] = 0.25
        batch = single_row_batch(probs, vocab.int_index("<s0i012>"), MASK_INT)
        # 0.25 of the mass sits at coarse value -1.2, a gap of 2.4
        assert coarse_loss(batch, vocab) == pytest.approx(0.6, abs=1e-12)

    def test_fine_dirac_is_zero(self):
        vocab = build_vocabulary()
        probs = np.zeros(len(vocab.frac_tokens))
        probs[vocab.frac_index("<d345>")] = 1.0
        batch = single_row_batch(probs, vocab.frac_index("<d345>"), MASK_FRAC)
        assert fine_loss(batch, vocab) == 0.0


class TestTotalLoss:
    def total_batch(self):
        # int row with loss 0.75, frac row with loss 0.1
        return PositionBatch(
            distributions=[[0.5, 0.25, 0.25], [0.0, 1.0, 0.0]],
            targets=[1, 0],
            mask=[MASK_INT, MASK_FRAC],
        ), toy_vocab(coarse=(0.0, 1.0, 2.0), fine=(0.0, 0.1, 0.2))

    def test_phase_one_returns_cross_entropy_exactly(self):
        batch, vocab = self.total_batch()
        assert total_loss(1.7, batch, 0.1, vocab=vocab) == 1.7

    def test_final_phase_worked_example(self):
        batch, vocab = self.total_batch()
        assert total_loss(1.0, batch, 1.0, vocab=vocab) == pytest.approx(1.20, abs=1e-12)

    def test_zero_everywhere_stays_zero(self):
        vocab = toy_vocab()
        batch = single_row_batch([0.0, 1.0, 0.0], 1, MASK_INT)
        for r in (0.0, 0.3, 0.7, 1.0):
            assert total_loss(0.0, batch, r, vocab=vocab) == 0.0

    def test_negative_cross_entropy_rejected(self):
        batch, vocab = self.total_batch()
        with pytest.raises(CurriculumError, match="cross-entropy"):
            total_loss(-1.0, batch, 0.5, vocab=vocab)

    def test_missing_vocabulary_rejected(self):
        batch, _ = self.total_batch()
        with pytest.raises(CurriculumError, match="vocabulary"):
            total_loss(1.0, batch, 0.5)

    def test_custom_config_weighting(self):
        batch, vocab = self.total_batch()
        cfg = ScheduleConfig(r1=0.1, r2=0.2, lambda_min=0.0, beta_max=2.0, gamma_max=2.0)
        # r=1: weights (0, 2, 2) -> 2*0.75 + 2*0.1
        assert total_loss(5.0, batch, 1.0, cfg, vocab) == pytest.approx(1.7, abs=1e-12)
